#ifndef AE_ENCODER_HPP
#define AE_ENCODER_HPP

#include <optional>
#include <vector>

#include "ae/checkpoint.hpp"
#include "ae/latent.hpp"
#include "ae/params.hpp"

namespace ae {

// number of residual blocks between two power-of-two resolutions:
// 2 start blocks plus 2 per downsampling step
int num_blocks(int insize, int outsize);

struct EncoderOutput {
    LatentCode latent;
    std::optional<NoiseMapSet> noise;
};

struct EncoderOutputVar {
    Var latent;               // [N,S,n] in W+ mode, [N,n] in Z mode
    std::vector<Var> noise;   // empty when the stage disables noise
};

// Which heads exist. The two-network strategy builds one encoder with only
// latent heads (L) and one with only noise heads (N).
struct EncoderHeads {
    bool latent = true;
    bool noise = true;
};

// Fully convolutional residual encoder with per-resolution projection heads.
// Pre-activation blocks, stride-2 downsampling in the first block of each
// resolution pair, channel doubling capped at max_channels.
class Encoder {
public:
    Encoder(ModelConfig config, EncoderHeads heads = {});

    const ModelConfig& config() const { return config_; }
    const DecoderLayout& layout() const { return layout_; }
    const EncoderHeads& heads() const { return heads_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    void init(uint64_t seed);
    void load(const Checkpoint& ckpt);
    std::string digest() const { return params_.digest(); }

    // with_noise=false is the stage-1 contract: no noise maps are emitted
    // and the decoder is fed zeros instead
    EncoderOutputVar encode_var(const Var& image, bool with_noise) const;
    EncoderOutput encode(const Image& image, bool with_noise) const;

    // "backbone" | "latent_head" | "noise_head"
    static std::string param_group(const std::string& name);

private:
    struct BlockSpec {
        int index;
        int in_ch, out_ch;
        int stride;
        int res;        // output resolution of the block
        bool split;     // has projection heads attached
        int slot;       // decoder style slot fed by this block (W+ mode)
        int site;       // decoder noise site fed by this block
    };

    ModelConfig config_;
    DecoderLayout layout_;
    EncoderHeads heads_;
    ParamStore params_;
    std::vector<BlockSpec> blocks_;

    void build_params();
    Var residual_block(const Var& x, const BlockSpec& blk) const;
};

// combine the outputs of an L encoder and an N encoder (no parameter sharing)
EncoderOutputVar encode_two_network(const Var& image, const Encoder& latent_net,
                                    const Encoder& noise_net, bool with_noise);

}  // namespace ae

#endif
