#ifndef AE_DECODER_HPP
#define AE_DECODER_HPP

#include <vector>

#include "ae/checkpoint.hpp"
#include "ae/latent.hpp"
#include "ae/params.hpp"

namespace ae {

// The frozen generator: an 8-layer mapping network Z -> W plus the synthesis
// network with per-site noise injection, in the AdaIN (v1) and
// modulate/demodulate (v2) variants. Parameters live in a ParamStore and are
// never trained by this artifact; the *_var methods build a differentiable
// graph with respect to styles and noise only.
class Decoder {
public:
    explicit Decoder(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    const DecoderLayout& layout() const { return layout_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    void init(uint64_t seed);
    void load(const Checkpoint& ckpt);
    std::string digest() const { return params_.digest(); }

    // graph-building entry points, batched
    Var map_latent_var(const Var& z) const;                 // [N,n] -> [N,n]
    Var broadcast_w_var(const Var& w) const;                // [N,n] -> [N,S,n]
    Var synthesize_var(const Var& styles,                   // [N,S,n]
                       const std::vector<Var>& noise) const;  // site-ordered [N,1,h,w]

    // spec-facing single-sample API
    LatentCode map_latent(const LatentCode& z) const;
    LatentCode broadcast_w(const LatentCode& w) const;
    Image synthesize(const LatentCode& styles, const NoiseMapSet& noise) const;

private:
    ModelConfig config_;
    DecoderLayout layout_;
    ParamStore params_;

    void build_params();
    Var synthesize_v2(const Var& styles, const std::vector<Var>& noise) const;
    Var synthesize_v1(const Var& styles, const std::vector<Var>& noise) const;
};

// i.i.d. standard normal maps, one independent stream per site
NoiseMapSet sample_noise(const DecoderLayout& layout, uint64_t seed);

// batched helpers for wiring NoiseMapSets into graphs
std::vector<Var> noise_to_vars(const NoiseMapSet& set);
std::vector<Var> zero_noise_vars(const DecoderLayout& layout, int batch);

}  // namespace ae

#endif
