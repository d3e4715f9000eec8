#ifndef AE_TRAINER_HPP
#define AE_TRAINER_HPP

#include <memory>
#include <optional>
#include <ostream>

#include "ae/decoder.hpp"
#include "ae/encoder.hpp"
#include "ae/losses.hpp"

namespace ae {

enum class Strategy { Plain, TwoNetwork, LrSplit };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct DenoiseConfig {
    std::vector<double> sigma_set{15, 25, 50};  // on the 0..255 scale
    bool blind = true;
};

struct TrainConfig {
    int64_t iterations = 2000;
    int batch_size = 4;
    double base_lr = 1e-4;
    Strategy strategy = Strategy::Plain;
    double lr_split_ratio = 0.01;
    int64_t stage_boundary = -1;  // -1: iterations/2 for two-stage strategies
    std::optional<DenoiseConfig> denoise;
    uint64_t seed = 0;
    int64_t checkpoint_every = 0;  // 0: final checkpoint only
    int64_t log_every = 25;

    void validate() const;
    int64_t boundary() const;
    // 1 before the stage boundary, 2 after; Plain is always stage 1
    int stage_at(int64_t t) const;
};

struct GroupLr {
    double backbone = 0;
    double latent = 0;
    double noise = 0;
};

// cosine annealing to zero over the full run; stage rules per strategy
GroupLr schedule_lr(int64_t t, const TrainConfig& cfg);

// noisy = clip(clean + g, -1, 1), g ~ N(0, 2*sigma/255) in image units;
// the target of a denoising pair is the clean input itself
Tensor make_denoise_batch(const Tensor& clean, double sigma, uint64_t seed);

// Adam with per-group learning rates; groups with lr == 0 are left untouched
// (parameters and moments), which is how stages freeze parts of the model.
class Adam {
public:
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void step(ParamStore& params, const std::function<double(const std::string&)>& lr_of);

private:
    struct Moments {
        Tensor m, v;
        int64_t t = 0;
    };
    std::map<std::string, Moments> state_;
};

struct StepResult {
    double mse = 0;
    double lpips = 0;
    double total = 0;
    GroupLr lr;
};

// Deterministic shuffled pass over [0, n): position p belongs to epoch p/n
// and maps through a per-epoch Fisher-Yates permutation.
class EpochSampler {
public:
    EpochSampler(uint64_t seed, int64_t n);
    int64_t index_at(int64_t position);

private:
    uint64_t seed_;
    int64_t n_;
    int64_t cached_epoch_ = -1;
    std::vector<int64_t> perm_;
};

// Owns the encoder(s) and optimizer state; the decoder is borrowed and must
// stay frozen, which is checked against its digest on every run.
class Trainer {
public:
    Trainer(ModelConfig model, TrainConfig cfg, Decoder& decoder);

    Encoder& latent_encoder() { return *latent_enc_; }
    Encoder* noise_encoder() { return noise_enc_.get(); }
    const TrainConfig& config() const { return cfg_; }
    int64_t iteration() const { return iter_; }
    const FeatureExtractor& extractor() const { return extractor_; }

    // one Adam update on a [N,3,R,R] batch; throws on non-finite loss
    StepResult train_step(const Tensor& input, const Tensor& target);

    // full run over a dataset, with periodic checkpoints and a CSV metrics log
    void run(const std::vector<Tensor>& data, const std::string& out_dir,
             std::ostream* csv_log = nullptr);

    // reconstruction graph for the current encoder state
    Var reconstruct_var(const Var& image, bool with_noise) const;

private:
    ModelConfig model_;
    TrainConfig cfg_;
    Decoder& decoder_;
    std::unique_ptr<Encoder> latent_enc_;   // full encoder for plain/lr_split, L for two_network
    std::unique_ptr<Encoder> noise_enc_;    // N for two_network
    FeatureExtractor extractor_;
    Adam adam_latent_, adam_noise_;
    int64_t iter_ = 0;
    std::string decoder_digest_;

    void save_encoders(const std::string& out_dir, const std::string& suffix) const;
};

}  // namespace ae

#endif
