#ifndef AE_LOSSES_HPP
#define AE_LOSSES_HPP

#include <vector>

#include "ae/params.hpp"

namespace ae {

// Fixed feature pyramid for the perceptual term. Stages are strided
// convolutions with leaky ReLU; per-channel linear weights are non-negative
// and never trained. The desk-scale default is a seeded random pyramid
// ("proxy-perceptual"); a calibrated extractor can be plugged in through the
// same structure.
class FeatureExtractor {
public:
    struct Stage {
        Var weight;   // [O,I,k,k]
        Var bias;     // [O]
        Var channel_weights;  // [O], non-negative
        int stride;
    };

    FeatureExtractor() = default;

    void add_stage(Tensor weight, Tensor bias, Tensor channel_weights, int stride);
    size_t num_stages() const { return stages_.size(); }
    const std::vector<Stage>& stages() const { return stages_; }

    // feature maps after each stage, in order
    std::vector<Var> features(const Var& image) const;

private:
    std::vector<Stage> stages_;
};

// 3-stage random conv pyramid with unit channel weights, deterministic per seed
FeatureExtractor make_proxy_extractor(uint64_t seed);

// mean over all elements of (x - y)^2
Var mse_loss(const Var& x, const Var& y);
// sum over stages of the spatial mean of weighted squared differences
// between channel-unit-normalized features (the LPIPS form)
Var perceptual_loss(const Var& x, const Var& y, const FeatureExtractor& f);
// mse + perceptual, unit weights
Var total_loss(const Var& x, const Var& y, const FeatureExtractor& f);

}  // namespace ae

#endif
