#include "ae/losses.hpp"

#include "ae/latent.hpp"
#include "ae/rng.hpp"

namespace ae {

namespace {
constexpr real kLeakySlope = real(0.2);
constexpr real kNormEps = real(1e-10);
}

void FeatureExtractor::add_stage(Tensor weight, Tensor bias, Tensor channel_weights, int stride) {
    for (real v : channel_weights.data)
        if (v < 0) throw std::invalid_argument("channel weights must be non-negative");
    Stage s;
    s.weight = make_var(std::move(weight));
    s.bias = make_var(std::move(bias));
    s.channel_weights = make_var(std::move(channel_weights));
    s.stride = stride;
    stages_.push_back(std::move(s));
}

std::vector<Var> FeatureExtractor::features(const Var& image) const {
    std::vector<Var> out;
    Var h = image;
    for (const auto& s : stages_) {
        h = leaky_relu(conv2d(h, s.weight, s.bias, s.stride, 1), kLeakySlope);
        out.push_back(h);
    }
    return out;
}

FeatureExtractor make_proxy_extractor(uint64_t seed) {
    FeatureExtractor f;
    const int chans[4] = {3, 8, 16, 32};
    const int strides[3] = {1, 2, 2};
    for (int i = 0; i < 3; ++i) {
        Rng rng(seed, 0x70657263ULL + static_cast<uint64_t>(i));
        Tensor w({chans[i + 1], chans[i], 3, 3});
        // He-style scale keeps activations in a sane range through the stack
        rng.fill_normal(w, 0, std::sqrt(2.0 / (9.0 * chans[i])));
        f.add_stage(std::move(w), Tensor({chans[i + 1]}), Tensor::full({chans[i + 1]}, 1), strides[i]);
    }
    return f;
}

static void check_images(const Var& x, const Var& y, const char* op) {
    if (!x->value.same_shape(y->value))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(x->value.shape) +
                         " vs " + shape_str(y->value.shape));
}

Var mse_loss(const Var& x, const Var& y) {
    check_images(x, y, "mse_loss");
    return mean_all(square(sub(x, y)));
}

static Var unit_normalize_channels(const Var& f) {
    return mul_spatial(f, rsqrt(sum_channels(square(f)), kNormEps));
}

Var perceptual_loss(const Var& x, const Var& y, const FeatureExtractor& f) {
    check_images(x, y, "perceptual_loss");
    std::vector<Var> fx = f.features(x);
    std::vector<Var> fy = f.features(y);
    Var loss = make_var(Tensor({1}));
    for (size_t i = 0; i < fx.size(); ++i) {
        Var d = square(sub(unit_normalize_channels(fx[i]), unit_normalize_channels(fy[i])));
        d = mul_cvec(d, f.stages()[i].channel_weights);
        loss = add(loss, mean_all(sum_channels(d)));
    }
    return loss;
}

Var total_loss(const Var& x, const Var& y, const FeatureExtractor& f) {
    return add(mse_loss(x, y), perceptual_loss(x, y, f));
}

}  // namespace ae
