#include "ae/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace ae {

EncoderOutput InversionModel::invert(const Image& image) const {
    if (!noise_net) return encoder.encode(image, true);

    image.check_range();
    const ModelConfig& cfg = encoder.config();
    if (image.height() != cfg.resolution || image.width() != cfg.resolution)
        throw ShapeError("invert: image is " + std::to_string(image.height()) + "x" +
                         std::to_string(image.width()) + ", model expects " +
                         std::to_string(cfg.resolution));
    Tensor batched({1, 3, cfg.resolution, cfg.resolution});
    batched.data = image.data.data;
    EncoderOutputVar v = encode_two_network(make_var(std::move(batched)), encoder, *noise_net, true);

    EncoderOutput out;
    if (cfg.projection_target == ProjectionTarget::WPLUS) {
        Tensor m({encoder.layout().style_slots, cfg.latent_dim});
        m.data = v.latent->value.data;
        out.latent = LatentCode::wplus(std::move(m));
    } else {
        Tensor z({cfg.latent_dim});
        z.data = v.latent->value.data;
        out.latent = LatentCode::z(std::move(z));
    }
    NoiseMapSet set;
    for (size_t i = 0; i < v.noise.size(); ++i) {
        const auto& site = encoder.layout().noise_spec[i];
        Tensor m({site.height, site.width});
        m.data = v.noise[i]->value.data;
        set.maps.push_back(std::move(m));
    }
    out.noise = std::move(set);
    return out;
}

Image InversionModel::synthesize(const LatentCode& latent, const NoiseMapSet& noise) const {
    return decoder.synthesize(latent, noise);
}

Image InversionModel::reconstruct(const Image& image) const {
    EncoderOutput o = invert(image);
    return synthesize(o.latent, *o.noise);
}

Tensor normalize_map(const Tensor& map) {
    auto [lo_it, hi_it] = std::minmax_element(map.data.begin(), map.data.end());
    real lo = *lo_it, hi = *hi_it;
    Tensor vis = map;
    if (hi == lo) {
        for (auto& v : vis.data) v = real(0.5);
    } else {
        for (auto& v : vis.data) v = (v - lo) / (hi - lo);
    }
    return vis;
}

std::vector<Tensor> visualize_noise(const Image& image, const InversionModel& model) {
    EncoderOutput o = model.invert(image);
    std::vector<Tensor> out;
    for (const Tensor& map : o.noise->maps) out.push_back(normalize_map(map));
    return out;
}

std::vector<NoiseShiftFrame> noise_shift(const Image& image, const InversionModel& model,
                                         int site, const std::vector<double>& factors) {
    for (double f : factors)
        if (!std::isfinite(f)) throw std::invalid_argument("noise_shift: non-finite factor");
    const int n_sites = static_cast<int>(model.decoder.layout().noise_spec.size());
    if (site != kAllSites && (site < 0 || site >= n_sites))
        throw std::invalid_argument("noise_shift: unknown site_id " + std::to_string(site));

    EncoderOutput o = model.invert(image);
    std::vector<int> sites;
    if (site == kAllSites)
        for (int s = 0; s < n_sites; ++s) sites.push_back(s);
    else
        sites.push_back(site);

    std::vector<NoiseShiftFrame> frames;
    for (int s : sites)
        for (double f : factors) {
            NoiseMapSet shifted = *o.noise;
            for (auto& v : shifted.maps[size_t(s)].data) v = real(double(v) * f);
            frames.push_back({s, f, model.synthesize(o.latent, shifted)});
        }
    return frames;
}

std::string to_string(InterpMode m) {
    switch (m) {
        case InterpMode::Both: return "both";
        case InterpMode::LatentOnly: return "latent";
        case InterpMode::NoiseOnly: return "noise";
    }
    return "?";
}

InterpMode interp_mode_from_string(const std::string& s) {
    if (s == "both") return InterpMode::Both;
    if (s == "latent" || s == "latent_only") return InterpMode::LatentOnly;
    if (s == "noise" || s == "noise_only") return InterpMode::NoiseOnly;
    throw std::invalid_argument("unknown interpolation mode '" + s + "' (both|latent|noise)");
}

namespace {

Tensor lerp(const Tensor& a, const Tensor& b, double alpha) {
    if (alpha == 0) return a;
    if (alpha == 1) return b;
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = real((1 - alpha) * double(a.data[i]) + alpha * double(b.data[i]));
    return out;
}

NoiseMapSet lerp(const NoiseMapSet& a, const NoiseMapSet& b, double alpha) {
    NoiseMapSet out;
    for (size_t i = 0; i < a.maps.size(); ++i) out.maps.push_back(lerp(a.maps[i], b.maps[i], alpha));
    return out;
}

}  // namespace

std::vector<Image> interpolate(const Image& img_a, const Image& img_b,
                               const InversionModel& model, int steps, InterpMode mode,
                               uint64_t noise_seed) {
    if (steps < 2) throw std::invalid_argument("interpolate: steps must be >= 2");
    if (img_a.height() != img_b.height() || img_a.width() != img_b.width())
        throw ShapeError("interpolate: image resolutions differ");

    EncoderOutput oa = model.invert(img_a);
    EncoderOutput ob = model.invert(img_b);
    NoiseMapSet pinned = mode == InterpMode::LatentOnly
                             ? sample_noise(model.decoder.layout(), noise_seed)
                             : NoiseMapSet{};

    std::vector<Image> frames;
    for (int i = 0; i < steps; ++i) {
        double alpha = double(i) / double(steps - 1);
        LatentCode latent = oa.latent;
        if (mode != InterpMode::NoiseOnly)
            latent.data = lerp(oa.latent.data, ob.latent.data, alpha);
        NoiseMapSet noise =
            mode == InterpMode::LatentOnly ? pinned : lerp(*oa.noise, *ob.noise, alpha);
        frames.push_back(model.synthesize(latent, noise));
    }
    return frames;
}

Tensor stitch_grid(const std::vector<Image>& frames, int cols) {
    if (frames.empty()) throw std::invalid_argument("stitch_grid: no frames");
    if (cols < 1) throw std::invalid_argument("stitch_grid: cols must be >= 1");
    const int H = frames[0].height(), W = frames[0].width();
    for (const auto& f : frames)
        if (f.height() != H || f.width() != W)
            throw ShapeError("stitch_grid: frames disagree on resolution");
    const int n = static_cast<int>(frames.size());
    const int rows = (n + cols - 1) / cols;
    Tensor grid = Tensor::full({3, rows * H, cols * W}, -1);
    for (int k = 0; k < n; ++k) {
        const int r = k / cols, c = k % cols;
        for (int ch = 0; ch < 3; ++ch)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j)
                    grid.data[((size_t(ch) * rows * H) + size_t(r) * H + i) * size_t(cols) * W +
                              size_t(c) * W + j] =
                        frames[size_t(k)].data.data[(size_t(ch) * H + i) * W + j];
    }
    return grid;
}

}  // namespace ae
