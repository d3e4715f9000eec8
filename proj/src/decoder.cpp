#include "ae/decoder.hpp"

namespace ae {

namespace {
constexpr real kLeakySlope = real(0.2);
constexpr real kDemodEps = real(1e-8);
constexpr real kNormEps = real(1e-8);
}  // namespace

Decoder::Decoder(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    layout_ = derive_layout(config_);
    build_params();
    params_.set_trainable(false);  // decoder is a frozen consumer of checkpoints
}

void Decoder::build_params() {
    const int n = config_.latent_dim;
    for (int i = 0; i < config_.mapping_layers; ++i) {
        std::string p = "mapping." + std::to_string(i);
        params_.add(p + ".weight", Tensor({n, n}));
        params_.add(p + ".bias", Tensor({n}));
    }

    const int c4 = config_.channels_at(4);
    params_.add("synthesis.const", Tensor({c4, 4, 4}));

    if (config_.decoder_version == DecoderVersion::V2) {
        int slot = 0;
        int prev_ch = c4;
        for (int res : layout_.resolutions) {
            int ch = config_.channels_at(res);
            for (int c = 0; c < 2; ++c) {
                int in_ch = (c == 0) ? prev_ch : ch;
                std::string p = "synthesis.conv" + std::to_string(slot);
                params_.add(p + ".weight", Tensor({ch, in_ch, 3, 3}));
                params_.add(p + ".bias", Tensor({ch}));
                params_.add(p + ".affine.weight", Tensor({in_ch, n}));
                params_.add(p + ".affine.bias", Tensor({in_ch}));
                params_.add(p + ".noise_strength", Tensor({ch}));
                ++slot;
            }
            prev_ch = ch;
        }
    } else {
        int prev_ch = c4;
        for (int res : layout_.resolutions) {
            int ch = config_.channels_at(res);
            for (int c = 0; c < 2; ++c) {
                int in_ch = (c == 0) ? prev_ch : ch;
                std::string p = "synthesis.b" + std::to_string(res) + ".conv" + std::to_string(c);
                params_.add(p + ".weight", Tensor({ch, in_ch, 3, 3}));
                params_.add(p + ".bias", Tensor({ch}));
                params_.add(p + ".noise_strength", Tensor({ch}));
                params_.add(p + ".style_scale.weight", Tensor({ch, n}));
                params_.add(p + ".style_scale.bias", Tensor({ch}));
                params_.add(p + ".shift.weight", Tensor({ch, n}));
                params_.add(p + ".shift.bias", Tensor({ch}));
            }
            prev_ch = ch;
        }
    }
    const int cr = config_.channels_at(config_.resolution);
    params_.add("synthesis.to_rgb.weight", Tensor({3, cr, 1, 1}));
    params_.add("synthesis.to_rgb.bias", Tensor({3}));
}

void Decoder::init(uint64_t seed) { seed_init(params_, seed); }

void Decoder::load(const Checkpoint& ckpt) {
    require_config_match(ckpt.config, config_);
    params_.load(ckpt.params);
}

Var Decoder::map_latent_var(const Var& z) const {
    if (z->value.ndim() != 2 || z->value.dim(1) != config_.latent_dim)
        throw ShapeError("map_latent: expected [N," + std::to_string(config_.latent_dim) +
                         "], got " + shape_str(z->value.shape));
    Var h = pixel_norm(z, kNormEps);
    for (int i = 0; i < config_.mapping_layers; ++i) {
        std::string p = "mapping." + std::to_string(i);
        h = linear(h, params_.get(p + ".weight"), params_.get(p + ".bias"));
        h = leaky_relu(h, kLeakySlope);
    }
    return h;
}

Var Decoder::broadcast_w_var(const Var& w) const {
    std::vector<Var> rows(static_cast<size_t>(layout_.style_slots), w);
    return stack_rows(rows);
}

static void check_noise_vars(const DecoderLayout& layout, const std::vector<Var>& noise, int batch) {
    if (static_cast<int>(noise.size()) != static_cast<int>(layout.noise_spec.size()))
        throw ShapeError("synthesize: got " + std::to_string(noise.size()) + " noise maps, need " +
                         std::to_string(layout.noise_spec.size()) + " (missing site " +
                         std::to_string(std::min(noise.size(), layout.noise_spec.size())) + ")");
    for (size_t i = 0; i < noise.size(); ++i) {
        const auto& site = layout.noise_spec[i];
        const auto& s = noise[i]->value.shape;
        if (s != std::vector<int>{batch, 1, site.height, site.width})
            throw ShapeError("synthesize: noise for site " + std::to_string(site.site_id) +
                             " must be [" + std::to_string(batch) + ",1," +
                             std::to_string(site.height) + "," + std::to_string(site.width) +
                             "], got " + shape_str(s));
    }
}

Var Decoder::synthesize_var(const Var& styles, const std::vector<Var>& noise) const {
    if (styles->value.ndim() != 3 || styles->value.dim(1) != layout_.style_slots ||
        styles->value.dim(2) != config_.latent_dim)
        throw ShapeError("synthesize: styles must be [N," + std::to_string(layout_.style_slots) +
                         "," + std::to_string(config_.latent_dim) + "], got " +
                         shape_str(styles->value.shape));
    check_noise_vars(layout_, noise, styles->value.dim(0));
    return config_.decoder_version == DecoderVersion::V2 ? synthesize_v2(styles, noise)
                                                         : synthesize_v1(styles, noise);
}

Var Decoder::synthesize_v2(const Var& styles, const std::vector<Var>& noise) const {
    const int N = styles->value.dim(0);
    Var x = expand_batch(params_.get("synthesis.const"), N);
    int slot = 0;
    for (size_t ri = 0; ri < layout_.resolutions.size(); ++ri) {
        if (layout_.resolutions[ri] > 4) x = upsample2x(x);
        for (int c = 0; c < 2; ++c) {
            std::string p = "synthesis.conv" + std::to_string(slot);
            Var w = params_.get(p + ".weight");
            Var s = linear(select_row(styles, slot), params_.get(p + ".affine.weight"),
                           params_.get(p + ".affine.bias"));
            // modulate on the input, demodulate per output channel:
            //   conv(x * s, w) * rsqrt(sum_{i,k} (w*s)^2)
            Var y = conv2d(mul_channel(x, s), w, nullptr, 1, 1);
            Var demod = rsqrt(linear(square(s), conv_wsumsq(w)), kDemodEps);
            y = mul_channel(y, demod);
            y = noise_inject(y, params_.get(p + ".noise_strength"), noise[static_cast<size_t>(slot)]);
            y = add_cvec(y, params_.get(p + ".bias"));
            x = leaky_relu(y, kLeakySlope);
            ++slot;
        }
    }
    return conv2d(x, params_.get("synthesis.to_rgb.weight"), params_.get("synthesis.to_rgb.bias"),
                  1, 0);
}

static Var instance_norm(const Var& x) {
    Var m = global_avg_pool(x);
    Var xc = add_channel(x, mul_scalar(m, -1));
    Var v = global_avg_pool(square(xc));
    return mul_channel(xc, rsqrt(v, kNormEps));
}

Var Decoder::synthesize_v1(const Var& styles, const std::vector<Var>& noise) const {
    const int N = styles->value.dim(0);
    Var x = expand_batch(params_.get("synthesis.const"), N);
    for (size_t ri = 0; ri < layout_.resolutions.size(); ++ri) {
        int res = layout_.resolutions[ri];
        if (res > 4) x = upsample2x(x);
        Var w_row = select_row(styles, static_cast<int>(ri));
        for (int c = 0; c < 2; ++c) {
            std::string p = "synthesis.b" + std::to_string(res) + ".conv" + std::to_string(c);
            Var y = conv2d(x, params_.get(p + ".weight"), nullptr, 1, 1);
            y = noise_inject(y, params_.get(p + ".noise_strength"), noise[ri]);
            y = add_cvec(y, params_.get(p + ".bias"));
            y = leaky_relu(y, kLeakySlope);
            // AdaIN: normalize, then style scale and shift
            Var scale = linear(w_row, params_.get(p + ".style_scale.weight"),
                               params_.get(p + ".style_scale.bias"));
            Var shift =
                linear(w_row, params_.get(p + ".shift.weight"), params_.get(p + ".shift.bias"));
            x = add_channel(mul_channel(instance_norm(y), scale), shift);
        }
    }
    return conv2d(x, params_.get("synthesis.to_rgb.weight"), params_.get("synthesis.to_rgb.bias"),
                  1, 0);
}

LatentCode Decoder::map_latent(const LatentCode& z) const {
    if (z.kind != LatentKind::Z) throw ShapeError("map_latent expects a Z code");
    if (z.data.ndim() != 1 || z.data.dim(0) != config_.latent_dim)
        throw ShapeError("map_latent: z must have length " + std::to_string(config_.latent_dim) +
                         ", got " + shape_str(z.data.shape));
    Tensor batched({1, config_.latent_dim});
    batched.data = z.data.data;
    Var w = map_latent_var(make_var(std::move(batched)));
    Tensor out({config_.latent_dim});
    out.data = w->value.data;
    return LatentCode::w(std::move(out));
}

LatentCode Decoder::broadcast_w(const LatentCode& w) const {
    if (w.kind == LatentKind::WPLUS) throw ShapeError("broadcast_w expects a single W vector");
    if (w.data.ndim() != 1 || w.data.dim(0) != config_.latent_dim)
        throw ShapeError("broadcast_w: w must have length " + std::to_string(config_.latent_dim));
    Tensor m({layout_.style_slots, config_.latent_dim});
    for (int s = 0; s < layout_.style_slots; ++s)
        std::copy(w.data.data.begin(), w.data.data.end(),
                  m.data.begin() + size_t(s) * config_.latent_dim);
    return LatentCode::wplus(std::move(m));
}

Image Decoder::synthesize(const LatentCode& styles, const NoiseMapSet& noise) const {
    LatentCode stack = styles;
    if (stack.kind == LatentKind::Z) stack = broadcast_w(map_latent(stack));
    if (stack.kind == LatentKind::W) stack = broadcast_w(stack);
    stack.check(layout_, config_.latent_dim);
    noise.check(layout_);

    Tensor s({1, layout_.style_slots, config_.latent_dim});
    s.data = stack.data.data;
    Var out = synthesize_var(make_var(std::move(s)), noise_to_vars(noise));
    Tensor img({3, config_.resolution, config_.resolution});
    img.data = out->value.data;
    return Image::from_tensor_clipped(std::move(img));
}

NoiseMapSet sample_noise(const DecoderLayout& layout, uint64_t seed) {
    NoiseMapSet set;
    for (const auto& site : layout.noise_spec) {
        Rng rng(seed, 0x6e6f697365ULL + static_cast<uint64_t>(site.site_id));
        Tensor m({site.height, site.width});
        rng.fill_normal(m);
        set.maps.push_back(std::move(m));
    }
    return set;
}

std::vector<Var> noise_to_vars(const NoiseMapSet& set) {
    std::vector<Var> out;
    for (const auto& m : set.maps) {
        Tensor t({1, 1, m.dim(0), m.dim(1)});
        t.data = m.data;
        out.push_back(make_var(std::move(t)));
    }
    return out;
}

std::vector<Var> zero_noise_vars(const DecoderLayout& layout, int batch) {
    std::vector<Var> out;
    for (const auto& site : layout.noise_spec)
        out.push_back(make_var(Tensor::zeros({batch, 1, site.height, site.width})));
    return out;
}

}  // namespace ae
