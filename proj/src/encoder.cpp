#include "ae/encoder.hpp"

namespace ae {

namespace {
constexpr real kLeakySlope = real(0.2);
}

int num_blocks(int insize, int outsize) {
    if (!is_pow2(insize) || !is_pow2(outsize))
        throw ConfigError("num_blocks: sizes must be powers of two, got " +
                          std::to_string(insize) + " and " + std::to_string(outsize));
    if (insize < outsize)
        throw ConfigError("num_blocks: insize " + std::to_string(insize) + " < outsize " +
                          std::to_string(outsize));
    return 2 + 2 * (ilog2(insize) - ilog2(outsize));
}

Encoder::Encoder(ModelConfig config, EncoderHeads heads)
    : config_(std::move(config)), heads_(heads) {
    config_.validate();
    if (!heads_.latent && !heads_.noise)
        throw ConfigError("encoder needs at least one head kind");
    layout_ = derive_layout(config_);
    build_params();
}

void Encoder::build_params() {
    const int R = config_.resolution;
    const int out_size = config_.encoder_out_size;
    const bool v2 = config_.decoder_version == DecoderVersion::V2;
    const bool wplus = config_.projection_target == ProjectionTarget::WPLUS;
    const int n = config_.latent_dim;

    params_.add("stem.weight", Tensor({config_.channels_at(R), 3, 3, 3}));
    params_.add("stem.bias", Tensor({config_.channels_at(R)}));

    // two start blocks at input resolution, then a stride-2 + stride-1 pair
    // per downsampling step
    int index = 0;
    auto push_block = [&](int in_ch, int out_ch, int stride, int res, bool first_of_res) {
        BlockSpec blk;
        blk.index = index++;
        blk.in_ch = in_ch;
        blk.out_ch = out_ch;
        blk.stride = stride;
        blk.res = res;
        blk.split = v2 || first_of_res;
        int ri = ilog2(res) - 2;
        int j = first_of_res ? 0 : 1;
        blk.slot = v2 ? 2 * ri + j : ri;
        blk.site = blk.slot;
        blocks_.push_back(blk);

        std::string p = "block" + std::to_string(blk.index);
        params_.add(p + ".conv1.weight", Tensor({out_ch, in_ch, 3, 3}));
        params_.add(p + ".conv1.bias", Tensor({out_ch}));
        params_.add(p + ".conv2.weight", Tensor({out_ch, out_ch, 3, 3}));
        params_.add(p + ".conv2.bias", Tensor({out_ch}));
        if (stride != 1 || in_ch != out_ch)
            params_.add(p + ".skip.weight", Tensor({out_ch, in_ch, 1, 1}));

        if (blk.split) {
            if (heads_.latent && wplus) {
                params_.add("latent_head" + std::to_string(blk.slot) + ".weight",
                            Tensor({n, out_ch}));
                params_.add("latent_head" + std::to_string(blk.slot) + ".bias", Tensor({n}));
            }
            if (heads_.noise) {
                params_.add("noise_head" + std::to_string(blk.site) + ".weight",
                            Tensor({1, out_ch, 1, 1}));
                params_.add("noise_head" + std::to_string(blk.site) + ".bias", Tensor({1}));
            }
        }
    };

    push_block(config_.channels_at(R), config_.channels_at(R), 1, R, true);
    push_block(config_.channels_at(R), config_.channels_at(R), 1, R, false);
    for (int r = R / 2; r >= out_size; r /= 2) {
        push_block(config_.channels_at(r * 2), config_.channels_at(r), 2, r, true);
        push_block(config_.channels_at(r), config_.channels_at(r), 1, r, false);
    }
    assert(static_cast<int>(blocks_.size()) == num_blocks(R, out_size));

    if (heads_.latent && !wplus) {
        params_.add("latent_head.weight", Tensor({n, config_.channels_at(out_size)}));
        params_.add("latent_head.bias", Tensor({n}));
    }

    // every decoder slot/site must be produced by exactly one head
    if (heads_.latent && wplus) {
        for (int s = 0; s < layout_.style_slots; ++s)
            if (!params_.has("latent_head" + std::to_string(s) + ".weight"))
                throw ConfigError("no encoder head for decoder style slot " + std::to_string(s));
    }
    if (heads_.noise) {
        for (const auto& site : layout_.noise_spec)
            if (!params_.has("noise_head" + std::to_string(site.site_id) + ".weight"))
                throw ConfigError("no encoder head for decoder noise site " +
                                  std::to_string(site.site_id));
    }
}

void Encoder::init(uint64_t seed) { seed_init(params_, seed); }

void Encoder::load(const Checkpoint& ckpt) {
    require_config_match(ckpt.config, config_);
    params_.load(ckpt.params);
}

Var Encoder::residual_block(const Var& x, const BlockSpec& blk) const {
    std::string p = "block" + std::to_string(blk.index);
    Var h = leaky_relu(x, kLeakySlope);
    h = conv2d(h, params_.get(p + ".conv1.weight"), params_.get(p + ".conv1.bias"), blk.stride, 1);
    h = leaky_relu(h, kLeakySlope);
    h = conv2d(h, params_.get(p + ".conv2.weight"), params_.get(p + ".conv2.bias"), 1, 1);
    Var skip = x;
    if (params_.has(p + ".skip.weight"))
        skip = conv2d(x, params_.get(p + ".skip.weight"), nullptr, blk.stride, 0);
    return add(skip, h);
}

EncoderOutputVar Encoder::encode_var(const Var& image, bool with_noise) const {
    const int R = config_.resolution;
    if (image->value.ndim() != 4 || image->value.dim(1) != 3 || image->value.dim(2) != R ||
        image->value.dim(3) != R)
        throw ShapeError("encode: expected [N,3," + std::to_string(R) + "," + std::to_string(R) +
                         "] image, got " + shape_str(image->value.shape));
    const bool wplus = config_.projection_target == ProjectionTarget::WPLUS;

    Var h = conv2d(image, params_.get("stem.weight"), params_.get("stem.bias"), 1, 1);

    std::vector<Var> rows(static_cast<size_t>(layout_.style_slots));
    std::vector<Var> noise(layout_.noise_spec.size());
    for (const auto& blk : blocks_) {
        h = residual_block(h, blk);
        if (!blk.split) continue;
        if (heads_.latent && wplus) {
            std::string p = "latent_head" + std::to_string(blk.slot);
            rows[static_cast<size_t>(blk.slot)] =
                linear(global_avg_pool(h), params_.get(p + ".weight"), params_.get(p + ".bias"));
        }
        if (heads_.noise && with_noise) {
            std::string p = "noise_head" + std::to_string(blk.site);
            noise[static_cast<size_t>(blk.site)] =
                conv2d(h, params_.get(p + ".weight"), params_.get(p + ".bias"), 1, 0);
        }
    }

    EncoderOutputVar out;
    if (heads_.latent)
        out.latent = wplus ? stack_rows(rows)
                           : linear(global_avg_pool(h), params_.get("latent_head.weight"),
                                    params_.get("latent_head.bias"));
    if (heads_.noise && with_noise) out.noise = std::move(noise);
    return out;
}

EncoderOutput Encoder::encode(const Image& image, bool with_noise) const {
    image.check_range();
    if (image.height() != config_.resolution || image.width() != config_.resolution)
        throw ShapeError("encode: image is " + std::to_string(image.height()) + "x" +
                         std::to_string(image.width()) + ", model expects " +
                         std::to_string(config_.resolution));
    Tensor batched({1, 3, config_.resolution, config_.resolution});
    batched.data = image.data.data;
    EncoderOutputVar v = encode_var(make_var(std::move(batched)), with_noise);

    EncoderOutput out;
    if (config_.projection_target == ProjectionTarget::WPLUS) {
        Tensor m({layout_.style_slots, config_.latent_dim});
        m.data = v.latent->value.data;
        out.latent = LatentCode::wplus(std::move(m));
    } else {
        Tensor z({config_.latent_dim});
        z.data = v.latent->value.data;
        out.latent = LatentCode::z(std::move(z));
    }
    if (!v.noise.empty()) {
        NoiseMapSet set;
        for (size_t i = 0; i < v.noise.size(); ++i) {
            const auto& site = layout_.noise_spec[i];
            Tensor m({site.height, site.width});
            m.data = v.noise[i]->value.data;
            set.maps.push_back(std::move(m));
        }
        out.noise = std::move(set);
    }
    return out;
}

std::string Encoder::param_group(const std::string& name) {
    if (name.rfind("latent_head", 0) == 0) return "latent_head";
    if (name.rfind("noise_head", 0) == 0) return "noise_head";
    return "backbone";
}

EncoderOutputVar encode_two_network(const Var& image, const Encoder& latent_net,
                                    const Encoder& noise_net, bool with_noise) {
    if (!latent_net.heads().latent || latent_net.heads().noise)
        throw ConfigError("two-network L must have latent heads only");
    if (!noise_net.heads().noise || noise_net.heads().latent)
        throw ConfigError("two-network N must have noise heads only");
    if (latent_net.config().resolution != noise_net.config().resolution)
        throw ConfigError("two-network L and N disagree on resolution");

    EncoderOutputVar out = latent_net.encode_var(image, false);
    if (with_noise) out.noise = noise_net.encode_var(image, true).noise;
    return out;
}

}  // namespace ae
