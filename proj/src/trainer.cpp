#include "ae/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ae {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Plain: return "plain";
        case Strategy::TwoNetwork: return "two-network";
        case Strategy::LrSplit: return "lr-split";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "plain") return Strategy::Plain;
    if (s == "two-network" || s == "two_network") return Strategy::TwoNetwork;
    if (s == "lr-split" || s == "lr_split") return Strategy::LrSplit;
    throw ConfigError("unknown strategy '" + s + "' (plain|two-network|lr-split)");
}

void TrainConfig::validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (base_lr <= 0) throw ConfigError("base_lr must be positive");
    if (!(lr_split_ratio > 0 && lr_split_ratio <= 1))
        throw ConfigError("lr_split_ratio must lie in (0, 1]");
    if (stage_boundary >= 0 && stage_boundary > iterations)
        throw ConfigError("stage_boundary must not exceed iterations");
    if (denoise) {
        if (denoise->sigma_set.empty()) throw ConfigError("denoise sigma_set is empty");
        for (double s : denoise->sigma_set)
            if (s < 0) throw ConfigError("negative sigma in sigma_set");
    }
}

int64_t TrainConfig::boundary() const {
    if (strategy == Strategy::Plain) return iterations;
    return stage_boundary >= 0 ? stage_boundary : iterations / 2;
}

int TrainConfig::stage_at(int64_t t) const {
    if (strategy == Strategy::Plain) return 1;
    return t < boundary() ? 1 : 2;
}

GroupLr schedule_lr(int64_t t, const TrainConfig& cfg) {
    double base = cfg.base_lr * (1.0 + std::cos(M_PI * double(t) / double(cfg.iterations))) / 2.0;
    GroupLr lr;
    lr.backbone = lr.latent = lr.noise = base;
    if (cfg.stage_at(t) == 1) {
        if (cfg.strategy != Strategy::Plain) lr.noise = 0;
    } else if (cfg.strategy == Strategy::LrSplit) {
        lr.backbone *= cfg.lr_split_ratio;
        lr.latent *= cfg.lr_split_ratio;
    }
    return lr;
}

Tensor make_denoise_batch(const Tensor& clean, double sigma, uint64_t seed) {
    if (sigma < 0) throw ConfigError("make_denoise_batch: sigma must be >= 0");
    Tensor noisy = clean;
    if (sigma == 0) return noisy;
    const double std_img = 2.0 * sigma / 255.0;  // 0..255 sigma in [-1,1] units
    Rng rng(seed, 0x64656e6f697365ULL);
    for (auto& v : noisy.data) {
        double d = double(v) + std_img * rng.normal();
        v = real(std::min(1.0, std::max(-1.0, d)));
    }
    return noisy;
}

void Adam::step(ParamStore& params, const std::function<double(const std::string&)>& lr_of) {
    for (const auto& name : params.names()) {
        double lr = lr_of(name);
        if (lr == 0) continue;
        Var p = params.get(name);
        auto& mom = state_[name];
        if (mom.m.shape != p->value.shape) {
            mom.m = Tensor::zeros(p->value.shape);
            mom.v = Tensor::zeros(p->value.shape);
        }
        ++mom.t;
        const double bc1 = 1.0 - std::pow(beta1, double(mom.t));
        const double bc2 = 1.0 - std::pow(beta2, double(mom.t));
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            double g = p->grad.numel() == p->value.numel() ? double(p->grad[size_t(i)]) : 0.0;
            double m = beta1 * double(mom.m[size_t(i)]) + (1 - beta1) * g;
            double v = beta2 * double(mom.v[size_t(i)]) + (1 - beta2) * g * g;
            mom.m[size_t(i)] = real(m);
            mom.v[size_t(i)] = real(v);
            p->value[size_t(i)] -= real(lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
        }
    }
}

EpochSampler::EpochSampler(uint64_t seed, int64_t n) : seed_(seed), n_(n) {}

int64_t EpochSampler::index_at(int64_t position) {
    int64_t epoch = position / n_;
    if (epoch != cached_epoch_) {
        perm_.resize(size_t(n_));
        for (int64_t i = 0; i < n_; ++i) perm_[size_t(i)] = i;
        Rng rng(seed_, 0x6f72646572ULL + uint64_t(epoch));
        for (int64_t i = n_ - 1; i > 0; --i)
            std::swap(perm_[size_t(i)], perm_[size_t(rng.uniform_int(int(i + 1)))]);
        cached_epoch_ = epoch;
    }
    return perm_[size_t(position % n_)];
}

Trainer::Trainer(ModelConfig model, TrainConfig cfg, Decoder& decoder)
    : model_(std::move(model)), cfg_(cfg), decoder_(decoder) {
    model_.validate();
    cfg_.validate();
    if (first_config_mismatch(model_, decoder_.config()) != "")
        throw ConfigError("trainer model config does not match decoder config");

    if (cfg_.strategy == Strategy::TwoNetwork) {
        latent_enc_ = std::make_unique<Encoder>(model_, EncoderHeads{true, false});
        noise_enc_ = std::make_unique<Encoder>(model_, EncoderHeads{false, true});
        noise_enc_->init(cfg_.seed + 1);
    } else {
        latent_enc_ = std::make_unique<Encoder>(model_, EncoderHeads{true, true});
    }
    latent_enc_->init(cfg_.seed);
    extractor_ = make_proxy_extractor(0x4c50495053ULL);
    decoder_digest_ = decoder_.digest();
}

Var Trainer::reconstruct_var(const Var& image, bool with_noise) const {
    EncoderOutputVar enc =
        noise_enc_ ? encode_two_network(image, *latent_enc_, *noise_enc_, with_noise)
                   : latent_enc_->encode_var(image, with_noise);
    Var styles = enc.latent;
    if (model_.projection_target == ProjectionTarget::Z)
        styles = decoder_.broadcast_w_var(decoder_.map_latent_var(enc.latent));
    std::vector<Var> noise = enc.noise;
    if (noise.empty()) noise = zero_noise_vars(decoder_.layout(), image->value.dim(0));
    return decoder_.synthesize_var(styles, noise);
}

StepResult Trainer::train_step(const Tensor& input, const Tensor& target) {
    const int stage = cfg_.stage_at(iter_);
    const bool with_noise = cfg_.strategy == Strategy::Plain || stage == 2;

    Var x = make_var(input);
    Var y = make_var(target);
    Var out = reconstruct_var(x, with_noise);
    Var mse = mse_loss(out, y);
    Var lpips = perceptual_loss(out, y, extractor_);
    Var loss = add(mse, lpips);

    StepResult res;
    res.mse = double(mse->value[0]);
    res.lpips = double(lpips->value[0]);
    res.total = double(loss->value[0]);
    res.lr = schedule_lr(iter_, cfg_);
    if (!std::isfinite(res.total)) {
        std::ostringstream os;
        os << "non-finite loss at iteration " << iter_ << " (mse=" << res.mse
           << ", lpips=" << res.lpips << ", lr=" << res.lr.backbone << ")";
        throw std::runtime_error(os.str());
    }

    backward(loss);
    if (cfg_.strategy == Strategy::TwoNetwork) {
        // stage 1 trains L alone; stage 2 freezes L and trains N
        if (stage == 1) {
            adam_latent_.step(latent_enc_->params(),
                              [&](const std::string&) { return res.lr.backbone; });
        } else {
            adam_noise_.step(noise_enc_->params(),
                             [&](const std::string&) { return res.lr.noise; });
        }
    } else {
        adam_latent_.step(latent_enc_->params(), [&](const std::string& name) {
            std::string group = Encoder::param_group(name);
            if (group == "noise_head") return res.lr.noise;
            if (group == "latent_head") return res.lr.latent;
            return res.lr.backbone;
        });
    }
    latent_enc_->params().zero_grad();
    if (noise_enc_) noise_enc_->params().zero_grad();
    ++iter_;
    return res;
}

void Trainer::save_encoders(const std::string& out_dir, const std::string& suffix) const {
    const int stage = cfg_.stage_at(std::max<int64_t>(0, iter_ - 1));
    CheckpointMeta meta{iter_, "stage" + std::to_string(stage), cfg_.seed};
    if (noise_enc_) {
        save_checkpoint(out_dir + "/encoder_latent" + suffix + ".ckpt",
                        {model_, latent_enc_->params().snapshot(), meta});
        save_checkpoint(out_dir + "/encoder_noise" + suffix + ".ckpt",
                        {model_, noise_enc_->params().snapshot(), meta});
    } else {
        save_checkpoint(out_dir + "/encoder" + suffix + ".ckpt",
                        {model_, latent_enc_->params().snapshot(), meta});
    }
}

void Trainer::run(const std::vector<Tensor>& data, const std::string& out_dir,
                  std::ostream* csv_log) {
    if (data.empty()) throw ConfigError("training dataset is empty");
    std::filesystem::create_directories(out_dir);
    if (csv_log)
        *csv_log << "iteration,lr_backbone,lr_latent,lr_noise,mse,lpips,total\n";

    const int R = model_.resolution;
    EpochSampler sampler(cfg_.seed, static_cast<int64_t>(data.size()));
    for (int64_t t = iter_; t < cfg_.iterations; ++t) {
        const int B = cfg_.batch_size;
        Tensor target({B, 3, R, R});
        for (int b = 0; b < B; ++b) {
            int64_t pos = t * B + b;
            const Tensor& img = data[size_t(sampler.index_at(pos))];
            std::copy(img.data.begin(), img.data.end(),
                      target.data.begin() + size_t(b) * img.data.size());
        }
        Tensor input = target;
        if (cfg_.denoise) {
            for (int b = 0; b < B; ++b) {
                int64_t pos = t * B + b;
                double sigma = cfg_.denoise->sigma_set[0];
                if (cfg_.denoise->blind && cfg_.denoise->sigma_set.size() > 1) {
                    Rng pick(cfg_.seed, 0x7369676d61ULL + uint64_t(pos));
                    sigma = cfg_.denoise->sigma_set[size_t(
                        pick.uniform_int(int(cfg_.denoise->sigma_set.size())))];
                }
                Tensor one({1, 3, R, R});
                std::copy(target.data.begin() + size_t(b) * one.data.size(),
                          target.data.begin() + size_t(b + 1) * one.data.size(),
                          one.data.begin());
                Tensor noisy = make_denoise_batch(one, sigma, cfg_.seed ^ Rng::mix(uint64_t(pos)));
                std::copy(noisy.data.begin(), noisy.data.end(),
                          input.data.begin() + size_t(b) * noisy.data.size());
            }
        }

        StepResult res = train_step(input, target);
        if (csv_log && (t % cfg_.log_every == 0 || t + 1 == cfg_.iterations))
            *csv_log << t << "," << res.lr.backbone << "," << res.lr.latent << ","
                     << res.lr.noise << "," << res.mse << "," << res.lpips << "," << res.total
                     << "\n";
        if (cfg_.checkpoint_every > 0 && (t + 1) % cfg_.checkpoint_every == 0 &&
            t + 1 < cfg_.iterations)
            save_encoders(out_dir, "_iter" + std::to_string(t + 1));
    }

    if (decoder_.digest() != decoder_digest_)
        throw std::logic_error("frozen decoder parameters changed during training");
    save_encoders(out_dir, "");
}

}  // namespace ae
