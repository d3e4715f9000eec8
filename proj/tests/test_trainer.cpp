#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "ae/trainer.hpp"

using namespace ae;

namespace {

ModelConfig tiny() {
    ModelConfig c;
    c.resolution = 8;
    c.latent_dim = 4;
    c.base_channels = 4;
    c.max_channels = 8;
    return c;
}

std::vector<Tensor> tiny_data(int n, int R, uint64_t seed) {
    std::vector<Tensor> out;
    for (int i = 0; i < n; ++i) {
        Tensor t({3, R, R});
        Rng(seed, uint64_t(i)).fill_normal(t, 0, 0.4);
        for (auto& v : t.data) v = real(std::clamp(double(v), -1.0, 1.0));
        out.push_back(std::move(t));
    }
    return out;
}

Tensor batch1(const Tensor& img) {
    Tensor t({1, img.dim(0), img.dim(1), img.dim(2)});
    t.data = img.data;
    return t;
}

}  // namespace

TEST_CASE("train config validation") {
    TrainConfig t;
    CHECK_NOTHROW(t.validate());
    t.iterations = 0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.lr_split_ratio = 0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.stage_boundary = t.iterations + 1;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.denoise = DenoiseConfig{{-5}, true};
    CHECK_THROWS_AS(t.validate(), ConfigError);

    CHECK(strategy_from_string("two-network") == Strategy::TwoNetwork);
    CHECK_THROWS_AS(strategy_from_string("bogus"), ConfigError);
}

TEST_CASE("stage boundary defaults to the midpoint") {
    TrainConfig t;
    t.iterations = 100;
    t.strategy = Strategy::LrSplit;
    CHECK(t.boundary() == 50);
    CHECK(t.stage_at(49) == 1);
    CHECK(t.stage_at(50) == 2);
    t.stage_boundary = 80;
    CHECK(t.boundary() == 80);
    t.strategy = Strategy::Plain;  // plain is single-stage regardless
    CHECK(t.stage_at(99) == 1);
}

TEST_CASE("cosine schedule oracles") {
    TrainConfig t;
    t.iterations = 1000;
    t.base_lr = 1e-4;
    CHECK(schedule_lr(0, t).backbone == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(schedule_lr(500, t).backbone == doctest::Approx(5e-5).epsilon(1e-9));
    CHECK(schedule_lr(999, t).backbone > 0);
    double prev = 1;
    for (int64_t i : {0, 100, 400, 700, 999}) {
        double lr = schedule_lr(i, t).backbone;
        CHECK(lr < prev);
        prev = lr;
    }
    // plain trains every group at the same rate
    GroupLr g = schedule_lr(100, t);
    CHECK(g.backbone == g.latent);
    CHECK(g.latent == g.noise);
}

TEST_CASE("stage rules gate the group rates") {
    TrainConfig t;
    t.iterations = 100;
    t.strategy = Strategy::LrSplit;
    GroupLr s1 = schedule_lr(10, t);
    CHECK(s1.noise == 0.0);
    CHECK(s1.backbone > 0);
    GroupLr s2 = schedule_lr(60, t);
    CHECK(s2.noise > 0);
    CHECK(s2.backbone == doctest::Approx(s2.noise * t.lr_split_ratio).epsilon(1e-9));
    CHECK(s2.latent == s2.backbone);

    t.strategy = Strategy::TwoNetwork;
    CHECK(schedule_lr(10, t).noise == 0.0);
    GroupLr n2 = schedule_lr(60, t);
    CHECK(n2.noise == n2.backbone);  // no rate split, the freeze is structural
}

TEST_CASE("denoise batch construction") {
    Tensor clean = Tensor::zeros({4, 3, 16, 16});
    CHECK(make_denoise_batch(clean, 0, 1).data == clean.data);
    CHECK_THROWS_AS(make_denoise_batch(clean, -1, 1), ConfigError);

    Tensor noisy = make_denoise_batch(clean, 25, 1);
    double sum = 0, sumsq = 0;
    for (real v : noisy.data) {
        CHECK(v >= real(-1));
        CHECK(v <= real(1));
        sum += double(v);
        sumsq += double(v) * double(v);
    }
    double n = double(noisy.data.size());
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::sqrt(sumsq / n) == doctest::Approx(2.0 * 25 / 255).epsilon(0.05));

    // seeded: reproducible, seed-sensitive
    CHECK(make_denoise_batch(clean, 25, 1).data == noisy.data);
    CHECK(make_denoise_batch(clean, 25, 2).data != noisy.data);
}

TEST_CASE("adam minimizes a quadratic and honours lr 0") {
    ParamStore p;
    p.add("x", Tensor::full({1}, 10));
    p.add("frozen", Tensor::full({1}, 10));
    Adam opt;
    for (int i = 0; i < 400; ++i) {
        Var x = p.get("x");
        x->ensure_grad();
        x->grad[0] = real(2 * (double(x->value[0]) - 3));  // d/dx (x-3)^2
        Var f = p.get("frozen");
        f->ensure_grad();
        f->grad[0] = real(1);
        opt.step(p, [](const std::string& name) { return name == "x" ? 0.05 : 0.0; });
        p.zero_grad();
    }
    CHECK(double(p.get("x")->value[0]) == doctest::Approx(3.0).epsilon(1e-2));
    CHECK(double(p.get("frozen")->value[0]) == 10.0);  // bit-untouched
}

TEST_CASE("epoch sampler is a per-epoch permutation") {
    EpochSampler s(5, 7);
    std::vector<int64_t> first;
    for (int64_t i = 0; i < 7; ++i) first.push_back(s.index_at(i));
    std::vector<int64_t> sorted = first;
    std::sort(sorted.begin(), sorted.end());
    for (int64_t i = 0; i < 7; ++i) CHECK(sorted[size_t(i)] == i);

    EpochSampler s2(5, 7);
    for (int64_t i = 0; i < 7; ++i) CHECK(s2.index_at(i) == first[size_t(i)]);

    std::vector<int64_t> second;
    for (int64_t i = 7; i < 14; ++i) second.push_back(s.index_at(i));
    CHECK(second != first);  // reshuffled across epochs
}

TEST_CASE("plain training run end to end") {
    ModelConfig model = tiny();
    Decoder decoder(model);
    decoder.init(1);
    std::string digest_before = decoder.digest();

    TrainConfig cfg;
    cfg.iterations = 6;
    cfg.batch_size = 2;
    cfg.log_every = 2;
    cfg.seed = 3;
    Trainer trainer(model, cfg, decoder);

    std::string dir = "/tmp/ae_test_run_plain";
    std::filesystem::remove_all(dir);
    std::ostringstream log;
    trainer.run(tiny_data(3, 8, 2), dir, &log);

    CHECK(decoder.digest() == digest_before);
    CHECK(trainer.iteration() == 6);
    CHECK(std::filesystem::exists(dir + "/encoder.ckpt"));
    std::string csv = log.str();
    CHECK(csv.rfind("iteration,lr_backbone,lr_latent,lr_noise,mse,lpips,total\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 4);

    Checkpoint ck = load_checkpoint(dir + "/encoder.ckpt");
    CHECK(ck.meta.iteration == 6);
    CHECK(ck.config == model);
    std::filesystem::remove_all(dir);
}

TEST_CASE("training is deterministic given the seed") {
    ModelConfig model = tiny();
    auto data = tiny_data(2, 8, 9);
    auto run_digest = [&](uint64_t seed) {
        Decoder decoder(model);
        decoder.init(4);
        TrainConfig cfg;
        cfg.iterations = 4;
        cfg.batch_size = 1;
        cfg.seed = seed;
        Trainer t(model, cfg, decoder);
        std::string dir = "/tmp/ae_test_run_det";
        std::filesystem::remove_all(dir);
        t.run(data, dir, nullptr);
        std::string d = t.latent_encoder().digest();
        std::filesystem::remove_all(dir);
        return d;
    };
    CHECK(run_digest(7) == run_digest(7));
    CHECK(run_digest(7) != run_digest(8));
}

TEST_CASE("two network strategy trains L then N") {
    ModelConfig model = tiny();
    Decoder decoder(model);
    decoder.init(5);
    TrainConfig cfg;
    cfg.iterations = 4;
    cfg.batch_size = 1;
    cfg.strategy = Strategy::TwoNetwork;
    cfg.stage_boundary = 2;
    Trainer trainer(model, cfg, decoder);
    REQUIRE(trainer.noise_encoder() != nullptr);

    auto data = tiny_data(2, 8, 11);
    std::string noise_digest_init = trainer.noise_encoder()->digest();

    // stage 1: only L moves
    StepResult r1 = trainer.train_step(batch1(data[0]), batch1(data[0]));
    CHECK(std::isfinite(r1.total));
    CHECK(trainer.noise_encoder()->digest() == noise_digest_init);
    std::string latent_after_s1 = trainer.latent_encoder().digest();
    CHECK(latent_after_s1 != noise_digest_init);

    trainer.train_step(batch1(data[1]), batch1(data[1]));
    std::string latent_frozen = trainer.latent_encoder().digest();

    // stage 2: only N moves, L is frozen bit-exactly
    trainer.train_step(batch1(data[0]), batch1(data[0]));
    trainer.train_step(batch1(data[1]), batch1(data[1]));
    CHECK(trainer.latent_encoder().digest() == latent_frozen);
    CHECK(trainer.noise_encoder()->digest() != noise_digest_init);
}

TEST_CASE("lr split single encoder with gated noise heads") {
    ModelConfig model = tiny();
    Decoder decoder(model);
    decoder.init(6);
    TrainConfig cfg;
    cfg.iterations = 4;
    cfg.batch_size = 1;
    cfg.strategy = Strategy::LrSplit;
    cfg.stage_boundary = 2;
    Trainer trainer(model, cfg, decoder);
    CHECK(trainer.noise_encoder() == nullptr);

    auto data = tiny_data(1, 8, 13);
    // stage 1: noise heads must not move
    ParamStore& params = trainer.latent_encoder().params();
    std::map<std::string, Tensor> noise_before;
    for (const auto& name : params.names())
        if (Encoder::param_group(name) == "noise_head")
            noise_before[name] = params.get(name)->value;
    REQUIRE_FALSE(noise_before.empty());
    trainer.train_step(batch1(data[0]), batch1(data[0]));
    trainer.train_step(batch1(data[0]), batch1(data[0]));
    for (const auto& [name, before] : noise_before)
        CHECK(params.get(name)->value.data == before.data);

    // stage 2: noise heads move
    trainer.train_step(batch1(data[0]), batch1(data[0]));
    bool moved = false;
    for (const auto& [name, before] : noise_before)
        if (params.get(name)->value.data != before.data) moved = true;
    CHECK(moved);
}

TEST_CASE("denoising run feeds noisy inputs against clean targets") {
    ModelConfig model = tiny();
    Decoder decoder(model);
    decoder.init(7);
    TrainConfig cfg;
    cfg.iterations = 3;
    cfg.batch_size = 2;
    cfg.denoise = DenoiseConfig{{15, 25, 50}, true};
    Trainer trainer(model, cfg, decoder);
    std::string dir = "/tmp/ae_test_run_denoise";
    std::filesystem::remove_all(dir);
    CHECK_NOTHROW(trainer.run(tiny_data(2, 8, 15), dir, nullptr));
    std::filesystem::remove_all(dir);
}

TEST_CASE("config mismatch between trainer and decoder is rejected") {
    ModelConfig model = tiny();
    ModelConfig other = model;
    other.latent_dim = 8;
    Decoder decoder(other);
    decoder.init(8);
    TrainConfig cfg;
    CHECK_THROWS_AS(Trainer(model, cfg, decoder), ConfigError);
}
