#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ae/latent.hpp"
#include "ae/losses.hpp"
#include "ae/rng.hpp"

using namespace ae;

namespace {

Var random_batch(std::vector<int> shape, uint64_t seed) {
    Tensor t(std::move(shape));
    Rng(seed, 0).fill_normal(t, 0, 0.5);
    return make_var(std::move(t));
}

}  // namespace

TEST_CASE("mse oracle values") {
    Var x = random_batch({2, 3, 8, 8}, 1);
    CHECK(double(mse_loss(x, x)->value[0]) == 0.0);

    // constant offset of 0.5 -> mean squared error exactly 0.25
    Var y = add_scalar(x, real(0.5));
    CHECK(double(mse_loss(x, y)->value[0]) == doctest::Approx(0.25).epsilon(1e-6));

    Var bad = random_batch({2, 3, 4, 4}, 2);
    CHECK_THROWS_AS(mse_loss(x, bad), ShapeError);
}

TEST_CASE("proxy extractor structure") {
    FeatureExtractor f = make_proxy_extractor(3);
    REQUIRE(f.stages().size() == 3);
    Var x = random_batch({2, 3, 16, 16}, 4);
    std::vector<Var> feats = f.features(x);
    REQUIRE(feats.size() == 3);
    CHECK(feats[0]->value.shape == std::vector<int>{2, 8, 16, 16});
    CHECK(feats[1]->value.shape == std::vector<int>{2, 16, 8, 8});
    CHECK(feats[2]->value.shape == std::vector<int>{2, 32, 4, 4});

    // seeded: same seed same weights, different seed different weights
    FeatureExtractor g = make_proxy_extractor(3);
    FeatureExtractor h = make_proxy_extractor(5);
    CHECK(f.stages()[0].weight->value.data == g.stages()[0].weight->value.data);
    CHECK(f.stages()[0].weight->value.data != h.stages()[0].weight->value.data);
}

TEST_CASE("perceptual loss properties") {
    FeatureExtractor f = make_proxy_extractor(0);
    Var x = random_batch({1, 3, 8, 8}, 6);
    Var y = random_batch({1, 3, 8, 8}, 7);

    CHECK(double(perceptual_loss(x, x, f)->value[0]) == doctest::Approx(0).epsilon(1e-10));
    double d = double(perceptual_loss(x, y, f)->value[0]);
    CHECK(d > 0);
    CHECK(std::isfinite(d));
    // symmetric by construction
    CHECK(double(perceptual_loss(y, x, f)->value[0]) == doctest::Approx(d).epsilon(1e-5));

    // an extractor with no stages yields a zero loss, not a crash
    FeatureExtractor empty;
    CHECK(double(perceptual_loss(x, y, empty)->value[0]) == 0.0);
}

TEST_CASE("channel normalization makes the loss scale invariant per stage") {
    // scaling both inputs by the same constant leaves unit-normalized features
    // almost unchanged through the (linear conv, leaky relu) stages
    FeatureExtractor f;
    Tensor w({4, 3, 3, 3});
    Rng(8, 0).fill_normal(w, 0, 0.3);
    f.add_stage(w, Tensor({4}), Tensor::full({4}, 1), 1);

    Var x = random_batch({1, 3, 8, 8}, 9);
    Var y = random_batch({1, 3, 8, 8}, 10);
    double base = double(perceptual_loss(x, y, f)->value[0]);
    double scaled = double(
        perceptual_loss(mul_scalar(x, real(3)), mul_scalar(y, real(3)), f)->value[0]);
    CHECK(scaled == doctest::Approx(base).epsilon(1e-3));
}

TEST_CASE("negative channel weights are rejected") {
    FeatureExtractor f;
    Tensor w({2, 3, 3, 3});
    Tensor cw = Tensor::full({2}, 1);
    cw[1] = -1;
    CHECK_THROWS(f.add_stage(w, Tensor({2}), cw, 1));
}

TEST_CASE("total loss is the unit-weight sum") {
    FeatureExtractor f = make_proxy_extractor(0);
    Var x = random_batch({1, 3, 8, 8}, 11);
    Var y = random_batch({1, 3, 8, 8}, 12);
    double total = double(total_loss(x, y, f)->value[0]);
    double parts = double(mse_loss(x, y)->value[0]) + double(perceptual_loss(x, y, f)->value[0]);
    CHECK(total == doctest::Approx(parts).epsilon(1e-6));
    CHECK(double(total_loss(x, x, f)->value[0]) == doctest::Approx(0).epsilon(1e-10));
}

TEST_CASE("losses are differentiable") {
    FeatureExtractor f = make_proxy_extractor(0);
    Tensor tx({1, 3, 8, 8});
    Rng(13, 0).fill_normal(tx, 0, 0.5);
    Var x = make_var(tx, true);
    Var y = random_batch({1, 3, 8, 8}, 14);
    backward(total_loss(x, y, f));
    REQUIRE(x->grad.numel() == x->value.numel());
    double sum = 0;
    for (real g : x->grad.data) sum += std::abs(double(g));
    CHECK(sum > 0);
}
