#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "ae/autograd.hpp"
#include "ae/rng.hpp"

// These finite-difference checks assume real == double (the aecore64 build);
// float rounding would swamp the tolerances.
static_assert(sizeof(ae::real) == 8, "gradient checks must run at double precision");

using namespace ae;

namespace {

using GraphFn = std::function<Var(const std::vector<Var>&)>;

double eval_scalar(const GraphFn& f, const std::vector<Tensor>& inputs, const Tensor& weight,
                   std::vector<Var>* out_vars = nullptr) {
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(make_var(t, true));
    Var out = f(vars);
    REQUIRE(out->value.same_shape(weight));
    Var s = mean_all(mul(out, make_var(weight)));
    if (out_vars) {
        backward(s);
        *out_vars = vars;
    }
    return double(s->value[0]);
}

// central-difference check of every input element against the tape gradient
void gradcheck(const GraphFn& f, std::vector<Tensor> inputs, uint64_t seed = 1) {
    std::vector<Var> probe;
    for (const auto& t : inputs) probe.push_back(make_var(t));
    Tensor weight = Tensor::zeros(f(probe)->value.shape);
    Rng rng(seed, 0xfd);
    rng.fill_normal(weight, 0, 1);

    std::vector<Var> vars;
    eval_scalar(f, inputs, weight, &vars);

    const double h = 1e-5;
    double worst = 0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        for (int64_t i = 0; i < inputs[k].numel(); ++i) {
            real saved = inputs[k][size_t(i)];
            inputs[k][size_t(i)] = saved + real(h);
            double up = eval_scalar(f, inputs, weight);
            inputs[k][size_t(i)] = saved - real(h);
            double dn = eval_scalar(f, inputs, weight);
            inputs[k][size_t(i)] = saved;
            double numeric = (up - dn) / (2 * h);
            double analytic = vars[k]->grad.numel() ? double(vars[k]->grad[size_t(i)]) : 0.0;
            double err = std::abs(numeric - analytic) /
                         std::max({1e-3, std::abs(numeric), std::abs(analytic)});
            worst = std::max(worst, err);
        }
    }
    CHECK(worst < 1e-5);
}

Tensor randn(std::vector<int> shape, uint64_t seed, double std = 1) {
    Tensor t(std::move(shape));
    Rng rng(seed, 0xab);
    rng.fill_normal(t, 0, std);
    return t;
}

}  // namespace

TEST_CASE("elementwise ops") {
    Tensor a = randn({2, 3}, 1), b = randn({2, 3}, 2);
    gradcheck([](const std::vector<Var>& v) { return add(v[0], v[1]); }, {a, b});
    gradcheck([](const std::vector<Var>& v) { return sub(v[0], v[1]); }, {a, b});
    gradcheck([](const std::vector<Var>& v) { return mul(v[0], v[1]); }, {a, b});
    gradcheck([](const std::vector<Var>& v) { return add_scalar(v[0], real(1.5)); }, {a});
    gradcheck([](const std::vector<Var>& v) { return mul_scalar(v[0], real(-2)); }, {a});
    gradcheck([](const std::vector<Var>& v) { return square(v[0]); }, {a});
}

TEST_CASE("rsqrt and leaky_relu") {
    Tensor pos = randn({2, 4}, 3);
    for (auto& v : pos.data) v = v * v + real(0.5);
    gradcheck([](const std::vector<Var>& v) { return rsqrt(v[0], real(1e-8)); }, {pos});

    Tensor a = randn({3, 5}, 4);
    for (auto& v : a.data)
        if (std::abs(v) < real(1e-3)) v = real(0.1);  // keep away from the kink
    gradcheck([](const std::vector<Var>& v) { return leaky_relu(v[0], real(0.2)); }, {a});
}

TEST_CASE("linear") {
    Tensor x = randn({3, 4}, 5), w = randn({2, 4}, 6), b = randn({2}, 7);
    gradcheck([](const std::vector<Var>& v) { return linear(v[0], v[1], v[2]); }, {x, w, b});
    gradcheck([](const std::vector<Var>& v) { return linear(v[0], v[1]); }, {x, w});
}

TEST_CASE("conv2d") {
    Tensor x = randn({2, 3, 5, 5}, 8), w = randn({4, 3, 3, 3}, 9), b = randn({4}, 10);
    gradcheck([](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], 1, 1); }, {x, w, b});
    gradcheck([](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], 2, 1); }, {x, w, b});
    Tensor w1 = randn({2, 3, 1, 1}, 11);
    gradcheck([](const std::vector<Var>& v) { return conv2d(v[0], v[1], nullptr, 1, 0); }, {x, w1});
}

TEST_CASE("shape and broadcast ops") {
    Tensor x = randn({2, 3, 4, 4}, 12);
    gradcheck([](const std::vector<Var>& v) { return upsample2x(v[0]); }, {x});
    gradcheck([](const std::vector<Var>& v) { return global_avg_pool(v[0]); }, {x});
    gradcheck([](const std::vector<Var>& v) { return sum_channels(v[0]); }, {x});
    gradcheck([](const std::vector<Var>& v) { return mean_all(v[0]); }, {x});

    Tensor s = randn({2, 3}, 13);
    gradcheck([](const std::vector<Var>& v) { return mul_channel(v[0], v[1]); }, {x, s});
    gradcheck([](const std::vector<Var>& v) { return add_channel(v[0], v[1]); }, {x, s});
    Tensor cv = randn({3}, 14);
    gradcheck([](const std::vector<Var>& v) { return mul_cvec(v[0], v[1]); }, {x, cv});
    gradcheck([](const std::vector<Var>& v) { return add_cvec(v[0], v[1]); }, {x, cv});
    Tensor m = randn({2, 1, 4, 4}, 15);
    gradcheck([](const std::vector<Var>& v) { return mul_spatial(v[0], v[1]); }, {x, m});
    Tensor c = randn({3, 4, 4}, 16);
    gradcheck([](const std::vector<Var>& v) { return expand_batch(v[0], 2); }, {c});
}

TEST_CASE("rows, pixel_norm, noise_inject, conv_wsumsq") {
    Tensor r0 = randn({2, 4}, 17), r1 = randn({2, 4}, 18), r2 = randn({2, 4}, 19);
    gradcheck([](const std::vector<Var>& v) { return stack_rows({v[0], v[1], v[2]}); },
              {r0, r1, r2});
    Tensor stacked = randn({2, 3, 4}, 20);
    gradcheck([](const std::vector<Var>& v) { return select_row(v[0], 1); }, {stacked});
    gradcheck([](const std::vector<Var>& v) { return pixel_norm(v[0], real(1e-8)); }, {r0});

    Tensor x = randn({2, 3, 4, 4}, 21);
    Tensor strength = randn({3}, 22);
    Tensor noise = randn({2, 1, 4, 4}, 23);
    gradcheck([](const std::vector<Var>& v) { return noise_inject(v[0], v[1], v[2]); },
              {x, strength, noise});
    Tensor w = randn({4, 3, 3, 3}, 24);
    gradcheck([](const std::vector<Var>& v) { return conv_wsumsq(v[0]); }, {w});
}

TEST_CASE("composite graph matches finite differences") {
    // a miniature modulated-conv + normalize + pool pipeline
    Tensor x = randn({2, 3, 4, 4}, 25), w = randn({4, 3, 3, 3}, 26), s = randn({2, 3}, 27);
    gradcheck(
        [](const std::vector<Var>& v) {
            Var y = conv2d(mul_channel(v[0], v[2]), v[1], nullptr, 1, 1);
            Var demod = rsqrt(linear(square(v[2]), conv_wsumsq(v[1])), real(1e-8));
            y = leaky_relu(mul_channel(y, demod), real(0.2));
            return global_avg_pool(y);
        },
        {x, w, s});
}

TEST_CASE("backward accumulates into shared leaves") {
    Var a = make_var(Tensor::full({2}, 3), true);
    Var out = add(mul(a, a), a);  // d/da (a^2 + a) = 2a + 1
    backward(out);
    CHECK(double(a->grad[0]) == doctest::Approx(7).epsilon(1e-12));
    CHECK(double(a->grad[1]) == doctest::Approx(7).epsilon(1e-12));
}

TEST_CASE("no-grad leaves build no tape") {
    Var a = make_var(Tensor::full({2}, 1), false);
    Var out = mul(a, a);
    CHECK(out->parents.empty());
    backward(out);  // must be a no-op, not a crash
    CHECK(a->grad.numel() == 0);
}
