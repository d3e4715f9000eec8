#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ae/analysis.hpp"

using namespace ae;

namespace {

struct Fixture {
    ModelConfig cfg;
    Decoder decoder;
    Encoder encoder;

    Fixture()
        : cfg(make_cfg()), decoder(cfg), encoder(cfg) {
        decoder.init(1);
        encoder.init(2);
    }

    static ModelConfig make_cfg() {
        ModelConfig c;
        c.resolution = 16;
        c.latent_dim = 8;
        c.base_channels = 8;
        c.max_channels = 16;
        return c;
    }

    InversionModel model() const { return {encoder, decoder, nullptr}; }
};

Image random_image(int R, uint64_t seed) {
    Tensor t({3, R, R});
    Rng(seed, 0).fill_normal(t, 0, 0.5);
    return Image::from_tensor_clipped(std::move(t));
}

double l2(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = double(a[size_t(i)]) - double(b[size_t(i)]);
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("normalize_map rules") {
    Tensor m({2, 2});
    m.data = {real(-3), real(1), real(5), real(1)};
    Tensor n = normalize_map(m);
    CHECK(n[0] == real(0));
    CHECK(n[2] == real(1));
    CHECK(n[1] == real(0.5));

    Tensor c = Tensor::full({3, 3}, 42);
    for (real v : normalize_map(c).data) CHECK(v == real(0.5));
}

TEST_CASE("visualize_noise covers every site in range") {
    Fixture f;
    auto maps = visualize_noise(random_image(16, 1), f.model());
    REQUIRE(maps.size() == size_t(f.decoder.layout().noise_spec.size()));
    for (size_t i = 0; i < maps.size(); ++i) {
        CHECK(maps[i].dim(0) == f.decoder.layout().noise_spec[i].height);
        for (real v : maps[i].data) {
            CHECK(v >= real(0));
            CHECK(v <= real(1));
        }
    }
}

TEST_CASE("noise_shift factor one is the reconstruction, bit for bit") {
    Fixture f;
    Image img = random_image(16, 2);
    Image recon = f.model().reconstruct(img);
    auto frames = noise_shift(img, f.model(), kAllSites, {1.0});
    REQUIRE(frames.size() == size_t(f.decoder.layout().noise_spec.size()));
    for (const auto& fr : frames) {
        CHECK(fr.factor == 1.0);
        CHECK(fr.image.data.data == recon.data.data);
    }
}

TEST_CASE("noise_shift default row and site selection") {
    Fixture f;
    Image img = random_image(16, 3);
    auto one_site = noise_shift(img, f.model(), 2);
    CHECK(one_site.size() == 5);  // default factor list
    for (const auto& fr : one_site) CHECK(fr.site == 2);
    CHECK(one_site[0].factor == -2.0);
    CHECK(one_site[4].factor == 3.0);

    auto all = noise_shift(img, f.model(), kAllSites, {0.5, 1.75});
    CHECK(all.size() == size_t(2 * f.decoder.layout().noise_spec.size()));
    CHECK(all[0].site == 0);
    CHECK(all[1].site == 0);
    CHECK(all[2].site == 1);

    CHECK_THROWS(noise_shift(img, f.model(), 99));
    CHECK_THROWS(noise_shift(img, f.model(), kAllSites, {std::nan("")}));
}

TEST_CASE("noise_shift factor zero equals zeroing the site") {
    Fixture f;
    Image img = random_image(16, 4);
    auto frames = noise_shift(img, f.model(), 3, {0.0});
    EncoderOutput o = f.model().invert(img);
    NoiseMapSet zeroed = *o.noise;
    for (auto& v : zeroed.maps[3].data) v = 0;
    Image direct = f.decoder.synthesize(o.latent, zeroed);
    CHECK(frames[0].image.data.data == direct.data.data);
}

TEST_CASE("interpolation endpoints are bit exact") {
    Fixture f;
    Image a = random_image(16, 5), b = random_image(16, 6);
    InversionModel m = f.model();

    auto both = interpolate(a, b, m, 4, InterpMode::Both);
    REQUIRE(both.size() == 4);
    CHECK(both.front().data.data == m.reconstruct(a).data.data);
    CHECK(both.back().data.data == m.reconstruct(b).data.data);

    // noise_only pins img_a's latent: alpha=1 uses latent(a) with noise(b)
    auto noise_only = interpolate(a, b, m, 3, InterpMode::NoiseOnly);
    EncoderOutput oa = m.invert(a), ob = m.invert(b);
    CHECK(noise_only.front().data.data == m.reconstruct(a).data.data);
    CHECK(noise_only.back().data.data ==
          f.decoder.synthesize(oa.latent, *ob.noise).data.data);

    // latent_only pins a seeded random noise set at both ends
    auto latent_only = interpolate(a, b, m, 3, InterpMode::LatentOnly, 9);
    NoiseMapSet pinned = sample_noise(f.decoder.layout(), 9);
    CHECK(latent_only.front().data.data ==
          f.decoder.synthesize(oa.latent, pinned).data.data);
    CHECK(latent_only.back().data.data ==
          f.decoder.synthesize(ob.latent, pinned).data.data);
}

TEST_CASE("midpoint of both equals synthesis of elementwise means") {
    Fixture f;
    Image a = random_image(16, 7), b = random_image(16, 8);
    InversionModel m = f.model();
    auto frames = interpolate(a, b, m, 3, InterpMode::Both);

    // independent recomputation of the alpha = 0.5 frame
    EncoderOutput oa = m.invert(a), ob = m.invert(b);
    LatentCode mid = oa.latent;
    for (int64_t i = 0; i < mid.data.numel(); ++i)
        mid.data[size_t(i)] = real(0.5 * double(oa.latent.data[size_t(i)]) +
                                   0.5 * double(ob.latent.data[size_t(i)]));
    NoiseMapSet mid_noise = *oa.noise;
    for (size_t k = 0; k < mid_noise.maps.size(); ++k)
        for (int64_t i = 0; i < mid_noise.maps[k].numel(); ++i)
            mid_noise.maps[k][size_t(i)] =
                real(0.5 * double(oa.noise->maps[k][size_t(i)]) +
                     0.5 * double(ob.noise->maps[k][size_t(i)]));
    Image direct = f.decoder.synthesize(mid, mid_noise);
    for (int64_t i = 0; i < direct.data.numel(); ++i)
        CHECK(double(frames[1].data[size_t(i)]) ==
              doctest::Approx(double(direct.data[size_t(i)])).epsilon(1e-5));
}

TEST_CASE("interpolation varies continuously") {
    Fixture f;
    Image a = random_image(16, 9), b = random_image(16, 10);
    auto frames = interpolate(a, b, f.model(), 8, InterpMode::Both);
    std::vector<double> steps;
    for (size_t i = 0; i + 1 < frames.size(); ++i)
        steps.push_back(l2(frames[i].data, frames[i + 1].data));
    std::vector<double> sorted = steps;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted[sorted.size() / 2];
    for (double s : steps) CHECK(s <= 5 * median + 1e-12);
}

TEST_CASE("interpolation input validation") {
    Fixture f;
    Image a = random_image(16, 11);
    CHECK_THROWS(interpolate(a, a, f.model(), 1, InterpMode::Both));
    Tensor small({3, 8, 8});
    CHECK_THROWS_AS(
        interpolate(a, Image::from_tensor_clipped(small), f.model(), 3, InterpMode::Both),
        ShapeError);
    CHECK(interp_mode_from_string("latent") == InterpMode::LatentOnly);
    CHECK_THROWS(interp_mode_from_string("sideways"));
}

TEST_CASE("analysis never mutates the model") {
    Fixture f;
    std::string dec_digest = f.decoder.digest();
    std::string enc_digest = f.encoder.digest();
    Image a = random_image(16, 12), b = random_image(16, 13);
    visualize_noise(a, f.model());
    noise_shift(a, f.model(), kAllSites, {0.5, 1.0});
    interpolate(a, b, f.model(), 3, InterpMode::Both);
    CHECK(f.decoder.digest() == dec_digest);
    CHECK(f.encoder.digest() == enc_digest);
}

TEST_CASE("stitch_grid layout") {
    Fixture f;
    Image a = random_image(16, 14);
    std::vector<Image> frames{a, a, a};
    Tensor grid = stitch_grid(frames, 2);
    CHECK(grid.shape == std::vector<int>{3, 32, 32});
    // first tile is frame 0
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            CHECK(grid.data[size_t(i) * 32 + j] == a.data.data[size_t(i) * 16 + j]);
    // unused cell is filled with -1
    CHECK(grid.data[size_t(16) * 32 + 16] == real(-1));
    CHECK_THROWS(stitch_grid({}, 2));
}
