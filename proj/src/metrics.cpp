#include "ae/metrics.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ae/decoder.hpp"
#include "ae/encoder.hpp"
#include "ae/rng.hpp"

namespace ae {

Tensor to_255(const Tensor& img) {
    Tensor out = img;
    for (auto& v : out.data) v = (v + real(1)) * real(127.5);
    return out;
}

double psnr(const Tensor& x, const Tensor& y, double peak) {
    if (!x.same_shape(y))
        throw ShapeError("psnr: shape mismatch " + shape_str(x.shape) + " vs " + shape_str(y.shape));
    if (peak <= 0) throw std::invalid_argument("psnr: peak must be positive");
    double mse = 0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        double d = double(x[size_t(i)]) - double(y[size_t(i)]);
        mse += d * d;
    }
    mse /= double(x.numel());
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

// ---- SSIM ----

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kWindow);
    double sum = 0;
    for (int i = 0; i < kWindow; ++i) {
        double d = i - (kWindow - 1) / 2.0;
        k[size_t(i)] = std::exp(-d * d / (2 * kSigma * kSigma));
        sum += k[size_t(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// separable valid-region Gaussian filter of one [H,W] plane
std::vector<double> gauss_filter(const std::vector<double>& img, int H, int W,
                                 const std::vector<double>& k, int& Ho, int& Wo) {
    Ho = H - kWindow + 1;
    Wo = W - kWindow + 1;
    std::vector<double> tmp(size_t(H) * Wo);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < Wo; ++j) {
            double s = 0;
            for (int t = 0; t < kWindow; ++t) s += img[size_t(i) * W + j + t] * k[size_t(t)];
            tmp[size_t(i) * Wo + j] = s;
        }
    std::vector<double> out(size_t(Ho) * Wo);
    for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
            double s = 0;
            for (int t = 0; t < kWindow; ++t) s += tmp[size_t(i + t) * Wo + j] * k[size_t(t)];
            out[size_t(i) * Wo + j] = s;
        }
    return out;
}

}  // namespace

double ssim(const Tensor& x, const Tensor& y, double peak) {
    if (!x.same_shape(y))
        throw ShapeError("ssim: shape mismatch " + shape_str(x.shape) + " vs " + shape_str(y.shape));
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H < kWindow || W < kWindow)
        throw std::invalid_argument("ssim: image smaller than the " + std::to_string(kWindow) +
                                    "-pixel window");
    const double c1 = (kK1 * peak) * (kK1 * peak);
    const double c2 = (kK2 * peak) * (kK2 * peak);
    const auto kern = gaussian_kernel();

    double total = 0;
    for (int c = 0; c < C; ++c) {
        std::vector<double> a(size_t(H) * W), b(size_t(H) * W), aa(size_t(H) * W),
            bb(size_t(H) * W), ab(size_t(H) * W);
        for (int i = 0; i < H * W; ++i) {
            double xv = x.data[size_t(c) * H * W + i];
            double yv = y.data[size_t(c) * H * W + i];
            a[size_t(i)] = xv;
            b[size_t(i)] = yv;
            aa[size_t(i)] = xv * xv;
            bb[size_t(i)] = yv * yv;
            ab[size_t(i)] = xv * yv;
        }
        int Ho, Wo;
        auto mu_x = gauss_filter(a, H, W, kern, Ho, Wo);
        auto mu_y = gauss_filter(b, H, W, kern, Ho, Wo);
        auto sxx = gauss_filter(aa, H, W, kern, Ho, Wo);
        auto syy = gauss_filter(bb, H, W, kern, Ho, Wo);
        auto sxy = gauss_filter(ab, H, W, kern, Ho, Wo);
        double acc = 0;
        for (size_t i = 0; i < mu_x.size(); ++i) {
            double mx = mu_x[i], my = mu_y[i];
            double vx = sxx[i] - mx * mx;
            double vy = syy[i] - my * my;
            double cxy = sxy[i] - mx * my;
            acc += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
        total += acc / double(mu_x.size());
    }
    return total / C;
}

// ---- FID ----

FeatureStats::FeatureStats(int dim) : dim_(dim) {
    sum_.assign(size_t(dim), 0);
    outer_.assign(size_t(dim) * size_t(dim), 0);
}

void FeatureStats::accumulate(const std::vector<double>& feature) {
    if (static_cast<int>(feature.size()) != dim_)
        throw std::invalid_argument("FeatureStats: feature dim " + std::to_string(feature.size()) +
                                    " != " + std::to_string(dim_));
    ++count_;
    for (int i = 0; i < dim_; ++i) {
        sum_[size_t(i)] += feature[size_t(i)];
        for (int j = 0; j < dim_; ++j)
            outer_[size_t(i) * dim_ + j] += feature[size_t(i)] * feature[size_t(j)];
    }
}

void FeatureStats::merge(const FeatureStats& other) {
    if (other.dim_ != dim_) throw std::invalid_argument("FeatureStats: dimension mismatch on merge");
    count_ += other.count_;
    for (size_t i = 0; i < sum_.size(); ++i) sum_[i] += other.sum_[i];
    for (size_t i = 0; i < outer_.size(); ++i) outer_[i] += other.outer_[i];
}

std::vector<double> FeatureStats::mean() const {
    if (count_ == 0) throw std::logic_error("FeatureStats: empty");
    std::vector<double> m = sum_;
    for (auto& v : m) v /= double(count_);
    return m;
}

std::vector<double> FeatureStats::covariance() const {
    if (count_ < 2) throw std::logic_error("FeatureStats: need at least 2 samples");
    auto m = mean();
    std::vector<double> cov(outer_.size());
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            cov[size_t(i) * dim_ + j] =
                (outer_[size_t(i) * dim_ + j] - double(count_) * m[size_t(i)] * m[size_t(j)]) /
                double(count_ - 1);
    return cov;
}

namespace {

constexpr double kEigTolerance = -1e-6;

// symmetric PSD square root with negative-eigenvalue clipping
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((m + m.transpose()) / 2.0);
    Eigen::VectorXd ev = es.eigenvalues();
    double scale = std::max(1.0, std::abs(ev.maxCoeff()));
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i] < kEigTolerance * scale)
            throw std::invalid_argument(std::string("fid: ") + what +
                                        " is not PSD (eigenvalue " + std::to_string(ev[i]) + ")");
        ev[i] = std::sqrt(std::max(0.0, ev[i]));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const FeatureStats& a, const FeatureStats& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("fid: feature dimension mismatch");
    const int d = a.dim();
    auto ma = a.mean(), mb = b.mean();
    auto ca = a.covariance(), cb = b.covariance();

    double mean_term = 0;
    for (int i = 0; i < d; ++i) {
        double diff = ma[size_t(i)] - mb[size_t(i)];
        mean_term += diff * diff;
    }

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Sa(
        ca.data(), d, d);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Sb(
        cb.data(), d, d);

    // tr((Sa Sb)^1/2) = tr((Sa^1/2 Sb Sa^1/2)^1/2), which is symmetric PSD
    Eigen::MatrixXd ra = psd_sqrt(Sa, "covariance a");
    Eigen::MatrixXd inner = ra * Sb * ra;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((inner + inner.transpose()) / 2.0);
    double tr_sqrt = 0;
    psd_sqrt(Sb, "covariance b");  // PSD validation of b at the same tolerance
    for (int i = 0; i < d; ++i) tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()[i]));

    return mean_term + Sa.trace() + Sb.trace() - 2.0 * tr_sqrt;
}

std::vector<double> fid_embedding(const FeatureExtractor& f, const Tensor& image) {
    Tensor batched({1, image.dim(0), image.dim(1), image.dim(2)});
    batched.data = image.data;
    std::vector<Var> feats = f.features(make_var(std::move(batched)));
    std::vector<double> out;
    for (const auto& fv : feats) {
        Var pooled = global_avg_pool(fv);
        for (real v : pooled->value.data) out.push_back(double(v));
    }
    return out;
}

ThroughputReport benchmark_throughput(const Encoder& encoder, const Decoder& decoder,
                                      int64_t n_images, int batch) {
    using clock = std::chrono::steady_clock;
    const int R = encoder.config().resolution;
    Rng rng(7, 0xbe7c);
    auto make_input = [&](int bs) {
        Tensor input({bs, 3, R, R});
        for (auto& v : input.data) v = real(rng.uniform(-1, 1));
        return make_var(std::move(input));
    };
    Var x = make_input(batch);

    ThroughputReport rep;
    rep.batch_size = batch;
    rep.hardware = "cpu";
    const int warmup = 2;
    int64_t done = 0;
    clock::time_point start{};
    double measured = 0;
    for (int b = 0; done < n_images; ++b) {
        if (b == warmup) start = clock::now();
        int bs = b < warmup ? batch : static_cast<int>(std::min<int64_t>(batch, n_images - done));
        if (bs != x->value.dim(0)) x = make_input(bs);
        EncoderOutputVar enc = encoder.encode_var(x, true);
        Var styles = enc.latent;
        if (encoder.config().projection_target == ProjectionTarget::Z)
            styles = decoder.broadcast_w_var(decoder.map_latent_var(enc.latent));
        Var img = decoder.synthesize_var(styles, enc.noise);
        (void)img;
        if (b >= warmup) {
            done += bs;
            measured = std::chrono::duration<double>(clock::now() - start).count();
        }
    }
    rep.images_processed = done;
    rep.images_per_second = measured > 0 ? double(done) / measured : 0;
    return rep;
}

}  // namespace ae
