#ifndef AE_METRICS_HPP
#define AE_METRICS_HPP

#include <limits>
#include <string>
#include <vector>

#include "ae/latent.hpp"
#include "ae/losses.hpp"

namespace ae {

// map [-1,1] image data onto the 0..255 convention used for PSNR/SSIM
Tensor to_255(const Tensor& img);

// 10*log10(peak^2/mse); identical images return +infinity
double psnr(const Tensor& x, const Tensor& y, double peak);

// mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// computed per channel over the valid region and averaged
double ssim(const Tensor& x, const Tensor& y, double peak);

// Streaming Gaussian fit of feature embeddings. Partial accumulators can be
// merged, so statistics may be gathered concurrently and combined.
class FeatureStats {
public:
    explicit FeatureStats(int dim = 0);

    void accumulate(const std::vector<double>& feature);
    void merge(const FeatureStats& other);

    int dim() const { return dim_; }
    int64_t count() const { return count_; }
    std::vector<double> mean() const;
    std::vector<double> covariance() const;  // row-major [dim, dim]

private:
    int dim_;
    int64_t count_ = 0;
    std::vector<double> sum_;
    std::vector<double> outer_;  // sum of x x^T, row-major
};

// Frechet distance ||mu_a-mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)).
// Matrix square roots via eigendecomposition; eigenvalues below -1e-6 are an
// error, small negatives are clipped to zero.
double fid(const FeatureStats& a, const FeatureStats& b);

// embedding used for proxy-FID: per-stage global average pooling, concatenated
std::vector<double> fid_embedding(const FeatureExtractor& f, const Tensor& image);

struct ThroughputReport {
    double images_per_second = 0;
    int64_t images_processed = 0;
    int batch_size = 0;
    std::string hardware;
};

class Encoder;
class Decoder;
// wall-clock encode+decode round trips; the first two batches are warmup
ThroughputReport benchmark_throughput(const Encoder& encoder, const Decoder& decoder,
                                      int64_t n_images, int batch);

}  // namespace ae

#endif
