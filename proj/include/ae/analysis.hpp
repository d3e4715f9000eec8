#ifndef AE_ANALYSIS_HPP
#define AE_ANALYSIS_HPP

#include <vector>

#include "ae/decoder.hpp"
#include "ae/encoder.hpp"

namespace ae {

// A trained encoder/decoder pair viewed as an inverter. For the two-network
// strategy, `noise_net` supplies the noise maps and `encoder` is L; otherwise
// `noise_net` stays null and the single encoder provides both outputs.
struct InversionModel {
    const Encoder& encoder;
    const Decoder& decoder;
    const Encoder* noise_net = nullptr;

    EncoderOutput invert(const Image& image) const;
    Image synthesize(const LatentCode& latent, const NoiseMapSet& noise) const;
    Image reconstruct(const Image& image) const;
};

// min-max normalization to [0,1]; a constant map becomes uniform 0.5
Tensor normalize_map(const Tensor& map);

// one grayscale [h,w] map per noise site, each normalized independently
std::vector<Tensor> visualize_noise(const Image& image, const InversionModel& model);

constexpr int kAllSites = -1;

struct NoiseShiftFrame {
    int site;
    double factor;
    Image image;
};

// Scale the selected noise map by each factor and resynthesize. With
// site == kAllSites the grid has one row per site (only that site's map is
// scaled in its row); a single site_id yields one row. Row-major order
// (site, factor).
std::vector<NoiseShiftFrame> noise_shift(const Image& image, const InversionModel& model,
                                         int site,
                                         const std::vector<double>& factors = {-2, -0.75, 0.5,
                                                                               1.75, 3});

enum class InterpMode { Both, LatentOnly, NoiseOnly };

std::string to_string(InterpMode m);
InterpMode interp_mode_from_string(const std::string& s);

// `steps` frames at alpha = 0, 1/(steps-1), ..., 1. Both: latent and noise
// interpolate together. LatentOnly: a seeded random noise set is pinned across
// all frames. NoiseOnly: img_a's predicted latent is pinned.
std::vector<Image> interpolate(const Image& img_a, const Image& img_b,
                               const InversionModel& model, int steps, InterpMode mode,
                               uint64_t noise_seed = 0);

// stitch frames row-major into a single [3, rows*H, cols*W] image
Tensor stitch_grid(const std::vector<Image>& frames, int cols);

}  // namespace ae

#endif
