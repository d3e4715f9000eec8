#ifndef AE_HARNESS_HPP
#define AE_HARNESS_HPP

#include <string>
#include <vector>

#include "ae/latent.hpp"

namespace ae {

// Preprocessed image collection: every entry is [3, R, R] in [-1, 1], held in
// stable file-name-sorted order so iteration is reproducible.
struct Dataset {
    std::vector<Tensor> images;
    std::vector<std::string> names;

    int64_t size() const { return static_cast<int64_t>(images.size()); }
};

// Load every decodable raster image under `path`, bilinearly stretched to
// R x R (aspect ratio deliberately ignored). Undecodable files are skipped
// with a warning on stderr; an empty result is an error.
Dataset load_dataset(const std::string& path, int resolution);

enum class SynthKind { Shapes, Textures, Checkers };

SynthKind synth_kind_from_string(const std::string& s);
std::string to_string(SynthKind k);

// deterministic procedural images; same (kind, n, resolution, seed) always
// reproduces identical pixel data
Dataset synth_dataset(SynthKind kind, int n, int resolution, uint64_t seed);

// lossless PNG round trip; img is [3,H,W] in [-1,1], gray maps are [h,w] in [0,1]
void save_image(const std::string& path, const Tensor& img);
void save_gray_image(const std::string& path, const Tensor& map);
Tensor load_image(const std::string& path, int resolution);

}  // namespace ae

#endif
