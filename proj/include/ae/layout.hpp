#ifndef AE_LAYOUT_HPP
#define AE_LAYOUT_HPP

#include <vector>

#include "ae/config.hpp"

namespace ae {

struct NoiseSite {
    int site_id;
    int height;
    int width;
};

// Derived geometry of the synthesis network: how many style slots there
// are and which resolution each noise injection site has.
struct DecoderLayout {
    int style_slots = 0;
    std::vector<NoiseSite> noise_spec;
    std::vector<int> resolutions;  // 4, 8, ..., R

    // resolution a given style slot operates at
    int slot_resolution(int slot, DecoderVersion version) const;
};

// Pure function of the config. v2 has two style slots and two noise sites
// per resolution (S = 2*log2(R) - 2); v1 has one of each per resolution.
DecoderLayout derive_layout(const ModelConfig& config);

}  // namespace ae

#endif
