#include "ae/layout.hpp"

#include "ae/tensor.hpp"

namespace ae {

DecoderLayout derive_layout(const ModelConfig& config) {
    config.validate();
    DecoderLayout layout;
    for (int r = 4; r <= config.resolution; r *= 2) layout.resolutions.push_back(r);

    int id = 0;
    if (config.decoder_version == DecoderVersion::V2) {
        // two convolutions per resolution, each with its own style slot and
        // noise site: S = 2*log2(R) - 2
        layout.style_slots = 2 * ilog2(config.resolution) - 2;
        for (int r : layout.resolutions) {
            layout.noise_spec.push_back({id++, r, r});
            layout.noise_spec.push_back({id++, r, r});
        }
    } else {
        // v1: one style vector and one noise map per resolution, shared by
        // both injection points of that resolution's block
        layout.style_slots = ilog2(config.resolution) - 1;
        for (int r : layout.resolutions) layout.noise_spec.push_back({id++, r, r});
    }
    return layout;
}

int DecoderLayout::slot_resolution(int slot, DecoderVersion version) const {
    if (version == DecoderVersion::V2) return resolutions[static_cast<size_t>(slot) / 2];
    return resolutions[static_cast<size_t>(slot)];
}

}  // namespace ae
