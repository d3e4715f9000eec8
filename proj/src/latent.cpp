#include "ae/latent.hpp"

namespace ae {

void LatentCode::check(const DecoderLayout& layout, int n) const {
    if (kind == LatentKind::WPLUS) {
        if (data.ndim() != 2 || data.dim(0) != layout.style_slots || data.dim(1) != n)
            throw ShapeError("W+ latent must be [" + std::to_string(layout.style_slots) + "," +
                             std::to_string(n) + "], got " + shape_str(data.shape));
    } else {
        if (data.ndim() != 1 || data.dim(0) != n)
            throw ShapeError("latent vector must have length " + std::to_string(n) + ", got " +
                             shape_str(data.shape));
    }
    if (!data.all_finite()) throw ShapeError("latent code contains non-finite values");
}

void NoiseMapSet::check(const DecoderLayout& layout) const {
    if (maps.size() != layout.noise_spec.size())
        throw ShapeError("noise set has " + std::to_string(maps.size()) + " maps, layout demands " +
                         std::to_string(layout.noise_spec.size()) +
                         (maps.size() < layout.noise_spec.size()
                              ? " (missing site " + std::to_string(maps.size()) + ")"
                              : ""));
    for (size_t i = 0; i < maps.size(); ++i) {
        const auto& site = layout.noise_spec[i];
        if (maps[i].ndim() != 2 || maps[i].dim(0) != site.height || maps[i].dim(1) != site.width)
            throw ShapeError("noise map for site " + std::to_string(site.site_id) + " must be [" +
                             std::to_string(site.height) + "," + std::to_string(site.width) +
                             "], got " + shape_str(maps[i].shape));
        if (!maps[i].all_finite())
            throw ShapeError("noise map for site " + std::to_string(site.site_id) +
                             " contains non-finite values");
    }
}

NoiseMapSet NoiseMapSet::zeros(const DecoderLayout& layout) {
    NoiseMapSet set;
    for (const auto& site : layout.noise_spec)
        set.maps.push_back(Tensor::zeros({site.height, site.width}));
    return set;
}

Image Image::from_tensor_clipped(Tensor t) {
    if (t.ndim() != 3 || t.dim(0) != 3)
        throw ShapeError("image must be [3,H,W], got " + shape_str(t.shape));
    for (auto& v : t.data) v = std::min<real>(1, std::max<real>(-1, v));
    return Image{std::move(t)};
}

void Image::check_range() const {
    if (data.ndim() != 3 || data.dim(0) != 3)
        throw ShapeError("image must be [3,H,W], got " + shape_str(data.shape));
    for (real v : data.data)
        if (!(v >= -1 && v <= 1))
            throw ShapeError("image values must lie in [-1,1]");
}

}  // namespace ae
