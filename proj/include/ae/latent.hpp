#ifndef AE_LATENT_HPP
#define AE_LATENT_HPP

#include <stdexcept>
#include <vector>

#include "ae/layout.hpp"
#include "ae/tensor.hpp"

namespace ae {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LatentKind { Z, W, WPLUS };

// Z / W: vector of length n ([n]); WPLUS: per-slot stack ([S, n]).
struct LatentCode {
    LatentKind kind = LatentKind::Z;
    Tensor data;

    static LatentCode z(Tensor v) { return {LatentKind::Z, std::move(v)}; }
    static LatentCode w(Tensor v) { return {LatentKind::W, std::move(v)}; }
    static LatentCode wplus(Tensor m) { return {LatentKind::WPLUS, std::move(m)}; }

    int latent_dim() const {
        return kind == LatentKind::WPLUS ? data.dim(1) : data.dim(0);
    }
    int rows() const { return kind == LatentKind::WPLUS ? data.dim(0) : 1; }

    void check(const DecoderLayout& layout, int n) const;
};

// Ordered single-channel maps, one per injection site of a layout.
struct NoiseMapSet {
    std::vector<Tensor> maps;  // each [h, w]

    void check(const DecoderLayout& layout) const;

    static NoiseMapSet zeros(const DecoderLayout& layout);
};

// An RGB image, [3, H, W], values in [-1, 1].
struct Image {
    Tensor data;

    int height() const { return data.dim(1); }
    int width() const { return data.dim(2); }

    static Image from_tensor_clipped(Tensor t);
    void check_range() const;
};

}  // namespace ae

#endif
