#ifndef AE_TENSOR_HPP
#define AE_TENSOR_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace ae {

#ifdef AE_USE_DOUBLE
using real = double;
#else
using real = float;
#endif

// Dense row-major tensor. Shapes follow the [N, C, H, W] convention where
// applicable; vectors are [N] and matrices [rows, cols].
struct Tensor {
    std::vector<int> shape;
    std::vector<real> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, real fill = 0) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(count(shape)), fill);
    }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s), 0); }
    static Tensor full(std::vector<int> s, real v) { return Tensor(std::move(s), v); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    real& operator[](size_t i) { return data[i]; }
    real operator[](size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (real v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

inline bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

inline int ilog2(int v) {
    assert(is_pow2(v));
    int l = 0;
    while (v > 1) {
        v >>= 1;
        ++l;
    }
    return l;
}

}  // namespace ae

#endif
