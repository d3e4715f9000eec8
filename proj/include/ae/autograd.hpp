#ifndef AE_AUTOGRAD_HPP
#define AE_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <vector>

#include "ae/tensor.hpp"

namespace ae {

// Reverse-mode tape. Every op returns a fresh Node holding its value and a
// closure that scatters the incoming gradient to the parents. Leaves created
// with requires_grad keep their .grad across graphs until cleared, which is
// what the optimizer reads.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.shape != value.shape) grad = Tensor::zeros(value.shape);
    }
};

Var make_var(Tensor v, bool requires_grad = false);

// Runs the backward pass from root. If root is not a scalar, the seed
// gradient is all-ones.
void backward(const Var& root);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, real c);
Var mul_scalar(const Var& a, real c);
Var square(const Var& a);
Var rsqrt(const Var& a, real eps);  // 1/sqrt(a + eps)
Var leaky_relu(const Var& a, real slope);

// ---- linear algebra ----
// x:[N,I] w:[O,I] -> [N,O], optional bias [O]
Var linear(const Var& x, const Var& w, const Var& b = nullptr);
// x:[N,C,H,W] w:[O,C,k,k] -> [N,O,Ho,Wo], optional bias [O]
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

// ---- shape / broadcast ----
Var upsample2x(const Var& x);                    // nearest, [N,C,H,W]->[N,C,2H,2W]
Var global_avg_pool(const Var& x);               // [N,C,H,W]->[N,C]
Var mul_channel(const Var& x, const Var& s);     // s:[N,C]
Var add_channel(const Var& x, const Var& s);     // s:[N,C]
Var mul_cvec(const Var& x, const Var& w);        // w:[C], shared over batch
Var add_cvec(const Var& x, const Var& b);        // b:[C]
Var sum_channels(const Var& x);                  // [N,C,H,W]->[N,1,H,W]
Var mul_spatial(const Var& x, const Var& m);     // m:[N,1,H,W]
Var expand_batch(const Var& c, int n);           // [C,H,W]->[N,C,H,W]
Var stack_rows(const std::vector<Var>& rows);    // S x [N,n] -> [N,S,n]
Var select_row(const Var& x, int row);           // [N,S,n]->[N,n]
Var mean_all(const Var& x);                      // -> [1]

// x / sqrt(mean_over_features(x^2) + eps), x:[N,n]
Var pixel_norm(const Var& x, real eps);

// x + strength[c] * noise, noise:[N,1,H,W], strength:[C]
Var noise_inject(const Var& x, const Var& strength, const Var& noise);
// sum over kernel elements of w^2: [O,I,k,k] -> [O,I]
Var conv_wsumsq(const Var& w);

}  // namespace ae

#endif
