#include "ae/autograd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace ae {

using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using CMatMap = Eigen::Map<const Mat>;

Var make_var(Tensor v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return n;
}

static Var make_node(Tensor v, std::vector<Var> parents, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    bool need = false;
    for (const auto& p : parents)
        if (p && p->requires_grad) need = true;
    n->requires_grad = need;
    if (need) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(bw);
    }
    return n;
}

void backward(const Var& root) {
    if (!root->requires_grad) return;
    // iterative post-order topological sort
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p && p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    std::fill(root->grad.data.begin(), root->grad.data.end(), real(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            for (auto& p : n->parents)
                if (p && p->requires_grad) p->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

static void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a->value.shape) + " vs " + shape_str(b->value.shape));
}

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        if (a->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
        if (b->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) b->grad[i] += self.grad[i];
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        if (a->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
        if (b->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) b->grad[i] -= self.grad[i];
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        if (a->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] * b->value[i];
        if (b->requires_grad)
            for (int64_t i = 0; i < self.grad.numel(); ++i) b->grad[i] += self.grad[i] * a->value[i];
    });
}

Var add_scalar(const Var& a, real c) {
    Tensor out = a->value;
    for (auto& v : out.data) v += c;
    return make_node(std::move(out), {a}, [a](Node& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
    });
}

Var mul_scalar(const Var& a, real c) {
    Tensor out = a->value;
    for (auto& v : out.data) v *= c;
    return make_node(std::move(out), {a}, [a, c](Node& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] * c;
    });
}

Var square(const Var& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v *= v;
    return make_node(std::move(out), {a}, [a](Node& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            a->grad[i] += self.grad[i] * 2 * a->value[i];
    });
}

Var rsqrt(const Var& a, real eps) {
    Tensor out = a->value;
    for (auto& v : out.data) v = real(1) / std::sqrt(v + eps);
    auto res = make_node(out, {a}, nullptr);
    if (res->requires_grad) {
        Tensor saved = res->value;
        res->backward_fn = [a, saved](Node& self) {
            // d(1/sqrt(u))/du = -0.5 * r^3
            for (int64_t i = 0; i < self.grad.numel(); ++i) {
                real r = saved[i];
                a->grad[i] += self.grad[i] * real(-0.5) * r * r * r;
            }
        };
    }
    return res;
}

Var leaky_relu(const Var& a, real slope) {
    Tensor out = a->value;
    for (auto& v : out.data)
        if (v < 0) v *= slope;
    return make_node(std::move(out), {a}, [a, slope](Node& self) {
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            a->grad[i] += self.grad[i] * (a->value[i] < 0 ? slope : real(1));
    });
}

// ---- linear ----

Var linear(const Var& x, const Var& w, const Var& b) {
    const int N = x->value.dim(0), I = x->value.dim(1);
    const int O = w->value.dim(0);
    if (w->value.dim(1) != I)
        throw std::invalid_argument("linear: input width " + std::to_string(I) +
                                    " does not match weight " + shape_str(w->value.shape));
    Tensor out({N, O});
    CMatMap X(x->value.data.data(), N, I);
    CMatMap W(w->value.data.data(), O, I);
    MatMap Y(out.data.data(), N, O);
    Y.noalias() = X * W.transpose();
    if (b) {
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) out.data[size_t(n) * O + o] += b->value[o];
    }
    return make_node(std::move(out), {x, w, b}, [x, w, b, N, I, O](Node& self) {
        CMatMap G(self.grad.data.data(), N, O);
        CMatMap X(x->value.data.data(), N, I);
        CMatMap W(w->value.data.data(), O, I);
        if (x->requires_grad) {
            MatMap GX(x->grad.data.data(), N, I);
            GX.noalias() += G * W;
        }
        if (w->requires_grad) {
            MatMap GW(w->grad.data.data(), O, I);
            GW.noalias() += G.transpose() * X;
        }
        if (b && b->requires_grad)
            for (int n = 0; n < N; ++n)
                for (int o = 0; o < O; ++o) b->grad[o] += self.grad.data[size_t(n) * O + o];
    });
}

// ---- conv2d ----

static void im2col(const real* src, int C, int H, int W, int k, int stride, int pad, int Ho,
                   int Wo, real* col) {
    // col is [C*k*k, Ho*Wo]
    for (int c = 0; c < C; ++c) {
        const real* plane = src + size_t(c) * H * W;
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                real* dst = col + (size_t(c) * k * k + ki * k + kj) * Ho * Wo;
                for (int i = 0; i < Ho; ++i) {
                    int si = i * stride + ki - pad;
                    if (si < 0 || si >= H) {
                        std::fill(dst + size_t(i) * Wo, dst + size_t(i + 1) * Wo, real(0));
                        continue;
                    }
                    const real* row = plane + size_t(si) * W;
                    for (int j = 0; j < Wo; ++j) {
                        int sj = j * stride + kj - pad;
                        dst[size_t(i) * Wo + j] = (sj >= 0 && sj < W) ? row[sj] : real(0);
                    }
                }
            }
    }
}

static void col2im(const real* col, int C, int H, int W, int k, int stride, int pad, int Ho,
                   int Wo, real* dst) {
    for (int c = 0; c < C; ++c) {
        real* plane = dst + size_t(c) * H * W;
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                const real* src = col + (size_t(c) * k * k + ki * k + kj) * Ho * Wo;
                for (int i = 0; i < Ho; ++i) {
                    int si = i * stride + ki - pad;
                    if (si < 0 || si >= H) continue;
                    real* row = plane + size_t(si) * W;
                    for (int j = 0; j < Wo; ++j) {
                        int sj = j * stride + kj - pad;
                        if (sj >= 0 && sj < W) row[sj] += src[size_t(i) * Wo + j];
                    }
                }
            }
    }
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    const int O = w->value.dim(0), k = w->value.dim(2);
    if (w->value.dim(1) != C)
        throw std::invalid_argument("conv2d: input channels " + std::to_string(C) +
                                    " do not match weight " + shape_str(w->value.shape));
    const int Ho = (H + 2 * pad - k) / stride + 1;
    const int Wo = (W + 2 * pad - k) / stride + 1;
    const int ck = C * k * k;

    Tensor out({N, O, Ho, Wo});
    {
        std::vector<real> col(size_t(ck) * Ho * Wo);
        CMatMap Wm(w->value.data.data(), O, ck);
        for (int n = 0; n < N; ++n) {
            im2col(x->value.data.data() + size_t(n) * C * H * W, C, H, W, k, stride, pad, Ho, Wo,
                   col.data());
            CMatMap Col(col.data(), ck, Ho * Wo);
            MatMap Y(out.data.data() + size_t(n) * O * Ho * Wo, O, Ho * Wo);
            Y.noalias() = Wm * Col;
        }
        if (b) {
            for (int n = 0; n < N; ++n)
                for (int o = 0; o < O; ++o) {
                    real bo = b->value[o];
                    real* p = out.data.data() + (size_t(n) * O + o) * Ho * Wo;
                    for (int i = 0; i < Ho * Wo; ++i) p[i] += bo;
                }
        }
    }
    return make_node(std::move(out), {x, w, b},
                     [x, w, b, N, C, H, W, O, k, stride, pad, Ho, Wo, ck](Node& self) {
                         std::vector<real> col(size_t(ck) * Ho * Wo);
                         CMatMap Wm(w->value.data.data(), O, ck);
                         for (int n = 0; n < N; ++n) {
                             CMatMap G(self.grad.data.data() + size_t(n) * O * Ho * Wo, O, Ho * Wo);
                             if (w->requires_grad) {
                                 im2col(x->value.data.data() + size_t(n) * C * H * W, C, H, W, k,
                                        stride, pad, Ho, Wo, col.data());
                                 CMatMap Col(col.data(), ck, Ho * Wo);
                                 MatMap GW(w->grad.data.data(), O, ck);
                                 GW.noalias() += G * Col.transpose();
                             }
                             if (x->requires_grad) {
                                 MatMap Colg(col.data(), ck, Ho * Wo);
                                 Colg.noalias() = Wm.transpose() * G;
                                 col2im(col.data(), C, H, W, k, stride, pad, Ho, Wo,
                                        x->grad.data.data() + size_t(n) * C * H * W);
                             }
                         }
                         if (b && b->requires_grad) {
                             for (int n = 0; n < N; ++n)
                                 for (int o = 0; o < O; ++o) {
                                     const real* p =
                                         self.grad.data.data() + (size_t(n) * O + o) * Ho * Wo;
                                     real s = 0;
                                     for (int i = 0; i < Ho * Wo; ++i) s += p[i];
                                     b->grad[o] += s;
                                 }
                         }
                     });
}

// ---- shape / broadcast ----

Var upsample2x(const Var& x) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    Tensor out({N, C, 2 * H, 2 * W});
    for (int nc = 0; nc < N * C; ++nc) {
        const real* src = x->value.data.data() + size_t(nc) * H * W;
        real* dst = out.data.data() + size_t(nc) * 4 * H * W;
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                real v = src[size_t(i) * W + j];
                real* d = dst + size_t(2 * i) * 2 * W + 2 * j;
                d[0] = v;
                d[1] = v;
                d[2 * W] = v;
                d[2 * W + 1] = v;
            }
    }
    return make_node(std::move(out), {x}, [x, N, C, H, W](Node& self) {
        for (int nc = 0; nc < N * C; ++nc) {
            real* gdst = x->grad.data.data() + size_t(nc) * H * W;
            const real* g = self.grad.data.data() + size_t(nc) * 4 * H * W;
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const real* s = g + size_t(2 * i) * 2 * W + 2 * j;
                    gdst[size_t(i) * W + j] += s[0] + s[1] + s[2 * W] + s[2 * W + 1];
                }
        }
    });
}

Var global_avg_pool(const Var& x) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    const real inv = real(1) / (real(H) * real(W));
    Tensor out({N, C});
    for (int nc = 0; nc < N * C; ++nc) {
        const real* src = x->value.data.data() + size_t(nc) * H * W;
        real s = 0;
        for (int i = 0; i < H * W; ++i) s += src[i];
        out.data[nc] = s * inv;
    }
    return make_node(std::move(out), {x}, [x, N, C, H, W, inv](Node& self) {
        for (int nc = 0; nc < N * C; ++nc) {
            real g = self.grad.data[nc] * inv;
            real* dst = x->grad.data.data() + size_t(nc) * H * W;
            for (int i = 0; i < H * W; ++i) dst[i] += g;
        }
    });
}

Var mul_channel(const Var& x, const Var& s) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    if (s->value.shape != std::vector<int>{N, C})
        throw std::invalid_argument("mul_channel: expected [N,C] scale, got " +
                                    shape_str(s->value.shape));
    Tensor out = x->value;
    for (int nc = 0; nc < N * C; ++nc) {
        real sv = s->value[nc];
        real* p = out.data.data() + size_t(nc) * H * W;
        for (int i = 0; i < H * W; ++i) p[i] *= sv;
    }
    return make_node(std::move(out), {x, s}, [x, s, N, C, H, W](Node& self) {
        for (int nc = 0; nc < N * C; ++nc) {
            const real* g = self.grad.data.data() + size_t(nc) * H * W;
            if (x->requires_grad) {
                real sv = s->value[nc];
                real* gx = x->grad.data.data() + size_t(nc) * H * W;
                for (int i = 0; i < H * W; ++i) gx[i] += g[i] * sv;
            }
            if (s->requires_grad) {
                const real* xv = x->value.data.data() + size_t(nc) * H * W;
                real acc = 0;
                for (int i = 0; i < H * W; ++i) acc += g[i] * xv[i];
                s->grad[nc] += acc;
            }
        }
    });
}

Var add_channel(const Var& x, const Var& s) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    if (s->value.shape != std::vector<int>{N, C})
        throw std::invalid_argument("add_channel: expected [N,C] bias, got " +
                                    shape_str(s->value.shape));
    Tensor out = x->value;
    for (int nc = 0; nc < N * C; ++nc) {
        real sv = s->value[nc];
        real* p = out.data.data() + size_t(nc) * H * W;
        for (int i = 0; i < H * W; ++i) p[i] += sv;
    }
    return make_node(std::move(out), {x, s}, [x, s, N, C, H, W](Node& self) {
        for (int nc = 0; nc < N * C; ++nc) {
            const real* g = self.grad.data.data() + size_t(nc) * H * W;
            if (x->requires_grad) {
                real* gx = x->grad.data.data() + size_t(nc) * H * W;
                for (int i = 0; i < H * W; ++i) gx[i] += g[i];
            }
            if (s->requires_grad) {
                real acc = 0;
                for (int i = 0; i < H * W; ++i) acc += g[i];
                s->grad[nc] += acc;
            }
        }
    });
}

Var mul_cvec(const Var& x, const Var& w) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    if (w->value.shape != std::vector<int>{C})
        throw std::invalid_argument("mul_cvec: expected [C] weights, got " +
                                    shape_str(w->value.shape));
    Tensor out = x->value;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            real wv = w->value[c];
            real* p = out.data.data() + (size_t(n) * C + c) * H * W;
            for (int i = 0; i < H * W; ++i) p[i] *= wv;
        }
    return make_node(std::move(out), {x, w}, [x, w, N, C, H, W](Node& self) {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const real* g = self.grad.data.data() + (size_t(n) * C + c) * H * W;
                if (x->requires_grad) {
                    real wv = w->value[c];
                    real* gx = x->grad.data.data() + (size_t(n) * C + c) * H * W;
                    for (int i = 0; i < H * W; ++i) gx[i] += g[i] * wv;
                }
                if (w->requires_grad) {
                    const real* xv = x->value.data.data() + (size_t(n) * C + c) * H * W;
                    real acc = 0;
                    for (int i = 0; i < H * W; ++i) acc += g[i] * xv[i];
                    w->grad[c] += acc;
                }
            }
    });
}

Var add_cvec(const Var& x, const Var& b) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    if (b->value.shape != std::vector<int>{C})
        throw std::invalid_argument("add_cvec: expected [C] bias, got " + shape_str(b->value.shape));
    Tensor out = x->value;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            real bv = b->value[c];
            real* p = out.data.data() + (size_t(n) * C + c) * H * W;
            for (int i = 0; i < H * W; ++i) p[i] += bv;
        }
    return make_node(std::move(out), {x, b}, [x, b, N, C, H, W](Node& self) {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const real* g = self.grad.data.data() + (size_t(n) * C + c) * H * W;
                if (x->requires_grad) {
                    real* gx = x->grad.data.data() + (size_t(n) * C + c) * H * W;
                    for (int i = 0; i < H * W; ++i) gx[i] += g[i];
                }
                if (b->requires_grad) {
                    real acc = 0;
                    for (int i = 0; i < H * W; ++i) acc += g[i];
                    b->grad[c] += acc;
                }
            }
    });
}

Var sum_channels(const Var& x) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    Tensor out({N, 1, H, W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const real* p = x->value.data.data() + (size_t(n) * C + c) * H * W;
            real* o = out.data.data() + size_t(n) * H * W;
            for (int i = 0; i < H * W; ++i) o[i] += p[i];
        }
    return make_node(std::move(out), {x}, [x, N, C, H, W](Node& self) {
        for (int n = 0; n < N; ++n) {
            const real* g = self.grad.data.data() + size_t(n) * H * W;
            for (int c = 0; c < C; ++c) {
                real* gx = x->grad.data.data() + (size_t(n) * C + c) * H * W;
                for (int i = 0; i < H * W; ++i) gx[i] += g[i];
            }
        }
    });
}

Var mul_spatial(const Var& x, const Var& m) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    if (m->value.shape != std::vector<int>{N, 1, H, W})
        throw std::invalid_argument("mul_spatial: expected [N,1,H,W] map, got " +
                                    shape_str(m->value.shape));
    Tensor out = x->value;
    for (int n = 0; n < N; ++n) {
        const real* mm = m->value.data.data() + size_t(n) * H * W;
        for (int c = 0; c < C; ++c) {
            real* p = out.data.data() + (size_t(n) * C + c) * H * W;
            for (int i = 0; i < H * W; ++i) p[i] *= mm[i];
        }
    }
    return make_node(std::move(out), {x, m}, [x, m, N, C, H, W](Node& self) {
        for (int n = 0; n < N; ++n) {
            const real* mm = m->value.data.data() + size_t(n) * H * W;
            for (int c = 0; c < C; ++c) {
                const real* g = self.grad.data.data() + (size_t(n) * C + c) * H * W;
                if (x->requires_grad) {
                    real* gx = x->grad.data.data() + (size_t(n) * C + c) * H * W;
                    for (int i = 0; i < H * W; ++i) gx[i] += g[i] * mm[i];
                }
                if (m->requires_grad) {
                    const real* xv = x->value.data.data() + (size_t(n) * C + c) * H * W;
                    real* gm = m->grad.data.data() + size_t(n) * H * W;
                    for (int i = 0; i < H * W; ++i) gm[i] += g[i] * xv[i];
                }
            }
        }
    });
}

Var expand_batch(const Var& c, int n) {
    const int64_t sz = c->value.numel();
    std::vector<int> shape;
    shape.push_back(n);
    for (int d : c->value.shape) shape.push_back(d);
    Tensor out(shape);
    for (int i = 0; i < n; ++i)
        std::copy(c->value.data.begin(), c->value.data.end(), out.data.begin() + size_t(i) * sz);
    return make_node(std::move(out), {c}, [c, n, sz](Node& self) {
        for (int i = 0; i < n; ++i) {
            const real* g = self.grad.data.data() + size_t(i) * sz;
            for (int64_t j = 0; j < sz; ++j) c->grad[j] += g[j];
        }
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    const int S = static_cast<int>(rows.size());
    const int N = rows[0]->value.dim(0), n = rows[0]->value.dim(1);
    Tensor out({N, S, n});
    for (int s = 0; s < S; ++s) {
        if (rows[s]->value.shape != std::vector<int>{N, n})
            throw std::invalid_argument("stack_rows: row " + std::to_string(s) + " has shape " +
                                        shape_str(rows[s]->value.shape));
        for (int b = 0; b < N; ++b)
            std::copy(rows[s]->value.data.begin() + size_t(b) * n,
                      rows[s]->value.data.begin() + size_t(b + 1) * n,
                      out.data.begin() + (size_t(b) * S + s) * n);
    }
    std::vector<Var> parents(rows.begin(), rows.end());
    return make_node(std::move(out), parents, [rows, S, N, n](Node& self) {
        for (int s = 0; s < S; ++s) {
            if (!rows[s]->requires_grad) continue;
            for (int b = 0; b < N; ++b) {
                const real* g = self.grad.data.data() + (size_t(b) * S + s) * n;
                real* dst = rows[s]->grad.data.data() + size_t(b) * n;
                for (int i = 0; i < n; ++i) dst[i] += g[i];
            }
        }
    });
}

Var select_row(const Var& x, int row) {
    const int N = x->value.dim(0), S = x->value.dim(1), n = x->value.dim(2);
    if (row < 0 || row >= S)
        throw std::out_of_range("select_row: row " + std::to_string(row) + " of " +
                                std::to_string(S));
    Tensor out({N, n});
    for (int b = 0; b < N; ++b)
        std::copy(x->value.data.begin() + (size_t(b) * S + row) * n,
                  x->value.data.begin() + (size_t(b) * S + row + 1) * n,
                  out.data.begin() + size_t(b) * n);
    return make_node(std::move(out), {x}, [x, row, N, S, n](Node& self) {
        for (int b = 0; b < N; ++b) {
            const real* g = self.grad.data.data() + size_t(b) * n;
            real* dst = x->grad.data.data() + (size_t(b) * S + row) * n;
            for (int i = 0; i < n; ++i) dst[i] += g[i];
        }
    });
}

Var mean_all(const Var& x) {
    const real inv = real(1) / real(x->value.numel());
    real s = 0;
    for (real v : x->value.data) s += v;
    Tensor out({1});
    out[0] = s * inv;
    return make_node(std::move(out), {x}, [x, inv](Node& self) {
        real g = self.grad[0] * inv;
        for (auto& v : x->grad.data) v += g;
    });
}

Var pixel_norm(const Var& x, real eps) {
    const int N = x->value.dim(0), n = x->value.dim(1);
    Tensor out({N, n});
    std::vector<real> rs(static_cast<size_t>(N));
    for (int b = 0; b < N; ++b) {
        const real* p = x->value.data.data() + size_t(b) * n;
        real ms = 0;
        for (int i = 0; i < n; ++i) ms += p[i] * p[i];
        ms /= real(n);
        real r = real(1) / std::sqrt(ms + eps);
        rs[static_cast<size_t>(b)] = r;
        real* o = out.data.data() + size_t(b) * n;
        for (int i = 0; i < n; ++i) o[i] = p[i] * r;
    }
    return make_node(std::move(out), {x}, [x, N, n, rs](Node& self) {
        // y = x * r, r = (mean(x^2)+eps)^(-1/2)
        // dL/dx = r*g - (x.g) * r^3 / n * x
        for (int b = 0; b < N; ++b) {
            const real* p = x->value.data.data() + size_t(b) * n;
            const real* g = self.grad.data.data() + size_t(b) * n;
            real* gx = x->grad.data.data() + size_t(b) * n;
            real r = rs[static_cast<size_t>(b)];
            real dot = 0;
            for (int i = 0; i < n; ++i) dot += p[i] * g[i];
            real coef = dot * r * r * r / real(n);
            for (int i = 0; i < n; ++i) gx[i] += r * g[i] - coef * p[i];
        }
    });
}

Var noise_inject(const Var& x, const Var& strength, const Var& noise) {
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    if (strength->value.shape != std::vector<int>{C})
        throw std::invalid_argument("noise_inject: expected [C] strength, got " +
                                    shape_str(strength->value.shape));
    if (noise->value.shape != std::vector<int>{N, 1, H, W})
        throw std::invalid_argument("noise_inject: expected noise [N,1," + std::to_string(H) + "," +
                                    std::to_string(W) + "], got " + shape_str(noise->value.shape));
    Tensor out = x->value;
    for (int n = 0; n < N; ++n) {
        const real* nm = noise->value.data.data() + size_t(n) * H * W;
        for (int c = 0; c < C; ++c) {
            real sv = strength->value[c];
            real* p = out.data.data() + (size_t(n) * C + c) * H * W;
            for (int i = 0; i < H * W; ++i) p[i] += sv * nm[i];
        }
    }
    return make_node(std::move(out), {x, strength, noise}, [x, strength, noise, N, C, H,
                                                            W](Node& self) {
        for (int n = 0; n < N; ++n) {
            const real* nm = noise->value.data.data() + size_t(n) * H * W;
            real* gnm = noise->requires_grad ? noise->grad.data.data() + size_t(n) * H * W : nullptr;
            for (int c = 0; c < C; ++c) {
                const real* g = self.grad.data.data() + (size_t(n) * C + c) * H * W;
                real sv = strength->value[c];
                if (x->requires_grad) {
                    real* gx = x->grad.data.data() + (size_t(n) * C + c) * H * W;
                    for (int i = 0; i < H * W; ++i) gx[i] += g[i];
                }
                if (strength->requires_grad) {
                    real acc = 0;
                    for (int i = 0; i < H * W; ++i) acc += g[i] * nm[i];
                    strength->grad[c] += acc;
                }
                if (gnm)
                    for (int i = 0; i < H * W; ++i) gnm[i] += g[i] * sv;
            }
        }
    });
}

Var conv_wsumsq(const Var& w) {
    const int O = w->value.dim(0), I = w->value.dim(1), k = w->value.dim(2);
    const int kk = k * k;
    Tensor out({O, I});
    for (int o = 0; o < O; ++o)
        for (int i = 0; i < I; ++i) {
            const real* p = w->value.data.data() + (size_t(o) * I + i) * kk;
            real s = 0;
            for (int j = 0; j < kk; ++j) s += p[j] * p[j];
            out.data[size_t(o) * I + i] = s;
        }
    return make_node(std::move(out), {w}, [w, O, I, kk](Node& self) {
        for (int o = 0; o < O; ++o)
            for (int i = 0; i < I; ++i) {
                real g = self.grad.data[size_t(o) * I + i];
                const real* p = w->value.data.data() + (size_t(o) * I + i) * kk;
                real* gp = w->grad.data.data() + (size_t(o) * I + i) * kk;
                for (int j = 0; j < kk; ++j) gp[j] += 2 * g * p[j];
            }
    });
}

}  // namespace ae
