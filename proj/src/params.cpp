#include "ae/params.hpp"

#include <algorithm>
#include <stdexcept>

#include "ae/digest.hpp"

namespace ae {

Var ParamStore::add(const std::string& name, Tensor init, bool trainable) {
    if (by_name_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
    Var v = make_var(std::move(init), trainable);
    by_name_[name] = v;
    order_.push_back(name);
    return v;
}

Var ParamStore::get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::out_of_range("no such parameter: " + name);
    return it->second;
}

void ParamStore::set_trainable(bool t) {
    for (auto& [name, v] : by_name_) v->requires_grad = t;
}

void ParamStore::zero_grad() {
    for (auto& [name, v] : by_name_) {
        v->ensure_grad();
        std::fill(v->grad.data.begin(), v->grad.data.end(), real(0));
    }
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, v] : by_name_) out[name] = v->value;
    return out;
}

void ParamStore::load(const std::map<std::string, Tensor>& arrays) {
    for (const auto& name : order_) {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw std::runtime_error("missing parameter in source: " + name);
        Var v = by_name_.at(name);
        if (it->second.shape != v->value.shape)
            throw std::runtime_error("parameter " + name + " has shape " +
                                     shape_str(it->second.shape) + ", expected " +
                                     shape_str(v->value.shape));
        v->value = it->second;
    }
}

std::string ParamStore::digest() const {
    Sha256 h;
    for (const auto& [name, v] : by_name_) {  // std::map iterates in sorted order
        h.update(name.data(), name.size());
        h.update(v->value.data.data(), v->value.data.size() * sizeof(real));
    }
    return h.hex();
}

static bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void seed_init(ParamStore& params, uint64_t seed) {
    for (const auto& name : params.names()) {
        Var v = params.get(name);
        // FNV-1a of the name selects the stream; stable across platforms
        uint64_t stream = 1469598103934665603ULL;
        for (char c : name) {
            stream ^= static_cast<unsigned char>(c);
            stream *= 1099511628211ULL;
        }
        Rng rng(seed, stream);
        if (ends_with(name, ".bias")) {
            bool style_bias = name.find("style") != std::string::npos ||
                              name.find("affine") != std::string::npos;
            std::fill(v->value.data.begin(), v->value.data.end(),
                      style_bias ? real(1) : real(0));
        } else if (ends_with(name, "noise_strength")) {
            std::fill(v->value.data.begin(), v->value.data.end(), real(1));
        } else if (ends_with(name, ".const")) {
            rng.fill_normal(v->value, 0, 1);
        } else {
            // fan-in scaling keeps activation magnitudes stable through deep
            // stacks (a flat small std collapses the 8-layer mapping MLP)
            int64_t fan_in = v->value.shape.size() >= 2
                                 ? v->value.numel() / v->value.dim(0)
                                 : v->value.numel();
            rng.fill_normal(v->value, 0, 1.0 / std::sqrt(double(fan_in)));
        }
    }
}

}  // namespace ae
