#ifndef AE_PARAMS_HPP
#define AE_PARAMS_HPP

#include <map>
#include <string>
#include <vector>

#include "ae/autograd.hpp"
#include "ae/rng.hpp"

namespace ae {

// Named parameter registry with stable creation order. Networks register
// every learnable (or frozen) array here; the trainer, checkpoints, and
// digests all address parameters by name.
class ParamStore {
public:
    Var add(const std::string& name, Tensor init, bool trainable = true);
    Var get(const std::string& name) const;
    bool has(const std::string& name) const { return by_name_.count(name) > 0; }

    const std::vector<std::string>& names() const { return order_; }
    size_t size() const { return order_.size(); }

    void set_trainable(bool t);
    void zero_grad();

    std::map<std::string, Tensor> snapshot() const;
    // arrays must match registered shapes exactly
    void load(const std::map<std::string, Tensor>& arrays);

    // sha256 over (name, raw bytes) in sorted name order
    std::string digest() const;

private:
    std::map<std::string, Var> by_name_;
    std::vector<std::string> order_;
};

// Documented deterministic initialization scheme:
//   *.weight            -> normal(0, 1/sqrt(fan_in)); *.const -> normal(0, 1)
//   *.bias              -> 0, except style-affine biases ("style*.bias",
//                          "affine*.bias") which start at 1 so modulation is
//                          a no-op at init
//   *.noise_strength    -> 1 (a frozen random decoder must keep its noise
//                          path live)
// Draws come from the counter RNG, one stream per parameter name.
void seed_init(ParamStore& params, uint64_t seed);

}  // namespace ae

#endif
