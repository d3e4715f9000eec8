#ifndef AE_CHECKPOINT_HPP
#define AE_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <string>

#include "ae/config.hpp"
#include "ae/tensor.hpp"

namespace ae {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
    int64_t iteration = 0;
    std::string stage = "init";
    uint64_t seed = 0;
};

// Container: embedded ModelConfig + named raw arrays + training metadata.
// Byte layout is documented in docs/checkpoint_format.md; the round trip
// save -> load is bit-exact on parameter data.
struct Checkpoint {
    ModelConfig config;
    std::map<std::string, Tensor> params;
    CheckpointMeta meta;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Throws CheckpointError naming the first differing field when the stored
// config does not match the model the checkpoint is being loaded into.
void require_config_match(const ModelConfig& stored, const ModelConfig& expected);

}  // namespace ae

#endif
