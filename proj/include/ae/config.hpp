#ifndef AE_CONFIG_HPP
#define AE_CONFIG_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ae {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DecoderVersion { V1, V2 };
enum class ProjectionTarget { Z, WPLUS };

std::string to_string(DecoderVersion v);
std::string to_string(ProjectionTarget t);
DecoderVersion decoder_version_from_string(const std::string& s);
ProjectionTarget projection_target_from_string(const std::string& s);

// Single source of truth for all model shapes. Images are [3, R, R] with
// values in [-1, 1].
struct ModelConfig {
    int resolution = 64;
    int latent_dim = 64;
    DecoderVersion decoder_version = DecoderVersion::V2;
    ProjectionTarget projection_target = ProjectionTarget::WPLUS;
    int base_channels = 32;
    int max_channels = 64;
    int encoder_out_size = 4;
    int mapping_layers = 8;

    void validate() const;

    // channel width of the feature maps at a given resolution
    int channels_at(int res) const;

    bool operator==(const ModelConfig&) const = default;
};

// flat "key = value" text, one field per line
std::map<std::string, std::string> parse_kv_text(const std::string& text);
std::string model_config_to_kv(const ModelConfig& c);
ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv);
ModelConfig load_model_config(const std::string& path);

// empty string when equal, otherwise the name of the first differing field
std::string first_config_mismatch(const ModelConfig& a, const ModelConfig& b);

}  // namespace ae

#endif
