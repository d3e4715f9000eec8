#include "ae/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ae/tensor.hpp"

namespace ae {

std::string to_string(DecoderVersion v) { return v == DecoderVersion::V1 ? "v1" : "v2"; }
std::string to_string(ProjectionTarget t) { return t == ProjectionTarget::Z ? "z" : "wplus"; }

DecoderVersion decoder_version_from_string(const std::string& s) {
    if (s == "v1" || s == "1") return DecoderVersion::V1;
    if (s == "v2" || s == "2") return DecoderVersion::V2;
    throw ConfigError("unknown decoder_version '" + s + "' (expected v1 or v2)");
}

ProjectionTarget projection_target_from_string(const std::string& s) {
    std::string t = s;
    std::transform(t.begin(), t.end(), t.begin(), ::tolower);
    if (t == "z") return ProjectionTarget::Z;
    if (t == "wplus" || t == "w+") return ProjectionTarget::WPLUS;
    throw ConfigError("unknown projection_target '" + s + "' (expected z or wplus)");
}

void ModelConfig::validate() const {
    if (!is_pow2(resolution) || resolution < 8)
        throw ConfigError("resolution must be a power of two >= 8, got " +
                          std::to_string(resolution));
    if (!is_pow2(encoder_out_size))
        throw ConfigError("encoder_out_size must be a power of two, got " +
                          std::to_string(encoder_out_size));
    if (resolution < encoder_out_size)
        throw ConfigError("resolution " + std::to_string(resolution) +
                          " smaller than encoder_out_size " + std::to_string(encoder_out_size));
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (base_channels < 1 || max_channels < 1)
        throw ConfigError("base_channels and max_channels must be positive");
    if (mapping_layers < 1) throw ConfigError("mapping_layers must be >= 1");
}

int ModelConfig::channels_at(int res) const {
    // halve the width each time the resolution doubles, capped at max_channels
    long c = static_cast<long>(base_channels) * (resolution / res);
    return static_cast<int>(std::min<long>(c, max_channels));
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return std::string();
        size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed config line: '" + line + "'");
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

std::string model_config_to_kv(const ModelConfig& c) {
    std::ostringstream os;
    os << "resolution = " << c.resolution << "\n";
    os << "latent_dim = " << c.latent_dim << "\n";
    os << "decoder_version = " << to_string(c.decoder_version) << "\n";
    os << "projection_target = " << to_string(c.projection_target) << "\n";
    os << "base_channels = " << c.base_channels << "\n";
    os << "max_channels = " << c.max_channels << "\n";
    os << "encoder_out_size = " << c.encoder_out_size << "\n";
    os << "mapping_layers = " << c.mapping_layers << "\n";
    return os.str();
}

static int to_int(const std::map<std::string, std::string>& kv, const std::string& key, int dflt) {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + it->second + "'");
    }
}

ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    c.resolution = to_int(kv, "resolution", c.resolution);
    c.latent_dim = to_int(kv, "latent_dim", c.latent_dim);
    if (kv.count("decoder_version")) c.decoder_version = decoder_version_from_string(kv.at("decoder_version"));
    if (kv.count("projection_target"))
        c.projection_target = projection_target_from_string(kv.at("projection_target"));
    c.base_channels = to_int(kv, "base_channels", c.base_channels);
    c.max_channels = to_int(kv, "max_channels", c.max_channels);
    c.encoder_out_size = to_int(kv, "encoder_out_size", c.encoder_out_size);
    c.mapping_layers = to_int(kv, "mapping_layers", c.mapping_layers);
    c.validate();
    return c;
}

ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_config_from_kv(parse_kv_text(ss.str()));
}

std::string first_config_mismatch(const ModelConfig& a, const ModelConfig& b) {
    if (a.resolution != b.resolution) return "resolution";
    if (a.latent_dim != b.latent_dim) return "latent_dim";
    if (a.decoder_version != b.decoder_version) return "decoder_version";
    if (a.projection_target != b.projection_target) return "projection_target";
    if (a.base_channels != b.base_channels) return "base_channels";
    if (a.max_channels != b.max_channels) return "max_channels";
    if (a.encoder_out_size != b.encoder_out_size) return "encoder_out_size";
    if (a.mapping_layers != b.mapping_layers) return "mapping_layers";
    return "";
}

}  // namespace ae
