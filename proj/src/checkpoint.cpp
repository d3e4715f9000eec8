#include "ae/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace ae {

// Layout (little endian, see docs/checkpoint_format.md):
//   magic "AEC1", u32 version
//   u64 header_len, header text: flat key-value ModelConfig + meta.* keys
//   u32 array count, then per array:
//     u32 name_len, name bytes, u8 elem_size (4|8), u32 ndim, i32 dims[], data
namespace {

constexpr char kMagic[4] = {'A', 'E', 'C', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CheckpointError("checkpoint truncated");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open for writing: " + path);

    out.write(kMagic, 4);
    put(out, kVersion);

    std::string header = model_config_to_kv(ckpt.config);
    header += "meta.iteration = " + std::to_string(ckpt.meta.iteration) + "\n";
    header += "meta.stage = " + ckpt.meta.stage + "\n";
    header += "meta.seed = " + std::to_string(ckpt.meta.seed) + "\n";
    put(out, static_cast<uint64_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    put(out, static_cast<uint32_t>(ckpt.params.size()));
    for (const auto& [name, t] : ckpt.params) {
        put(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put(out, static_cast<uint8_t>(sizeof(real)));
        put(out, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) put(out, static_cast<int32_t>(d));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(real)));
    }
    if (!out) throw CheckpointError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open: " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("not a checkpoint file (bad magic): " + path);
    uint32_t version = take<uint32_t>(in);
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    uint64_t header_len = take<uint64_t>(in);
    if (header_len > (1ULL << 24)) throw CheckpointError("corrupt header length");
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw CheckpointError("checkpoint truncated");

    Checkpoint ckpt;
    auto kv = parse_kv_text(header);
    std::map<std::string, std::string> cfg_kv;
    for (const auto& [k, v] : kv) {
        if (k.rfind("meta.", 0) == 0) continue;
        cfg_kv[k] = v;
    }
    try {
        ckpt.config = model_config_from_kv(cfg_kv);
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("corrupt embedded config: ") + e.what());
    }
    if (kv.count("meta.iteration")) ckpt.meta.iteration = std::stoll(kv.at("meta.iteration"));
    if (kv.count("meta.stage")) ckpt.meta.stage = kv.at("meta.stage");
    if (kv.count("meta.seed")) ckpt.meta.seed = std::stoull(kv.at("meta.seed"));

    uint32_t count = take<uint32_t>(in);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = take<uint32_t>(in);
        if (name_len > (1U << 16)) throw CheckpointError("corrupt array name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        uint8_t elem = take<uint8_t>(in);
        if (elem != sizeof(real))
            throw CheckpointError("checkpoint stores " + std::to_string(int(elem)) +
                                  "-byte scalars, this build uses " + std::to_string(sizeof(real)));
        uint32_t ndim = take<uint32_t>(in);
        if (ndim > 8) throw CheckpointError("corrupt array rank");
        std::vector<int> shape(ndim);
        for (auto& d : shape) {
            d = take<int32_t>(in);
            if (d <= 0) throw CheckpointError("corrupt array dimension");
        }
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(real)));
        if (!in) throw CheckpointError("checkpoint truncated in array " + name);
        ckpt.params[name] = std::move(t);
    }
    return ckpt;
}

void require_config_match(const ModelConfig& stored, const ModelConfig& expected) {
    std::string field = first_config_mismatch(stored, expected);
    if (!field.empty())
        throw CheckpointError("checkpoint config incompatible with model: field '" + field + "'");
}

}  // namespace ae
