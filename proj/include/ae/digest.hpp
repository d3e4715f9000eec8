#ifndef AE_DIGEST_HPP
#define AE_DIGEST_HPP

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace ae {

// Minimal SHA-256 (FIPS 180-4), used to fingerprint parameter sets.
class Sha256 {
public:
    Sha256() { reset(); }

    void reset();
    void update(const void* data, size_t len);
    // hex digest; finalizes a copy, so the accumulator stays usable
    std::string hex() const;

private:
    void process_block(const uint8_t* p);

    uint32_t state_[8];
    uint64_t total_ = 0;
    uint8_t buf_[64];
    size_t buf_len_ = 0;
};

std::string sha256_hex(const void* data, size_t len);

}  // namespace ae

#endif
