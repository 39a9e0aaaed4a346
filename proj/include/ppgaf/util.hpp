// ============================================================================
// Small shared utilities: binary file slurp/write, little-endian encoding,
// SHA-256 for run manifests and reproducibility checks.
// ============================================================================

#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace ppgaf {

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const void* data, size_t size);

std::string sha256_hex(const void* data, size_t size);
std::string sha256_hex(const std::vector<uint8_t>& bytes);
std::string sha256_file_hex(const std::string& path);

inline void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

inline uint32_t get_u32_le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

// f32 payloads are written little-endian; on the (ubiquitous) little-endian
// hosts this is a plain memcpy.
void append_f32_le(std::vector<uint8_t>& out, const float* data, size_t n);
void read_f32_le(const uint8_t* p, size_t n, float* out);

std::string tool_version();

}  // namespace ppgaf
