#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace neurospike {

// Binary tensor container:
//   magic "NTSR" | u32 version=1 | u32 ndim | ndim x u32 dims | f32 payload
// All integers and floats little-endian, payload row-major. The "SPKT"
// variant carries a u8 payload and is used for spike-train datasets.

void write_ntsr(const std::string& path, const std::vector<int>& shape, const float* data);
void read_ntsr(const std::string& path, std::vector<int>& shape, std::vector<float>& data);

void write_spkt(const std::string& path, const std::vector<int>& shape, const std::uint8_t* data);
void read_spkt(const std::string& path, std::vector<int>& shape, std::vector<std::uint8_t>& data);

// FNV-1a over a byte stream, used for dataset provenance hashes.
struct Fnv1a64 {
  std::uint64_t h = 0xcbf29ce484222325ull;
  void update(const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  }
  std::string hex() const;
};

}  // namespace neurospike
