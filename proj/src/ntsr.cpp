#include "neurospike/ntsr.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace neurospike {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

void write_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  if (std::fwrite(b, 1, 4, f) != 4) throw std::runtime_error("ntsr: short write");
}

std::uint32_t read_u32(std::FILE* f, const std::string& path) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("truncated file: " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::size_t read_header(std::FILE* f, const char* magic, const std::string& path,
                        std::vector<int>& shape) {
  char m[4];
  if (std::fread(m, 1, 4, f) != 4 || std::memcmp(m, magic, 4) != 0)
    throw std::runtime_error(path + ": bad magic (expected " + magic + ")");
  const std::uint32_t version = read_u32(f, path);
  if (version != 1)
    throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
  const std::uint32_t ndim = read_u32(f, path);
  if (ndim == 0 || ndim > 8) throw std::runtime_error(path + ": implausible ndim");
  shape.resize(ndim);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint32_t d = read_u32(f, path);
    if (d == 0) throw std::runtime_error(path + ": zero dimension");
    shape[i] = static_cast<int>(d);
    count *= d;
  }
  return count;
}

void write_header(std::FILE* f, const char* magic, const std::vector<int>& shape) {
  if (std::fwrite(magic, 1, 4, f) != 4) throw std::runtime_error("ntsr: short write");
  write_u32(f, 1);
  write_u32(f, static_cast<std::uint32_t>(shape.size()));
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("ntsr: dimensions must be positive");
    write_u32(f, static_cast<std::uint32_t>(d));
  }
}

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace

void write_ntsr(const std::string& path, const std::vector<int>& shape, const float* data) {
  auto f = open_or_throw(path, "wb");
  write_header(f.get(), "NTSR", shape);
  const std::size_t n = numel(shape);
  static_assert(sizeof(float) == 4);
  if (std::fwrite(data, sizeof(float), n, f.get()) != n)
    throw std::runtime_error("ntsr: short write to " + path);
}

void read_ntsr(const std::string& path, std::vector<int>& shape, std::vector<float>& data) {
  auto f = open_or_throw(path, "rb");
  const std::size_t n = read_header(f.get(), "NTSR", path, shape);
  data.resize(n);
  if (std::fread(data.data(), sizeof(float), n, f.get()) != n)
    throw std::runtime_error("truncated payload: " + path);
}

void write_spkt(const std::string& path, const std::vector<int>& shape, const std::uint8_t* data) {
  auto f = open_or_throw(path, "wb");
  write_header(f.get(), "SPKT", shape);
  const std::size_t n = numel(shape);
  if (std::fwrite(data, 1, n, f.get()) != n)
    throw std::runtime_error("spkt: short write to " + path);
}

void read_spkt(const std::string& path, std::vector<int>& shape, std::vector<std::uint8_t>& data) {
  auto f = open_or_throw(path, "rb");
  const std::size_t n = read_header(f.get(), "SPKT", path, shape);
  data.resize(n);
  if (std::fread(data.data(), 1, n, f.get()) != n)
    throw std::runtime_error("truncated payload: " + path);
}

std::string Fnv1a64::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace neurospike
