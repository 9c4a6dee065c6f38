#pragma once

// SPVN weight files: magic "SPVN", version u32 LE, layer count u32 LE, then
// per layer: activation u8 (0=Identity, 1=ReLU, 2=Tanh), in_dim u32,
// out_dim u32, row-major float64 weights, float64 biases. A plain-text
// sidecar (<path>.meta) records model role, config hash and creation seed.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spvt/errors.hpp"
#include "spvt/mlp.hpp"

namespace spvt {

inline constexpr uint32_t kWeightFormatVersion = 1;

struct WeightMeta {
  std::string role;
  std::string config_hash;
  uint64_t seed = 0;
};

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
  // Little-endian host assumed (x86-64); asserted at build time.
  static_assert(std::endian::native == std::endian::little);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw LoadError(LoadError::Kind::kTruncated, "weight file truncated");
  return v;
}

}  // namespace detail

inline void save_weights(const MlpNetwork& net, const std::string& path,
                         const WeightMeta& meta = {}) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot open for writing: " + path);
  os.write("SPVN", 4);
  detail::write_le<uint32_t>(os, kWeightFormatVersion);
  detail::write_le<uint32_t>(os, static_cast<uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    detail::write_le<uint8_t>(os, static_cast<uint8_t>(l.act));
    detail::write_le<uint32_t>(os, static_cast<uint32_t>(l.in_dim()));
    detail::write_le<uint32_t>(os, static_cast<uint32_t>(l.out_dim()));
    os.write(reinterpret_cast<const char*>(l.w.data().data()),
             static_cast<std::streamsize>(l.w.numel() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(l.b.data().data()),
             static_cast<std::streamsize>(l.b.numel() * sizeof(double)));
  }
  if (!os) throw LoadError(LoadError::Kind::kIo, "write failed: " + path);
  os.close();

  std::ofstream ms(path + ".meta", std::ios::trunc);
  ms << "role=" << meta.role << "\n"
     << "config_hash=" << meta.config_hash << "\n"
     << "seed=" << meta.seed << "\n";
}

inline MlpNetwork load_weights(const std::string& path, WeightMeta* meta = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError(LoadError::Kind::kIo, "cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SPVN", 4) != 0)
    throw LoadError(LoadError::Kind::kBadMagic, "bad magic in " + path);
  uint32_t version = detail::read_le<uint32_t>(is);
  if (version != kWeightFormatVersion)
    throw LoadError(LoadError::Kind::kBadVersion,
                    "unsupported weight format version " + std::to_string(version));
  uint32_t layer_count = detail::read_le<uint32_t>(is);
  if (layer_count == 0 || layer_count > 1024)
    throw LoadError(LoadError::Kind::kCorrupt, "implausible layer count");
  std::vector<Layer> layers;
  for (uint32_t l = 0; l < layer_count; ++l) {
    uint8_t act = detail::read_le<uint8_t>(is);
    if (act > 2) throw LoadError(LoadError::Kind::kCorrupt, "unknown activation code");
    uint32_t in = detail::read_le<uint32_t>(is);
    uint32_t out = detail::read_le<uint32_t>(is);
    if (in == 0 || out == 0 || in > 1u << 20 || out > 1u << 20)
      throw LoadError(LoadError::Kind::kCorrupt, "implausible layer dimensions");
    std::vector<double> w(static_cast<std::size_t>(in) * out);
    is.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!is) throw LoadError(LoadError::Kind::kTruncated, "weight file truncated");
    std::vector<double> b(out);
    is.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(b.size() * sizeof(double)));
    if (!is) throw LoadError(LoadError::Kind::kTruncated, "weight file truncated");
    layers.push_back(Layer{Tensor::constant(std::move(w), {out, in}),
                           Tensor::constant(std::move(b), {out}),
                           static_cast<Activation>(act)});
  }
  if (meta) {
    *meta = WeightMeta{};
    std::ifstream ms(path + ".meta");
    std::string line;
    while (std::getline(ms, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq), val = line.substr(eq + 1);
      if (key == "role") meta->role = val;
      else if (key == "config_hash") meta->config_hash = val;
      else if (key == "seed") meta->seed = std::strtoull(val.c_str(), nullptr, 10);
    }
  }
  return MlpNetwork(std::move(layers));
}

// FNV-1a over a file's bytes, as a 16-hex-digit string. Used for content
// addressing of model files inside certificates.
inline std::string hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError(LoadError::Kind::kIo, "cannot open: " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!is) break;
  }
  std::ostringstream os;
  os << std::hex;
  for (int i = 15; i >= 0; --i) os << "0123456789abcdef"[(h >> (i * 4)) & 0xf];
  return os.str();
}

inline std::string hash_bytes(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  for (int i = 15; i >= 0; --i) os << "0123456789abcdef"[(h >> (i * 4)) & 0xf];
  return os.str();
}

}  // namespace spvt
