#pragma once

// SPVD state-image datasets: header "SPVD", record count u64 LE, then per
// record d, theta, brightness, lane_width, texture_phase and 128 pixels as
// float64 LE. A CSV debug export mirrors the same rows.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "spvt/errors.hpp"
#include "spvt/laneworld.hpp"
#include "spvt/serialize.hpp"

namespace spvt {

struct Sample {
  LaneState s;
  EnvLatent w;
  Image o;
};

inline std::vector<Sample> gen_dataset(std::size_t n, uint64_t seed,
                                       const InitialRanges& ranges = {}) {
  Rng state_rng(seed, "dataset-state");
  Rng env_rng(seed, "dataset-env");
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample rec;
    rec.s = sample_initial(state_rng, ranges);
    rec.w = sample_env(env_rng);
    rec.o = render(rec.s, rec.w);
    out.push_back(rec);
  }
  return out;
}

inline void write_spvd(const std::vector<Sample>& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot open for writing: " + path);
  os.write("SPVD", 4);
  detail::write_le<uint64_t>(os, data.size());
  for (const auto& rec : data) {
    detail::write_le<double>(os, rec.s.d);
    detail::write_le<double>(os, rec.s.theta);
    detail::write_le<double>(os, rec.w.brightness);
    detail::write_le<double>(os, rec.w.lane_width);
    detail::write_le<double>(os, rec.w.texture_phase);
    os.write(reinterpret_cast<const char*>(rec.o.data()),
             static_cast<std::streamsize>(rec.o.size() * sizeof(double)));
  }
  if (!os) throw LoadError(LoadError::Kind::kIo, "write failed: " + path);
}

inline std::vector<Sample> read_spvd(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError(LoadError::Kind::kIo, "cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SPVD", 4) != 0)
    throw LoadError(LoadError::Kind::kBadMagic, "bad magic in " + path);
  uint64_t n = detail::read_le<uint64_t>(is);
  std::vector<Sample> out;
  out.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    Sample rec;
    rec.s.d = detail::read_le<double>(is);
    rec.s.theta = detail::read_le<double>(is);
    rec.w.brightness = detail::read_le<double>(is);
    rec.w.lane_width = detail::read_le<double>(is);
    rec.w.texture_phase = detail::read_le<double>(is);
    is.read(reinterpret_cast<char*>(rec.o.data()),
            static_cast<std::streamsize>(rec.o.size() * sizeof(double)));
    if (!is) throw LoadError(LoadError::Kind::kTruncated, "dataset truncated");
    out.push_back(rec);
  }
  return out;
}

inline void write_dataset_csv(const std::vector<Sample>& data, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot open for writing: " + path);
  os << "d,theta,brightness,lane_width,texture_phase";
  for (int i = 0; i < kImagePixels; ++i) os << ",p" << i;
  os << "\n";
  os.precision(17);
  for (const auto& rec : data) {
    os << rec.s.d << "," << rec.s.theta << "," << rec.w.brightness << "," << rec.w.lane_width
       << "," << rec.w.texture_phase;
    for (double px : rec.o) os << "," << px;
    os << "\n";
  }
}

}  // namespace spvt
