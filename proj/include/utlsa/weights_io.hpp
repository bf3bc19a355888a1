#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "utlsa/model.hpp"
#include "utlsa/signal.hpp"

// "UTLS" tensor container:
//   magic "UTLS" | u32 version (1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 dims | float32 payload
// All integers and floats little-endian, payload row-major.
namespace utlsa {

inline constexpr std::uint32_t kContainerVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
  bool operator==(const NamedTensor&) const = default;
};

std::string encode_container(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_container(const std::string& bytes, const std::string& origin = "<memory>");

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_container(const std::filesystem::path& path);

void save_weights(const ModelParams& params, const std::filesystem::path& path);
// Every canonical tensor must be present with its exact shape; extra names fail.
ModelParams load_weights(const std::filesystem::path& path);

// Seeds are stored as float32 and must be exactly representable (< 2^24).
inline constexpr std::uint64_t kMaxStoredSeed = 1ULL << 24;

struct DeltaFile {
  Waveform delta;
  float epsilon = 0.0f;
  std::uint64_t seed = 0;
};

void save_delta(const std::filesystem::path& path, const DeltaFile& file);
DeltaFile load_delta(const std::filesystem::path& path);

}  // namespace utlsa
