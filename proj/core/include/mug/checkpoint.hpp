#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mug/tensor.hpp"

namespace mug::nn {

struct NamedTensor {
  std::string name;
  Tensor value;
  bool operator==(const NamedTensor&) const = default;
};

/// Container layout, all integers little-endian:
///   "MUGP" · u32 version · u64 count ·
///   per tensor: u32 name length · name bytes · u32 rank (2) · u64 rows ·
///   u64 cols · rows·cols f64 values row-major.
/// Round trips are bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);
void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

}  // namespace mug::nn
