#include "mug/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "binary_io.hpp"
#include "mug/error.hpp"

namespace mug::nn {

namespace {
constexpr char kMagic[4] = {'M', 'U', 'G', 'P'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
}  // namespace

void write_checkpoint(std::ostream& out, std::span<const NamedTensor> tensors) {
  out.write(kMagic, 4);
  binary::put_u32(out, kCheckpointVersion);
  binary::put_u64(out, tensors.size());
  for (const auto& t : tensors) {
    binary::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    binary::put_u32(out, 2);
    binary::put_u64(out, t.value.rows());
    binary::put_u64(out, t.value.cols());
    for (double v : t.value.values()) binary::put_f64(out, v);
  }
  if (!out) throw Error("checkpoint write failed");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  char magic[4];
  binary::read_exact(in, magic, 4, "checkpoint magic");
  if (!std::equal(magic, magic + 4, kMagic)) throw ParseError("not a checkpoint file (bad magic)");
  const auto version = binary::get_u32(in, "checkpoint version");
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto count = binary::get_u64(in, "tensor count");
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = binary::get_u32(in, "name length");
    std::string name(len, '\0');
    binary::read_exact(in, name.data(), len, "tensor name");
    const auto rank = binary::get_u32(in, "tensor rank");
    if (rank != 2) throw ParseError("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    const auto rows = binary::get_u64(in, "tensor rows");
    const auto cols = binary::get_u64(in, "tensor cols");
    if (cols != 0 && rows > kMaxElements / cols) throw ParseError("tensor '" + name + "' is implausibly large");
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = binary::get_f64(in, "tensor values");
    out.push_back({std::move(name), Tensor(rows, cols, std::move(values))});
  }
  return out;
}

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_checkpoint(out, tensors);
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace mug::nn
