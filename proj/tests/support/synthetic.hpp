#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mug/dataset.hpp"
#include "mug/features.hpp"

namespace mugtest {

/// Three-modality classification data written to disk. The label is
/// (tab cluster + txt cluster) mod clusters, so neither modality alone carries
/// any label information; images show the label colour with probability
/// `image_hint` and a random palette colour otherwise.
struct SyntheticSpec {
  std::size_t samples = 300;
  std::size_t clusters = 3;
  double tab_noise = 0.5;
  double text_signal = 0.75;  ///< chance each word comes from the cluster vocabulary
  std::size_t words_per_text = 12;
  double image_hint = 0.25;
  int image_side = 16;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  std::filesystem::path table;      ///< CSV with id, split, f0..f3, shade, description, image, label
  std::filesystem::path image_dir;  ///< base for the image column
  mug::data::FieldSchema schema;
  mug::data::LoadOptions options;   ///< id and split columns
};

SyntheticData write_synthetic(const std::filesystem::path& dir, const SyntheticSpec& spec);

/// Schema as a key/value file usable with `--schema`.
void write_schema_file(const std::filesystem::path& path, const SyntheticData& d);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace mugtest
