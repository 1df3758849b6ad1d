#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "mug/features.hpp"
#include "mug/graph.hpp"
#include "mug/model.hpp"
#include "mug/rng.hpp"

namespace mugtest {

/// Standard-normal blocks with widths `dims` (tab, txt, img) and ids r0..r{n-1}.
mug::data::ModalityFeatures random_features(std::size_t n, std::array<std::size_t, 3> dims, mug::Rng& rng);

/// Erdős–Rényi layers with edge probability `p`, drawn independently.
mug::graph::MultiplexGraph random_multiplex(std::size_t n, double p, mug::Rng& rng);

/// A small but complete model: two attention layers, two heads.
mug::model::ModelConfig small_model(std::array<std::size_t, 3> dims, std::size_t classes);

}  // namespace mugtest

namespace mugtest {

/// Writes `content` verbatim, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace mugtest
