#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "mug/tensor.hpp"

namespace mug::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// 0 checks every coordinate; otherwise at most this many (never fewer
  /// than 64) sampled uniformly without replacement.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

/// Compares `grads` with central differences of `loss`, which must read the
/// current contents of `params` and be deterministic. Each probed entry is
/// restored afterwards. Relative error is |fd − g| / max(1, |fd|, |g|).
GradCheckResult finite_difference_check(const std::function<double()>& loss,
                                        std::span<Tensor* const> params,
                                        std::span<const Tensor> grads,
                                        const GradCheckOptions& options = {});

}  // namespace mug::nn
