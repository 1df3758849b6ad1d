#include "mug/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mug/error.hpp"
#include "mug/rng.hpp"

namespace mug::nn {

GradCheckResult finite_difference_check(const std::function<double()>& loss,
                                        std::span<Tensor* const> params,
                                        std::span<const Tensor> grads,
                                        const GradCheckOptions& options) {
  if (params.size() != grads.size()) throw ContractError("gradient check: one gradient per parameter");
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->same_shape(grads[p])) throw ContractError("gradient check: shape mismatch");
    for (std::size_t k = 0; k < params[p]->size(); ++k) coords.emplace_back(p, k);
  }
  if (options.max_coordinates > 0) {
    const auto keep = std::max<std::size_t>(64, options.max_coordinates);
    if (coords.size() > keep) {
      Rng rng(options.seed);
      rng.shuffle(coords.begin(), coords.end());
      coords.resize(keep);
      std::sort(coords.begin(), coords.end());
    }
  }

  GradCheckResult result;
  const double eps = options.epsilon;
  for (auto [p, k] : coords) {
    double& theta = (*params[p])[k];
    const double saved = theta;
    theta = saved + eps;
    const double up = loss();
    theta = saved - eps;
    const double down = loss();
    theta = saved;
    const double fd = (up - down) / (2.0 * eps);
    const double g = grads[p][k];
    const double err = std::abs(fd - g) / std::max({1.0, std::abs(fd), std::abs(g)});
    if (!std::isfinite(err)) throw NumericError("gradient check produced a non-finite difference");
    if (err > result.max_relative_error || result.coordinates_checked == 0) {
      result.max_relative_error = err;
      result.worst_tensor = p;
      result.worst_index = k;
    }
    ++result.coordinates_checked;
  }
  return result;
}

}  // namespace mug::nn
