#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mug/tensor.hpp"

namespace mug::linalg {

/// Affine projection x ↦ (x − mean)·componentsᵀ. `mean` is 1×d (all zeros for
/// an uncentred SVD basis), `components` is k×d with orthonormal rows.
struct LinearProjection {
  Tensor mean;
  Tensor components;

  std::size_t input_dim() const noexcept { return components.cols(); }
  std::size_t output_dim() const noexcept { return components.rows(); }

  Tensor transform(const Tensor& x) const;
};

/// Sparse row as (column, value) pairs with strictly increasing columns.
using SparseRow = std::vector<std::pair<std::size_t, double>>;

/// Top-k right singular vectors of an n×d sparse matrix via a seeded
/// randomized range finder with power iterations. When the sketch width
/// reaches min(n, d) the range is captured exactly and so is the result.
/// Each component's sign is fixed so its largest-magnitude entry is positive.
LinearProjection truncated_svd(std::span<const SparseRow> rows, std::size_t cols, std::size_t k,
                               std::uint64_t seed);

/// Principal axes of the rows of `data` (mean-centred), same algorithm and
/// sign convention as truncated_svd.
LinearProjection pca(const Tensor& data, std::size_t k, std::uint64_t seed);

}  // namespace mug::linalg
