#include "mug/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "mug/error.hpp"
#include "mug/rng.hpp"

namespace mug::linalg {

namespace {

constexpr std::size_t kOversample = 10;
constexpr int kPowerIterations = 7;

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

// `Op` must be an Eigen expression supporting op * dense and op.transpose() * dense.
template <typename Op>
Eigen::MatrixXd top_right_singular_vectors(const Op& a, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(a.rows());
  const auto d = static_cast<std::size_t>(a.cols());
  const std::size_t full = std::min(n, d);
  k = std::min(k, full);
  if (k == 0) return Eigen::MatrixXd(static_cast<Eigen::Index>(d), 0);
  const std::size_t width = std::min(k + kOversample, full);

  Rng rng(seed);
  Eigen::MatrixXd omega(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(width));
  for (Eigen::Index j = 0; j < omega.cols(); ++j)
    for (Eigen::Index i = 0; i < omega.rows(); ++i) omega(i, j) = rng.normal();

  Eigen::MatrixXd q = orthonormal_basis(a * omega);
  for (int it = 0; it < kPowerIterations; ++it) {
    Eigen::MatrixXd z = orthonormal_basis(a.transpose() * q);
    q = orthonormal_basis(a * z);
  }
  const Eigen::MatrixXd b = (a.transpose() * q).transpose();  // width × d
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
  Eigen::MatrixXd v = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));

  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index arg = 0;
    v.col(c).cwiseAbs().maxCoeff(&arg);
    if (v(arg, c) < 0) v.col(c) *= -1.0;
  }
  return v;
}

Tensor to_components(const Eigen::MatrixXd& v) {
  Tensor comps(static_cast<std::size_t>(v.cols()), static_cast<std::size_t>(v.rows()));
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      comps(static_cast<std::size_t>(c), static_cast<std::size_t>(i)) = v(i, c);
  return comps;
}

}  // namespace

Tensor LinearProjection::transform(const Tensor& x) const {
  if (x.cols() != input_dim()) throw ContractError("LinearProjection: input width mismatch");
  Tensor centred = x;
  if (!mean.empty()) {
    for (std::size_t r = 0; r < centred.rows(); ++r)
      for (std::size_t c = 0; c < centred.cols(); ++c) centred(r, c) -= mean(0, c);
  }
  return matmul_nt(centred, components);
}

LinearProjection truncated_svd(std::span<const SparseRow> rows, std::size_t cols, std::size_t k,
                               std::uint64_t seed) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& [c, v] : rows[r]) {
      if (c >= cols) throw ContractError("truncated_svd: column index out of range");
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
    }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(static_cast<Eigen::Index>(rows.size()),
                                                 static_cast<Eigen::Index>(cols));
  a.setFromTriplets(triplets.begin(), triplets.end());

  LinearProjection proj;
  proj.mean = Tensor(1, cols);
  proj.components = to_components(top_right_singular_vectors(a, k, seed));
  if (proj.components.rows() == 0) proj.components = Tensor(0, cols);
  return proj;
}

LinearProjection pca(const Tensor& data, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto d = static_cast<Eigen::Index>(data.cols());
  Eigen::MatrixXd a(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      a(i, j) = data(static_cast<std::size_t>(i), static_cast<std::size_t>(j));

  LinearProjection proj;
  proj.mean = Tensor(1, data.cols());
  if (n > 0) {
    const Eigen::RowVectorXd mu = a.colwise().mean();
    a.rowwise() -= mu;
    for (Eigen::Index j = 0; j < d; ++j) proj.mean(0, static_cast<std::size_t>(j)) = mu(j);
  }
  proj.components = to_components(top_right_singular_vectors(a, k, seed));
  if (proj.components.rows() == 0) proj.components = Tensor(0, data.cols());
  return proj;
}

}  // namespace mug::linalg
