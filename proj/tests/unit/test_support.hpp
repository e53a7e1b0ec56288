#pragma once

#include <Eigen/Dense>

#include "fedsysid/fedsysid.hpp"

namespace fedsysid::testing {

inline LtiSystem nominal_system() {
  return LtiSystem(experiments::defaults::nominal_a(), experiments::defaults::nominal_b());
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  }
  return m;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double denom = std::max(1.0, b.norm());
  return (a - b).norm() / denom;
}

// Horizontal concatenation of matrices with equal row counts.
inline Matrix hstack(const std::vector<Matrix>& parts) {
  Eigen::Index cols = 0;
  for (const auto& p : parts) cols += p.cols();
  Matrix out(parts.front().rows(), cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p;
    c += p.cols();
  }
  return out;
}

inline std::vector<ClientDataset> nominal_clients(std::size_t M, std::size_t N, std::uint64_t seed,
                                                  double epsilon = 0.01) {
  const Rng root(seed);
  const auto ens = experiments::make_ensemble(experiments::defaults::nominal_a(), experiments::defaults::nominal_b(),
                                              experiments::defaults::pattern_v(), experiments::defaults::pattern_u(),
                                              epsilon, M, root.fork(Stream::kEnsemble));
  std::vector<ClientDataset> out;
  for (std::size_t i = 0; i < M; ++i) {
    out.push_back(simulate_client_dataset(ens.systems[i], NoiseSpec{}, N, 5, root.fork(Stream::kData).fork(i), i));
  }
  return out;
}

}  // namespace fedsysid::testing
