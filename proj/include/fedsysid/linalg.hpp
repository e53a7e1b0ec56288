#pragma once

// Small dense helpers shared by the estimators and the bound evaluators.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsysid/errors.hpp"

namespace fedsysid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative eigenvalue floor below which a Gram matrix counts as singular.
inline constexpr double kSingularRelativeFloor = 1e-10;

/// Largest singular value.
inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

struct EigenRange {
  double min = 0.0;
  double max = 0.0;
};

/// Extreme eigenvalues of a symmetric matrix (only the lower triangle is read).
inline EigenRange symmetric_eigen_range(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

inline double lambda_min(const Matrix& s) { return symmetric_eigen_range(s).min; }
inline double lambda_max(const Matrix& s) { return symmetric_eigen_range(s).max; }

/// Spectral norm of the principal square root of a PSD matrix, i.e. sqrt(lambda_max).
inline double sqrt_spectral_norm(const Matrix& s) { return std::sqrt(std::max(0.0, lambda_max(s))); }

/// Solves Theta * gram = cross for Theta, with gram symmetric positive definite.
///
/// Throws SingularDataError when lambda_min(gram) < 1e-10 * lambda_max(gram).
inline Matrix solve_normal_equations(const Matrix& cross, const Matrix& gram, const std::string& context = "") {
  const EigenRange range = symmetric_eigen_range(gram);
  if (!(range.max > 0.0) || range.min < kSingularRelativeFloor * range.max) {
    std::string msg = "singular data: lambda_min(Z Z^T) = " + std::to_string(range.min) +
                      " is below 1e-10 * lambda_max = " + std::to_string(range.max);
    if (!context.empty()) msg = context + ": " + msg;
    throw SingularDataError(msg, range.min, range.max);
  }
  Eigen::LLT<Matrix> llt(gram);
  // gram is symmetric, so Theta^T = gram^{-1} cross^T.
  return llt.solve(cross.transpose()).transpose();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace fedsysid
