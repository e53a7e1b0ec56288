#pragma once

// Least-squares estimators of Theta = [A B] and the spectral-norm error metric.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedsysid/errors.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/lti_dynamics.hpp"

namespace fedsysid {

/// An estimate Theta_hat = [A_hat B_hat], partitioned at column n.
class ThetaEstimate {
 public:
  ThetaEstimate(Matrix theta, Eigen::Index n) : theta_(std::move(theta)), n_(n) {
    if (n_ < 1 || theta_.rows() != n_ || theta_.cols() <= n_) {
      throw InvalidArgument("ThetaEstimate: theta must be n x (n + p) with p >= 1");
    }
  }

  const Matrix& theta() const noexcept { return theta_; }
  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index p() const noexcept { return theta_.cols() - n_; }
  Matrix A_hat() const { return theta_.leftCols(n_); }
  Matrix B_hat() const { return theta_.rightCols(p()); }

 private:
  Matrix theta_;
  Eigen::Index n_;
};

struct EstimationError {
  double err_a = 0.0;
  double err_b = 0.0;
  double err_max = 0.0;
};

/// Theta_hat = X Z^T (Z Z^T)^{-1}, via Cholesky of the normal equations.
inline ThetaEstimate ls_estimate(const Matrix& X, const Matrix& Z) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = Z.rows();
  if (n < 1 || d <= n) throw InvalidArgument("ls_estimate: Z must have n + p rows with p >= 1");
  if (X.cols() != Z.cols()) throw InvalidArgument("ls_estimate: X and Z column counts differ");
  if (Z.cols() < d) {
    throw InvalidArgument("ls_estimate: need at least n + p = " + std::to_string(d) + " columns, got " +
                          std::to_string(Z.cols()));
  }
  Matrix gram = Matrix::Zero(d, d);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(Z);
  gram = gram.selfadjointView<Eigen::Lower>();
  const Matrix cross = X * Z.transpose();
  return ThetaEstimate(solve_normal_equations(cross, gram, "ls_estimate"), n);
}

/// Minimizer of sum_i ||X_i - Theta Z_i||_F^2 over all clients' data.
inline ThetaEstimate pooled_ls(std::span<const ClientDataset> datasets) {
  if (datasets.empty()) throw InvalidArgument("pooled_ls: at least one dataset is required");
  const Eigen::Index n = datasets.front().n();
  const Eigen::Index d = datasets.front().Z.rows();
  Matrix gram = Matrix::Zero(d, d);
  Matrix cross = Matrix::Zero(n, d);
  Eigen::Index columns = 0;
  for (const auto& ds : datasets) {
    if (ds.n() != n || ds.Z.rows() != d || ds.X.cols() != ds.Z.cols()) {
      throw InvalidArgument("pooled_ls: datasets have inconsistent dimensions");
    }
    gram.selfadjointView<Eigen::Lower>().rankUpdate(ds.Z);
    cross.noalias() += ds.X * ds.Z.transpose();
    columns += ds.Z.cols();
  }
  if (columns < d) {
    throw InvalidArgument("pooled_ls: need at least n + p = " + std::to_string(d) + " columns in total, got " +
                          std::to_string(columns));
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  return ThetaEstimate(solve_normal_equations(cross, gram, "pooled_ls"), n);
}

/// (1/M) sum_i ls_estimate(X_i, Z_i).
inline ThetaEstimate avg_of_local_ls(std::span<const ClientDataset> datasets) {
  if (datasets.empty()) throw InvalidArgument("avg_of_local_ls: at least one dataset is required");
  const Eigen::Index n = datasets.front().n();
  Matrix sum = Matrix::Zero(n, datasets.front().Z.rows());
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    try {
      const ThetaEstimate local = ls_estimate(datasets[i].X, datasets[i].Z);
      if (local.theta().rows() != sum.rows() || local.theta().cols() != sum.cols()) {
        throw InvalidArgument("avg_of_local_ls: datasets have inconsistent dimensions");
      }
      sum += local.theta();
    } catch (const SingularDataError& e) {
      throw SingularDataError("avg_of_local_ls: client " + std::to_string(i) + ": " + e.what(), e.lambda_min(),
                              e.lambda_max());
    }
  }
  return ThetaEstimate(sum / static_cast<double>(datasets.size()), n);
}

/// Spectral-norm errors of the A and B blocks against a true system.
inline EstimationError estimation_error(const ThetaEstimate& estimate, const LtiSystem& truth) {
  if (estimate.n() != truth.n() || estimate.p() != truth.p()) {
    throw InvalidArgument("estimation_error: estimate and system dimensions differ");
  }
  EstimationError e;
  e.err_a = spectral_norm(estimate.A_hat() - truth.A());
  e.err_b = spectral_norm(estimate.B_hat() - truth.B());
  e.err_max = std::max(e.err_a, e.err_b);
  return e;
}

}  // namespace fedsysid
