#pragma once

// Finite-sample error bounds for centralized and federated least squares, and
// simulator-side diagnostics that compare the random quantities inside those
// bounds with the values they are bounded by.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fedsysid/errors.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/lti_dynamics.hpp"

namespace fedsysid {

struct CentralizedBound {
  double value = 0.0;
  double sample_threshold = 0.0;  // 8(n+p) + 16 log(4/delta)
  bool sample_ok = false;
};

struct BoundReport {
  double C0 = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double term_noise = 0.0;   // C1 / sqrt(sum_i N_i)
  double term_hetero = 0.0;  // epsilon * C2
  double total = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  double sample_threshold = 0.0;
  bool sample_ok = false;
  std::size_t worst_client = 0;  // client index attaining C2
};

struct DiagnosticsReport {
  double wz_norm = 0.0;
  double wz_bound = 0.0;
  std::vector<double> dz_norms;
  std::vector<double> dz_bounds;
  std::vector<double> gram_lmin;        // lambda_min(Z_i Z_i^T)
  std::vector<double> gram_lmin_bound;  // (N_i / 4) lambda_min(sum_t Sigma_t^(i))
  std::vector<bool> gram_bound_holds;   // Z_i Z_i^T - (N_i / 4) sum_t Sigma_t^(i) is PSD
  double beta = 1.0;                    // condition number of (1/M) sum_i Z_i Z_i^T
  double gram_threshold = 0.0;          // 8(n+p) + 16 log(2MT/delta)
  double wz_threshold = 0.0;            // (4n+2p) log(MT/delta)
  bool thresholds_met = false;

  bool wz_bound_holds() const { return wz_norm <= wz_bound; }
  bool all_gram_bounds_hold() const {
    return std::all_of(gram_bound_holds.begin(), gram_bound_holds.end(), [](bool b) { return b; });
  }
};

/// max over pairs of max(||A_i - A_j||, ||B_i - B_j||).
inline double measure_heterogeneity(std::span<const LtiSystem> systems) {
  double eps = 0.0;
  for (std::size_t i = 0; i < systems.size(); ++i) {
    for (std::size_t j = i + 1; j < systems.size(); ++j) {
      if (systems[i].n() != systems[j].n() || systems[i].p() != systems[j].p()) {
        throw InvalidArgument("measure_heterogeneity: systems have different dimensions");
      }
      eps = std::max({eps, spectral_norm(systems[i].A() - systems[j].A()),
                      spectral_norm(systems[i].B() - systems[j].B())});
    }
  }
  return eps;
}

/// Single-system bound from final samples of N rollouts started at x_0 = 0.
///
/// The covariance is Sigma_{T-1} evaluated with sigma_x forced to 0. The value is
/// returned even when N is below the sample threshold; sample_ok reports that.
inline CentralizedBound centralized_bound(const LtiSystem& system, const NoiseSpec& noise, std::size_t rollouts,
                                          std::size_t horizon, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("centralized_bound: delta must lie in (0, 1)");
  if (rollouts == 0) throw InvalidArgument("centralized_bound: N must be >= 1");
  NoiseSpec zero_start = noise;
  zero_start.sigma_x = 0.0;
  const CovarianceSequence cov = sigma_t_closed_form(system, zero_start, horizon);
  const double lmin = cov.min_eigenvalues.back();
  if (!(lmin > 0.0)) {
    throw IdentifiabilityError("centralized_bound: Sigma_{T-1} is singular with x_0 = 0");
  }
  const double n = static_cast<double>(system.n());
  const double p = static_cast<double>(system.p());
  const double N = static_cast<double>(rollouts);

  CentralizedBound out;
  out.value = 16.0 * noise.sigma_w / std::sqrt(lmin) * std::sqrt((n + 2.0 * p) * std::log(36.0 / delta) / N);
  out.sample_threshold = 8.0 * (n + p) + 16.0 * std::log(4.0 / delta);
  out.sample_ok = N >= out.sample_threshold;
  return out;
}

/// Federated bound from precomputed covariance sequences (one per client, all of length T).
inline BoundReport theorem1_bound_from_covariances(std::span<const CovarianceSequence> covariances,
                                                   std::span<const double> sigma_w,
                                                   std::span<const std::size_t> rollouts, Eigen::Index n,
                                                   Eigen::Index p, double epsilon, double delta) {
  const std::size_t M = covariances.size();
  if (M == 0) throw InvalidArgument("theorem1_bound: at least one client is required");
  if (sigma_w.size() != M || rollouts.size() != M) {
    throw InvalidArgument("theorem1_bound: need one sigma_w and one N_i per client");
  }
  if (!(delta > 0.0 && delta < 1.0 / 3.0)) throw InvalidArgument("theorem1_bound: delta must lie in (0, 1/3)");
  if (!(epsilon >= 0.0)) throw InvalidArgument("theorem1_bound: epsilon must be >= 0");
  const std::size_t T = covariances.front().size();
  for (const auto& c : covariances) {
    if (c.size() != T || T == 0) throw InvalidArgument("theorem1_bound: covariance sequences must share T >= 1");
    if (c[0].rows() != n + p) throw InvalidArgument("theorem1_bound: covariance size must be n + p");
  }

  const double Md = static_cast<double>(M);
  const double Td = static_cast<double>(T);
  const double nd = static_cast<double>(n);
  const double pd = static_cast<double>(p);

  BoundReport r;
  r.delta = delta;
  r.epsilon = epsilon;
  r.C0 = 16.0 * std::sqrt((2.0 * nd + pd) * std::log(9.0 * Md * Td / delta));

  double noise_sum = 0.0;
  double min_lambda = std::numeric_limits<double>::infinity();
  double worst_spread = 0.0;
  double total_rollouts = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    double root_norms = 0.0;
    double norms = 0.0;
    for (const auto& s : covariances[i].sigmas) {
      const double nrm = std::max(0.0, lambda_max(s));
      norms += nrm;
      root_norms += std::sqrt(nrm);
    }
    noise_sum += sigma_w[i] * sigma_w[i] * root_norms * root_norms;
    min_lambda = std::min(min_lambda, lambda_min(covariances[i].sum()));
    // sum over j != i of sqrt((sum_t ||Sigma_t^(i)||)^2), evaluated as written.
    const double spread = (Md - 1.0) * std::sqrt(norms * norms);
    if (spread > worst_spread || i == 0) {
      worst_spread = spread;
      r.worst_client = i;
    }
    total_rollouts += static_cast<double>(rollouts[i]);
  }
  if (!(min_lambda > 0.0)) throw IdentifiabilityError("theorem1_bound: sum_t Sigma_t is singular for some client");

  r.C1 = r.C0 * std::sqrt(noise_sum) / min_lambda;
  r.C2 = 9.0 * worst_spread / min_lambda;
  r.term_noise = r.C1 / std::sqrt(total_rollouts);
  r.term_hetero = epsilon * r.C2;
  r.total = r.term_noise + r.term_hetero;

  r.sample_threshold = std::max(8.0 * (nd + pd) + 16.0 * std::log(2.0 * Md * Td / delta),
                                (4.0 * nd + 2.0 * pd) * std::log(Md * Td / delta));
  r.sample_ok = std::all_of(rollouts.begin(), rollouts.end(),
                            [&](std::size_t N) { return static_cast<double>(N) >= r.sample_threshold; });
  return r;
}

/// Federated bound for clients (A_i, B_i) with noise levels sigma_i and N_i rollouts of length T.
inline BoundReport theorem1_bound(std::span<const LtiSystem> systems, std::span<const NoiseSpec> noises,
                                  std::span<const std::size_t> rollouts, std::size_t horizon, double epsilon,
                                  double delta) {
  if (systems.empty()) throw InvalidArgument("theorem1_bound: at least one system is required");
  if (noises.size() != systems.size() || rollouts.size() != systems.size()) {
    throw InvalidArgument("theorem1_bound: need one NoiseSpec and one N_i per system");
  }
  if (!(delta > 0.0 && delta < 1.0 / 3.0)) throw InvalidArgument("theorem1_bound: delta must lie in (0, 1/3)");
  std::vector<CovarianceSequence> covs;
  std::vector<double> sigma_w;
  covs.reserve(systems.size());
  for (std::size_t i = 0; i < systems.size(); ++i) {
    if (systems[i].n() != systems[0].n() || systems[i].p() != systems[0].p()) {
      throw InvalidArgument("theorem1_bound: systems have different dimensions");
    }
    covs.push_back(sigma_t_closed_form(systems[i], noises[i], horizon));
    sigma_w.push_back(noises[i].sigma_w);
  }
  return theorem1_bound_from_covariances(covs, sigma_w, rollouts, systems[0].n(), systems[0].p(), epsilon, delta);
}

/// Measures ||W Z^T||, ||Delta^(i) Z^T|| and lambda_min(Z_i Z_i^T) on simulated data and
/// pairs each with its high-probability bound.
///
/// Delta^(i) Z^T = sum_{j != i} (Theta_j - Theta_i) Z_j Z_j^T.
inline DiagnosticsReport empirical_diagnostics(std::span<const LtiSystem> systems, std::span<const NoiseSpec> noises,
                                               std::span<const ClientDataset> datasets, double delta) {
  const std::size_t M = systems.size();
  if (M == 0) throw InvalidArgument("empirical_diagnostics: at least one client is required");
  if (noises.size() != M || datasets.size() != M) {
    throw InvalidArgument("empirical_diagnostics: need one NoiseSpec and one dataset per system");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("empirical_diagnostics: delta must lie in (0, 1)");
  for (const auto& ds : datasets) {
    if (!ds.has_noise()) throw MissingNoiseError("empirical_diagnostics: diagnostics need recorded noise W");
  }
  const Eigen::Index n = systems[0].n();
  const Eigen::Index p = systems[0].p();
  const std::size_t T = datasets[0].horizon;
  for (std::size_t i = 0; i < M; ++i) {
    if (systems[i].n() != n || systems[i].p() != p || datasets[i].n() != n || datasets[i].p() != p) {
      throw InvalidArgument("empirical_diagnostics: inconsistent dimensions");
    }
    if (datasets[i].horizon != T) throw InvalidArgument("empirical_diagnostics: datasets must share T");
  }

  const double Md = static_cast<double>(M);
  const double Td = static_cast<double>(T);
  const double nd = static_cast<double>(n);
  const double pd = static_cast<double>(p);
  const Eigen::Index d = n + p;

  std::vector<Matrix> grams(M);
  std::vector<Matrix> thetas(M);
  std::vector<double> sigma_norm_sums(M);
  DiagnosticsReport r;
  r.gram_threshold = 8.0 * (nd + pd) + 16.0 * std::log(2.0 * Md * Td / delta);
  r.wz_threshold = (4.0 * nd + 2.0 * pd) * std::log(Md * Td / delta);
  r.thresholds_met = true;

  Matrix wz = Matrix::Zero(n, d);
  Matrix pooled_gram = Matrix::Zero(d, d);
  const double log_term = std::log(9.0 * Md * Td / delta);
  for (std::size_t i = 0; i < M; ++i) {
    const ClientDataset& ds = datasets[i];
    const double Ni = static_cast<double>(ds.rollouts);
    r.thresholds_met = r.thresholds_met && Ni >= r.gram_threshold && Ni >= r.wz_threshold;

    grams[i] = ds.Z * ds.Z.transpose();
    pooled_gram += grams[i];
    wz.noalias() += ds.W * ds.Z.transpose();
    thetas[i] = systems[i].theta();

    const CovarianceSequence cov = sigma_t_closed_form(systems[i], noises[i], T);
    double root_norms = 0.0;
    double norms = 0.0;
    for (const auto& s : cov.sigmas) {
      const double nrm = std::max(0.0, lambda_max(s));
      norms += nrm;
      root_norms += std::sqrt(nrm);
    }
    sigma_norm_sums[i] = norms;
    r.wz_bound += 4.0 * noises[i].sigma_w * std::sqrt(Ni * (2.0 * nd + pd) * log_term) * root_norms;

    const Matrix sigma_sum = cov.sum();
    const Matrix floor = (Ni / 4.0) * sigma_sum;
    r.gram_lmin.push_back(lambda_min(grams[i]));
    r.gram_lmin_bound.push_back((Ni / 4.0) * lambda_min(sigma_sum));
    const double slack = 1e-12 * std::max(1.0, lambda_max(grams[i]));
    r.gram_bound_holds.push_back(lambda_min(grams[i] - floor) >= -slack);
  }
  r.wz_norm = spectral_norm(wz);

  for (std::size_t i = 0; i < M; ++i) {
    Matrix dz = Matrix::Zero(n, d);
    double bound = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      if (j == i) continue;
      const Matrix diff = thetas[j] - thetas[i];
      dz.noalias() += diff * grams[j];
      bound += 9.0 * static_cast<double>(datasets[j].rollouts) / 4.0 * spectral_norm(diff) * sigma_norm_sums[j];
    }
    r.dz_norms.push_back(spectral_norm(dz));
    r.dz_bounds.push_back(bound);
  }

  const EigenRange range = symmetric_eigen_range(pooled_gram / Md);
  r.beta = range.min > 0.0 ? range.max / range.min : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace fedsysid
