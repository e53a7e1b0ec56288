#pragma once

// Linear time-invariant systems x_{t+1} = A x_t + B u_t + w_t, Gaussian
// rollouts, batch data matrices and the closed-form covariance of z_t = [x_t; u_t].

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fedsysid/errors.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/rng.hpp"

namespace fedsysid {

/// Ground-truth dynamics (A, B) of one client.
class LtiSystem {
 public:
  LtiSystem(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() < 1 || a_.rows() != a_.cols()) {
      throw InvalidArgument("LtiSystem: A must be square with n >= 1, got " + std::to_string(a_.rows()) + "x" +
                            std::to_string(a_.cols()));
    }
    if (b_.rows() != a_.rows() || b_.cols() < 1) {
      throw InvalidArgument("LtiSystem: B must be n x p with p >= 1, got " + std::to_string(b_.rows()) + "x" +
                            std::to_string(b_.cols()));
    }
    if (!a_.allFinite() || !b_.allFinite()) throw InvalidArgument("LtiSystem: non-finite entry in A or B");
  }

  const Matrix& A() const noexcept { return a_; }
  const Matrix& B() const noexcept { return b_; }
  Eigen::Index n() const noexcept { return a_.rows(); }
  Eigen::Index p() const noexcept { return b_.cols(); }

  /// Theta = [A B], n x (n + p).
  Matrix theta() const {
    Matrix t(n(), n() + p());
    t << a_, b_;
    return t;
  }

 private:
  Matrix a_;
  Matrix b_;
};

/// Standard deviations of the initial state, the input and the process noise.
struct NoiseSpec {
  double sigma_x = 1.0;
  double sigma_u = 1.0;
  double sigma_w = 1.0;

  void validate() const {
    if (!(sigma_x >= 0.0) || !(sigma_u >= 0.0) || !(sigma_w >= 0.0) || !std::isfinite(sigma_x) ||
        !std::isfinite(sigma_u) || !std::isfinite(sigma_w)) {
      throw InvalidArgument("NoiseSpec: standard deviations must be finite and >= 0");
    }
  }
  bool degenerate() const noexcept { return sigma_x == 0.0 && sigma_u == 0.0 && sigma_w == 0.0; }
};

/// One trajectory x_0..x_T driven by u_0..u_{T-1} and w_0..w_{T-1}; one column per time step.
struct Rollout {
  Matrix states;  // n x (T + 1)
  Matrix inputs;  // p x T
  Matrix noises;  // n x T

  std::size_t horizon() const noexcept { return static_cast<std::size_t>(inputs.cols()); }
};

/// Batch matrices of a client, X = Theta Z + W, columns in forward time order
/// within each rollout and rollouts stacked left to right.
struct ClientDataset {
  Matrix X;  // n x (N T)
  Matrix Z;  // (n + p) x (N T)
  Matrix W;  // n x (N T), or empty when the noise was not recorded
  std::size_t rollouts = 0;
  std::size_t horizon = 0;
  std::size_t system_id = 0;

  Eigen::Index n() const noexcept { return X.rows(); }
  Eigen::Index p() const noexcept { return Z.rows() - X.rows(); }
  Eigen::Index columns() const noexcept { return Z.cols(); }
  bool has_noise() const noexcept { return W.size() != 0; }
};

/// Covariances Sigma_0..Sigma_{T-1} of z_t, with their smallest eigenvalues.
struct CovarianceSequence {
  std::vector<Matrix> sigmas;
  std::vector<double> min_eigenvalues;

  std::size_t size() const noexcept { return sigmas.size(); }
  const Matrix& operator[](std::size_t t) const { return sigmas[t]; }

  /// sum_t Sigma_t.
  Matrix sum() const {
    Matrix s = Matrix::Zero(sigmas.front().rows(), sigmas.front().cols());
    for (const auto& m : sigmas) s += m;
    return s;
  }
};

namespace detail {

inline void fill_normal(Rng& rng, double sigma, Eigen::Ref<Vector> out) {
  for (Eigen::Index k = 0; k < out.size(); ++k) out(k) = sigma * rng.normal();
}

}  // namespace detail

/// Simulates one rollout of length T.
///
/// Draw order is x_0, then for each t: u_t followed by w_t. Zero standard
/// deviations still consume draws so streams stay aligned across settings.
inline Rollout simulate_rollout(const LtiSystem& system, const NoiseSpec& noise, std::size_t horizon, Rng& rng) {
  if (horizon == 0) throw InvalidArgument("simulate_rollout: horizon T must be >= 1");
  noise.validate();
  const auto n = system.n();
  const auto p = system.p();
  const auto T = static_cast<Eigen::Index>(horizon);

  Rollout r{Matrix(n, T + 1), Matrix(p, T), Matrix(n, T)};
  detail::fill_normal(rng, noise.sigma_x, r.states.col(0));
  for (Eigen::Index t = 0; t < T; ++t) {
    detail::fill_normal(rng, noise.sigma_u, r.inputs.col(t));
    detail::fill_normal(rng, noise.sigma_w, r.noises.col(t));
    r.states.col(t + 1).noalias() = system.A() * r.states.col(t);
    r.states.col(t + 1).noalias() += system.B() * r.inputs.col(t);
    r.states.col(t + 1) += r.noises.col(t);
  }
  return r;
}

/// Simulates N_i rollouts and stacks them. Rollout l draws from rng.fork(l).
inline ClientDataset simulate_client_dataset(const LtiSystem& system, const NoiseSpec& noise, std::size_t rollouts,
                                             std::size_t horizon, const Rng& rng, std::size_t system_id = 0) {
  if (rollouts == 0) throw InvalidArgument("simulate_client_dataset: rollout count N_i must be >= 1");
  if (horizon == 0) throw InvalidArgument("simulate_client_dataset: horizon T must be >= 1");
  const auto n = system.n();
  const auto p = system.p();
  const auto T = static_cast<Eigen::Index>(horizon);
  const auto m = static_cast<Eigen::Index>(rollouts) * T;

  ClientDataset d{Matrix(n, m), Matrix(n + p, m), Matrix(n, m), rollouts, horizon, system_id};
  for (std::size_t l = 0; l < rollouts; ++l) {
    Rng stream = rng.fork(l);
    const Rollout r = simulate_rollout(system, noise, horizon, stream);
    const Eigen::Index c0 = static_cast<Eigen::Index>(l) * T;
    d.X.middleCols(c0, T) = r.states.rightCols(T);
    d.Z.block(0, c0, n, T) = r.states.leftCols(T);
    d.Z.block(n, c0, p, T) = r.inputs;
    d.W.middleCols(c0, T) = r.noises;
  }
  return d;
}

/// G_t = [A^{t-1}B ... AB B] (n x tp) and F_t = [A^{t-1} ... A I] (n x tn).
inline std::pair<Matrix, Matrix> markov_blocks(const LtiSystem& system, std::size_t t) {
  if (t == 0) throw InvalidArgument("markov_blocks: t must be >= 1");
  const auto n = system.n();
  const auto p = system.p();
  const auto steps = static_cast<Eigen::Index>(t);
  Matrix G(n, steps * p);
  Matrix F(n, steps * n);
  // Fill from the right: block k (from the right, 0-based) is A^k B / A^k.
  Matrix power = Matrix::Identity(n, n);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index block = steps - 1 - k;
    F.middleCols(block * n, n) = power;
    G.middleCols(block * p, p).noalias() = power * system.B();
    power = (system.A() * power).eval();
  }
  return {std::move(G), std::move(F)};
}

/// Closed-form Sigma_t for t = 0..T-1:
///   Sigma_0 = blkdiag(sx^2 I_n, su^2 I_p),
///   Sigma_t = blkdiag(su^2 G_t G_t^T + sw^2 F_t F_t^T + sx^2 A^t A^t^T, su^2 I_p).
inline CovarianceSequence sigma_t_closed_form(const LtiSystem& system, const NoiseSpec& noise, std::size_t horizon) {
  if (horizon == 0) throw InvalidArgument("sigma_t_closed_form: horizon T must be >= 1");
  noise.validate();
  if (noise.degenerate()) {
    throw IdentifiabilityError("sigma_t_closed_form: sigma_x = sigma_u = sigma_w = 0 makes every Sigma_t singular");
  }
  const auto n = system.n();
  const auto p = system.p();
  const double vx = noise.sigma_x * noise.sigma_x;
  const double vu = noise.sigma_u * noise.sigma_u;
  const double vw = noise.sigma_w * noise.sigma_w;

  CovarianceSequence out;
  out.sigmas.reserve(horizon);
  out.min_eigenvalues.reserve(horizon);
  Matrix a_power = Matrix::Identity(n, n);
  for (std::size_t t = 0; t < horizon; ++t) {
    Matrix sigma = Matrix::Zero(n + p, n + p);
    if (t == 0) {
      sigma.topLeftCorner(n, n) = vx * Matrix::Identity(n, n);
    } else {
      a_power = (system.A() * a_power).eval();
      const auto [G, F] = markov_blocks(system, t);
      sigma.topLeftCorner(n, n) = vu * (G * G.transpose()) + vw * (F * F.transpose()) +
                                  vx * (a_power * a_power.transpose());
    }
    sigma.bottomRightCorner(p, p) = vu * Matrix::Identity(p, p);
    out.min_eigenvalues.push_back(lambda_min(sigma));
    out.sigmas.push_back(std::move(sigma));
  }
  return out;
}

/// Sample covariance of z_t = [x_t; u_t] over independent rollouts (mean-centred, 1/(N-1)).
inline Matrix sigma_t_monte_carlo(const LtiSystem& system, const NoiseSpec& noise, std::size_t t,
                                  std::size_t sample_count, const Rng& rng) {
  if (sample_count < 1000) throw InvalidArgument("sigma_t_monte_carlo: sample_count must be >= 1000");
  const auto n = system.n();
  const auto p = system.p();
  Vector mean = Vector::Zero(n + p);
  Matrix second = Matrix::Zero(n + p, n + p);
  Vector z(n + p);
  for (std::size_t s = 0; s < sample_count; ++s) {
    Rng stream = rng.fork(s);
    const Rollout r = simulate_rollout(system, noise, t + 1, stream);
    z.head(n) = r.states.col(static_cast<Eigen::Index>(t));
    z.tail(p) = r.inputs.col(static_cast<Eigen::Index>(t));
    mean += z;
    second.selfadjointView<Eigen::Lower>().rankUpdate(z);
  }
  const double count = static_cast<double>(sample_count);
  mean /= count;
  Matrix full = second.selfadjointView<Eigen::Lower>();
  return (full - count * mean * mean.transpose()) / (count - 1.0);
}

}  // namespace fedsysid
