#pragma once

// FedSysID: rounds of broadcast, local gradient updates (FedAvg or FedLin) and
// server averaging over M clients, with a per-round trace.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedsysid/errors.hpp"
#include "fedsysid/estimation.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/lti_dynamics.hpp"
#include "fedsysid/rng.hpp"

namespace fedsysid {

enum class UpdateRule { kFedAvg, kFedLin };

inline std::string to_string(UpdateRule rule) { return rule == UpdateRule::kFedAvg ? "FedAvg" : "FedLin"; }

inline UpdateRule parse_update_rule(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  if (text == "fedavg") return UpdateRule::kFedAvg;
  if (text == "fedlin") return UpdateRule::kFedLin;
  throw InvalidArgument("unknown update rule '" + text + "' (expected fedavg or fedlin)");
}

/// Step size per round: constant, or alpha_r = alpha0 (1 - r/R) floored at alpha0 / R.
struct StepSchedule {
  enum class Kind { kConstant, kLinearDecreasing };

  Kind kind = Kind::kConstant;
  double alpha0 = 1e-4;

  double at(std::size_t round, std::size_t total_rounds) const {
    if (kind == Kind::kConstant || total_rounds == 0) return alpha0;
    const double R = static_cast<double>(total_rounds);
    return std::max(alpha0 * (1.0 - static_cast<double>(round) / R), alpha0 / R);
  }
};

inline std::string to_string(StepSchedule::Kind kind) {
  return kind == StepSchedule::Kind::kConstant ? "constant" : "linear";
}

struct FederationConfig {
  std::size_t clients = 1;                         // M
  std::size_t rounds = 0;                          // R
  std::size_t local_steps = 10;                    // K, unless overridden per client
  std::vector<std::size_t> local_steps_per_client;  // K_i; empty or of length M
  UpdateRule rule = UpdateRule::kFedLin;
  StepSchedule schedule;
  double participation = 1.0;
  std::uint64_t seed = 0;
  // Divide each client's gradient by its column count N_i T.
  bool normalize_gradient = false;

  std::size_t steps_for(std::size_t client) const {
    return local_steps_per_client.empty() ? local_steps : local_steps_per_client.at(client);
  }

  std::size_t participants_per_round() const {
    const auto k = static_cast<std::size_t>(std::llround(participation * static_cast<double>(clients)));
    return std::clamp<std::size_t>(k, 1, clients);
  }

  void validate() const {
    if (clients < 1) throw InvalidArgument("FederationConfig: M must be >= 1");
    if (!local_steps_per_client.empty() && local_steps_per_client.size() != clients) {
      throw InvalidArgument("FederationConfig: per-client local steps must have length M");
    }
    for (std::size_t i = 0; i < clients; ++i) {
      if (steps_for(i) < 1) throw InvalidArgument("FederationConfig: every K_i must be >= 1");
    }
    if (!(schedule.alpha0 > 0.0) || !std::isfinite(schedule.alpha0)) {
      throw InvalidArgument("FederationConfig: step size alpha0 must be > 0");
    }
    if (!(participation > 0.0 && participation <= 1.0)) {
      throw InvalidArgument("FederationConfig: participation must lie in (0, 1]");
    }
    if (participation * static_cast<double>(clients) < 1.0) {
      throw InvalidArgument("FederationConfig: participation * M must be >= 1");
    }
  }
};

struct RoundTrace {
  std::size_t round = 0;
  Matrix theta;                       // global model after this round
  double residual_to_pooled = 0.0;    // ||theta - pooled LS||
  std::vector<double> client_errors;  // errMax against each true system, when known
  std::vector<std::size_t> participants;
};

struct FederationResult {
  Matrix final_theta;
  Matrix pooled_theta;
  std::vector<RoundTrace> trace;  // R + 1 entries, the first being theta_0
};

/// Sufficient statistics of one client's least-squares loss.
struct LocalProblem {
  Matrix gram;   // Z Z^T
  Matrix cross;  // X Z^T
  double scale = 1.0;

  static LocalProblem from(const ClientDataset& ds, bool normalize = false) {
    const Eigen::Index d = ds.Z.rows();
    LocalProblem lp{Matrix::Zero(d, d), ds.X * ds.Z.transpose(), 1.0};
    lp.gram.selfadjointView<Eigen::Lower>().rankUpdate(ds.Z);
    lp.gram = lp.gram.selfadjointView<Eigen::Lower>();
    if (normalize) lp.scale = 1.0 / static_cast<double>(ds.Z.cols());
    return lp;
  }

  /// out = scale * (X - theta Z) Z^T
  void gradient(const Matrix& theta, Matrix& out) const {
    out = cross;
    out.noalias() -= theta * gram;
    if (scale != 1.0) out *= scale;
  }

  Matrix gradient(const Matrix& theta) const {
    Matrix out;
    gradient(theta, out);
    return out;
  }
};

/// 2 / lambda_max(Z Z^T): local gradient descent is stable for alpha below this.
inline double admissible_step(const ClientDataset& ds) {
  return 2.0 / lambda_max(LocalProblem::from(ds).gram);
}

namespace detail {

inline constexpr double kDivergenceFactor = 1e8;

inline void check_divergence(const Matrix& theta, double limit, std::size_t step) {
  const double norm = theta.norm();
  if (!(norm <= limit)) {
    throw DivergenceError("local update diverged at step " + std::to_string(step) + " (||Theta||_F = " +
                          std::to_string(norm) + "); step size too large");
  }
}

inline void check_local_args(std::size_t steps, double alpha) {
  if (steps < 1) throw InvalidArgument("local update: K must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("local update: alpha must be >= 0");
}

inline void fedavg_steps(const LocalProblem& lp, Matrix& theta, std::size_t steps, double alpha, Matrix& grad) {
  const double limit = kDivergenceFactor * (1.0 + theta.norm());
  for (std::size_t k = 0; k < steps; ++k) {
    lp.gradient(theta, grad);
    theta.noalias() += alpha * grad;
    check_divergence(theta, limit, k + 1);
  }
}

// Each step adds alpha * ((grad_i(theta) - grad_i(theta_bar)) + g_r). The
// bracket is evaluated in that order so it is exactly g_r while theta == theta_bar.
inline void fedlin_steps(const LocalProblem& lp, Matrix& theta, const Matrix& local_at_bar, const Matrix& global_grad,
                         std::size_t steps, double alpha, Matrix& grad) {
  const double limit = kDivergenceFactor * (1.0 + theta.norm());
  for (std::size_t k = 0; k < steps; ++k) {
    lp.gradient(theta, grad);
    grad -= local_at_bar;
    grad += global_grad;
    theta.noalias() += alpha * grad;
    check_divergence(theta, limit, k + 1);
  }
}

// Running mean; returns exactly x when every term equals x.
class RunningMean {
 public:
  void add(const Matrix& x) {
    ++count_;
    if (count_ == 1) {
      mean_ = x;
    } else {
      mean_ += (x - mean_) / static_cast<double>(count_);
    }
  }
  const Matrix& value() const { return mean_; }

 private:
  std::size_t count_ = 0;
  Matrix mean_;
};

inline void check_theta_shape(const Matrix& theta, const ClientDataset& ds, const char* who) {
  if (theta.rows() != ds.n() || theta.cols() != ds.Z.rows()) {
    throw InvalidArgument(std::string(who) + ": model must be n x (n + p)");
  }
}

}  // namespace detail

/// Uniformly samples round(participation * M) distinct clients (0-based, sorted)
/// from base.fork(round). Full participation returns every client.
inline std::vector<std::size_t> sample_participants(std::size_t clients, double participation, std::size_t round,
                                                    const Rng& base) {
  std::vector<std::size_t> all(clients);
  std::iota(all.begin(), all.end(), std::size_t{0});
  FederationConfig probe;
  probe.clients = clients;
  probe.participation = participation;
  const std::size_t k = probe.participants_per_round();
  if (k >= clients) return all;
  Rng rng = base.fork(round);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t pick = j + static_cast<std::size_t>(rng.below(clients - j));
    std::swap(all[j], all[pick]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

/// K iterations of Theta <- Theta + alpha (X - Theta Z) Z^T.
inline Matrix fedavg_local(const ClientDataset& ds, const Matrix& theta_in, std::size_t steps, double alpha) {
  detail::check_local_args(steps, alpha);
  detail::check_theta_shape(theta_in, ds, "fedavg_local");
  const LocalProblem lp = LocalProblem::from(ds);
  Matrix theta = theta_in;
  Matrix grad;
  detail::fedavg_steps(lp, theta, steps, alpha, grad);
  return theta;
}

/// g = (1/M) sum_i (X_i - theta_bar Z_i) Z_i^T.
inline Matrix global_gradient(std::span<const ClientDataset> datasets, const Matrix& theta_bar) {
  if (datasets.empty()) throw InvalidArgument("global_gradient: at least one dataset is required");
  detail::RunningMean mean;
  for (const auto& ds : datasets) {
    detail::check_theta_shape(theta_bar, ds, "global_gradient");
    mean.add(LocalProblem::from(ds).gradient(theta_bar));
  }
  return mean.value();
}

/// FedLin client update started from theta_in (normally theta_bar).
inline Matrix fedlin_local(const ClientDataset& ds, const Matrix& theta_in, const Matrix& theta_bar,
                           const Matrix& global_grad, std::size_t steps, double alpha) {
  detail::check_local_args(steps, alpha);
  detail::check_theta_shape(theta_in, ds, "fedlin_local");
  detail::check_theta_shape(theta_bar, ds, "fedlin_local");
  if (global_grad.rows() != theta_bar.rows() || global_grad.cols() != theta_bar.cols()) {
    throw InvalidArgument("fedlin_local: g_r must have the model's shape");
  }
  const LocalProblem lp = LocalProblem::from(ds);
  const Matrix local_at_bar = lp.gradient(theta_bar);
  Matrix theta = theta_in;
  Matrix grad;
  detail::fedlin_steps(lp, theta, local_at_bar, global_grad, steps, alpha, grad);
  return theta;
}

/// Runs R rounds of FedSysID from theta_0.
///
/// Non-participants contribute the broadcast model to the server average, so the
/// average is always taken over M models. FedLin's g_r uses every client.
/// When `truths` is non-empty it must hold M systems and each trace entry then
/// records errMax of the global model against every client's true system.
inline FederationResult run_fedsysid(std::span<const ClientDataset> datasets, const FederationConfig& config,
                                     const Matrix& theta_0, std::span<const LtiSystem> truths = {}) {
  config.validate();
  if (datasets.size() != config.clients) {
    throw InvalidArgument("run_fedsysid: expected " + std::to_string(config.clients) + " datasets, got " +
                          std::to_string(datasets.size()));
  }
  if (!truths.empty() && truths.size() != config.clients) {
    throw InvalidArgument("run_fedsysid: truths must be empty or hold one system per client");
  }
  for (const auto& ds : datasets) {
    detail::check_theta_shape(theta_0, ds, "run_fedsysid");
  }

  const std::size_t M = config.clients;
  std::vector<LocalProblem> problems;
  problems.reserve(M);
  for (const auto& ds : datasets) problems.push_back(LocalProblem::from(ds, config.normalize_gradient));

  FederationResult result;
  result.pooled_theta = pooled_ls(datasets).theta();

  const Eigen::Index n = theta_0.rows();
  auto record = [&](std::size_t round, const Matrix& theta, std::vector<std::size_t> participants) {
    RoundTrace tr;
    tr.round = round;
    tr.theta = theta;
    tr.residual_to_pooled = spectral_norm(theta - result.pooled_theta);
    if (!truths.empty()) {
      const ThetaEstimate est(theta, n);
      tr.client_errors.reserve(M);
      for (const auto& sys : truths) tr.client_errors.push_back(estimation_error(est, sys).err_max);
    }
    tr.participants = std::move(participants);
    result.trace.push_back(std::move(tr));
  };

  std::vector<std::size_t> everyone(M);
  std::iota(everyone.begin(), everyone.end(), std::size_t{0});
  result.trace.reserve(config.rounds + 1);
  record(0, theta_0, everyone);

  const Rng participation_rng = Rng(config.seed).fork(Stream::kParticipation);
  Matrix theta_bar = theta_0;
  Matrix local;
  Matrix grad;
  std::vector<Matrix> local_at_bar(M);

  for (std::size_t r = 0; r < config.rounds; ++r) {
    const double alpha = config.schedule.at(r, config.rounds);
    std::vector<std::size_t> participants = sample_participants(M, config.participation, r, participation_rng);

    Matrix global_grad;
    if (config.rule == UpdateRule::kFedLin) {
      detail::RunningMean mean;
      for (std::size_t i = 0; i < M; ++i) {
        problems[i].gradient(theta_bar, local_at_bar[i]);
        mean.add(local_at_bar[i]);
      }
      global_grad = mean.value();
    }

    detail::RunningMean average;
    std::size_t next = 0;
    for (std::size_t i = 0; i < M; ++i) {
      const bool active = next < participants.size() && participants[next] == i;
      if (!active) {
        average.add(theta_bar);
        continue;
      }
      ++next;
      local = theta_bar;
      try {
        if (config.rule == UpdateRule::kFedAvg) {
          detail::fedavg_steps(problems[i], local, config.steps_for(i), alpha, grad);
        } else {
          detail::fedlin_steps(problems[i], local, local_at_bar[i], global_grad, config.steps_for(i), alpha, grad);
        }
      } catch (const DivergenceError& e) {
        throw DivergenceError("round " + std::to_string(r) + ", client " + std::to_string(i) + ": " + e.what());
      }
      average.add(local);
    }
    theta_bar = average.value();
    record(r + 1, theta_bar, std::move(participants));
  }

  result.final_theta = theta_bar;
  return result;
}

}  // namespace fedsysid
