#pragma once

// Error curves e_r = (1/q) sum_trials ||Theta_bar_r - Theta^(1)|| over q trials,
// and one-axis sweeps of them.
//
// Seeding: trial k uses Rng(seed).fork(kTrial).fork(k). Inside a trial the
// ensemble, client data and participation sampling each get a named sub-stream,
// and client i's system and data are forked by i. Curves of a sweep therefore
// share every random draw that the swept parameter does not touch.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "fedsysid/errors.hpp"
#include "fedsysid/estimation.hpp"
#include "fedsysid/experiments/config.hpp"
#include "fedsysid/experiments/ensemble.hpp"
#include "fedsysid/federation.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/lti_dynamics.hpp"
#include "fedsysid/rng.hpp"

namespace fedsysid::experiments {

struct ErrorCurve {
  UpdateRule rule = UpdateRule::kFedLin;
  std::size_t clients = 0;
  std::size_t rollouts = 0;
  double epsilon = 0.0;
  std::vector<double> e;    // e_r, r = 0..R
  std::vector<double> stdev;  // sample standard deviation across trials (0 when q = 1)
  std::vector<double> pooled_errors;  // per trial ||pooled LS - Theta^(1)||
  std::vector<std::uint64_t> trial_seeds;

  double final_error() const { return e.back(); }
  double mean_pooled_error() const {
    double s = 0.0;
    for (double v : pooled_errors) s += v;
    return pooled_errors.empty() ? 0.0 : s / static_cast<double>(pooled_errors.size());
  }
};

struct TrialData {
  Ensemble ensemble;
  std::vector<ClientDataset> datasets;
  std::uint64_t trial_seed = 0;
  std::uint64_t federation_seed = 0;
};

inline Rng trial_stream(const ExperimentConfig& cfg, std::size_t trial) {
  return Rng(cfg.master_seed()).fork(Stream::kTrial).fork(trial);
}

/// Systems and datasets of one trial.
inline TrialData generate_trial(const ExperimentConfig& cfg, std::size_t trial) {
  const Rng trial_rng = trial_stream(cfg, trial);
  const Rng ensemble_rng =
      cfg.freeze_ensemble ? Rng(cfg.master_seed()).fork(Stream::kEnsemble) : trial_rng.fork(Stream::kEnsemble);
  TrialData t;
  t.trial_seed = trial_rng.seed();
  t.federation_seed = trial_rng.fork(Stream::kParticipation).seed();
  t.ensemble = make_ensemble(cfg.A0, cfg.B0, cfg.V, cfg.U, cfg.epsilon, cfg.clients, ensemble_rng);
  const Rng data_rng = trial_rng.fork(Stream::kData);
  t.datasets.reserve(cfg.clients);
  for (std::size_t i = 0; i < cfg.clients; ++i) {
    t.datasets.push_back(
        simulate_client_dataset(t.ensemble.systems[i], cfg.noise, cfg.rollouts, cfg.horizon, data_rng.fork(i), i));
  }
  return t;
}

struct TrialResult {
  std::vector<double> errors;  // ||Theta_bar_r - Theta^(1)||, r = 0..R
  double pooled_error = 0.0;
  std::uint64_t trial_seed = 0;
};

/// One trial of FedSysID from the zero model.
inline TrialResult run_trial(const ExperimentConfig& cfg, std::size_t trial) {
  const TrialData data = generate_trial(cfg, trial);
  const Matrix reference = data.ensemble.systems.front().theta();
  const Matrix theta0 = Matrix::Zero(cfg.n(), cfg.n() + cfg.p());
  const FederationResult fr = run_fedsysid(data.datasets, cfg.federation(data.federation_seed), theta0);
  TrialResult out;
  out.trial_seed = data.trial_seed;
  out.errors.reserve(fr.trace.size());
  for (const auto& tr : fr.trace) out.errors.push_back(spectral_norm(tr.theta - reference));
  out.pooled_error = spectral_norm(fr.pooled_theta - reference);
  return out;
}

namespace detail {

[[noreturn]] inline void rethrow_with_trial(std::exception_ptr ep, std::size_t trial) {
  const std::string prefix = "trial " + std::to_string(trial) + ": ";
  try {
    std::rethrow_exception(ep);
  } catch (const DivergenceError& e) {
    throw DivergenceError(prefix + e.what());
  } catch (const SingularDataError& e) {
    throw SingularDataError(prefix + e.what(), e.lambda_min(), e.lambda_max());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

// Runs fn(k) for k = 0..count-1 on up to `threads` workers; results land in
// their own slots so the outcome does not depend on scheduling.
template <typename Result, typename Fn>
std::vector<Result> run_indexed(std::size_t count, unsigned threads, Fn fn) {
  std::vector<Result> results(count);
  std::vector<std::exception_ptr> errors(count);
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  auto work = [&](std::atomic<std::size_t>& next) {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        results[k] = fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::atomic<std::size_t> next{0};
  if (workers <= 1) {
    work(next);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back([&] { work(next); });
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (errors[k]) rethrow_with_trial(errors[k], k);
  }
  return results;
}

}  // namespace detail

/// Runs q trials and averages their error trajectories round by round.
inline ErrorCurve run_error_curve(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<TrialResult> trials =
      detail::run_indexed<TrialResult>(cfg.trials, cfg.threads, [&](std::size_t k) { return run_trial(cfg, k); });

  ErrorCurve curve;
  curve.rule = cfg.rule;
  curve.clients = cfg.clients;
  curve.rollouts = cfg.rollouts;
  curve.epsilon = cfg.epsilon;
  const std::size_t points = cfg.rounds + 1;
  const double q = static_cast<double>(trials.size());
  curve.e.assign(points, 0.0);
  curve.stdev.assign(points, 0.0);
  for (const auto& t : trials) {
    for (std::size_t r = 0; r < points; ++r) curve.e[r] += t.errors[r];
    curve.pooled_errors.push_back(t.pooled_error);
    curve.trial_seeds.push_back(t.trial_seed);
  }
  for (auto& v : curve.e) v /= q;
  if (trials.size() > 1) {
    for (std::size_t r = 0; r < points; ++r) {
      double ss = 0.0;
      for (const auto& t : trials) ss += (t.errors[r] - curve.e[r]) * (t.errors[r] - curve.e[r]);
      curve.stdev[r] = std::sqrt(ss / (q - 1.0));
    }
  }
  return curve;
}

/// One ErrorCurve per value of the single configured sweep axis.
inline std::vector<ErrorCurve> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t axes = cfg.sweep_axis_count();
  if (axes == 0) throw ConfigError("run_sweep: no sweep axis configured (sweep_clients, sweep_rollouts, ...)");
  if (axes > 1) throw ConfigError("run_sweep: only one sweep axis may vary per run");

  std::vector<ExperimentConfig> points;
  ExperimentConfig base = cfg;
  base.sweep_clients.clear();
  base.sweep_rollouts.clear();
  base.sweep_epsilon.clear();
  base.sweep_rule.clear();
  for (auto m : cfg.sweep_clients) {
    points.push_back(base);
    points.back().clients = m;
  }
  for (auto n : cfg.sweep_rollouts) {
    points.push_back(base);
    points.back().rollouts = n;
  }
  for (auto e : cfg.sweep_epsilon) {
    points.push_back(base);
    points.back().epsilon = e;
  }
  for (auto r : cfg.sweep_rule) {
    points.push_back(base);
    points.back().rule = r;
  }
  std::vector<ErrorCurve> curves;
  curves.reserve(points.size());
  for (const auto& p : points) curves.push_back(run_error_curve(p));
  return curves;
}

}  // namespace fedsysid::experiments
