#pragma once

// Command-line front end: simulate, run, sweep, bound, diagnose.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fedsysid/bounds.hpp"
#include "fedsysid/errors.hpp"
#include "fedsysid/estimation.hpp"
#include "fedsysid/experiments/config.hpp"
#include "fedsysid/experiments/csv.hpp"
#include "fedsysid/experiments/error_curve.hpp"
#include "fedsysid/experiments/plot_script.hpp"
#include "fedsysid/federation.hpp"

namespace fedsysid::experiments {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

struct CliOptions {
  std::string config = "paper_defaults";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string rule;
  std::optional<std::size_t> rounds;
  bool quiet = false;
};

namespace detail {

inline ExperimentConfig resolve_config(const CliOptions& opt) {
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) {
    cfg.seed = *opt.seed;
  } else if (!cfg.seed) {
    if (const char* env = std::getenv("FEDSYSID_SEED"); env != nullptr && *env != '\0') {
      cfg.seed = parse_u64("FEDSYSID_SEED", env);
    }
  }
  if (!opt.rule.empty()) {
    if (!cfg.sweep_rule.empty()) throw ConfigError("--rule conflicts with the config's sweep_rule axis");
    try {
      cfg.rule = parse_update_rule(opt.rule);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (opt.rounds) cfg.rounds = *opt.rounds;
  cfg.validate();
  return cfg;
}

inline void print_kv(std::ostream& out, const std::string& key, const std::string& value) {
  out << key << " = " << value << "\n";
}

inline std::string num(double v) { return format_sig12(v); }

inline int cmd_simulate(const CliOptions& opt, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(opt);
  const TrialData trial = generate_trial(cfg, 0);
  const auto n = cfg.n();
  const auto p = cfg.p();
  if (!opt.out.empty()) {
    std::ofstream f(opt.out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open output", opt.out);
    for (const auto& line : config_echo(cfg)) f << "# " << line << "\n";
    f << "client,sample";
    for (Eigen::Index k = 0; k < n; ++k) f << ",x" << k;
    for (Eigen::Index k = 0; k < p; ++k) f << ",u" << k;
    for (Eigen::Index k = 0; k < n; ++k) f << ",w" << k;
    for (Eigen::Index k = 0; k < n; ++k) f << ",x_next" << k;
    f << "\n";
    for (const auto& ds : trial.datasets) {
      for (Eigen::Index c = 0; c < ds.columns(); ++c) {
        f << ds.system_id << "," << c;
        for (Eigen::Index k = 0; k < n + p; ++k) f << "," << num(ds.Z(k, c));
        for (Eigen::Index k = 0; k < n; ++k) f << "," << num(ds.W(k, c));
        for (Eigen::Index k = 0; k < n; ++k) f << "," << num(ds.X(k, c));
        f << "\n";
      }
    }
    if (!f) throw IoError("failed writing output", opt.out);
  }
  if (!opt.quiet) {
    print_kv(out, "clients", std::to_string(cfg.clients));
    print_kv(out, "rollouts_per_client", std::to_string(cfg.rollouts));
    print_kv(out, "horizon", std::to_string(cfg.horizon));
    print_kv(out, "columns_per_client", std::to_string(cfg.rollouts * cfg.horizon));
    print_kv(out, "measured_epsilon", num(measure_heterogeneity(trial.ensemble.systems)));
    double lmin = 0.0;
    for (std::size_t i = 0; i < trial.datasets.size(); ++i) {
      const double l = lambda_min(LocalProblem::from(trial.datasets[i]).gram);
      lmin = i == 0 ? l : std::min(lmin, l);
    }
    print_kv(out, "min_gram_lambda_min", num(lmin));
    const ThetaEstimate pooled = pooled_ls(trial.datasets);
    print_kv(out, "pooled_ls_error_client0", num(estimation_error(pooled, trial.ensemble.systems.front()).err_max));
    if (!opt.out.empty()) print_kv(out, "written", opt.out);
  }
  return kExitOk;
}

inline int cmd_run(const CliOptions& opt, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(opt);
  cfg.sweep_clients.clear();
  cfg.sweep_rollouts.clear();
  cfg.sweep_epsilon.clear();
  cfg.sweep_rule.clear();
  const std::vector<ErrorCurve> curves{run_error_curve(cfg)};
  const auto echo = config_echo(cfg, curves);
  const std::string path = !opt.out.empty() ? opt.out : cfg.output;
  if (path.empty()) {
    out << format_curves_csv(curves, echo);
  } else {
    write_curves_csv(curves, path, echo);
    if (!opt.quiet) {
      print_kv(out, "written", path);
      print_kv(out, "final_e_r", num(curves.front().final_error()));
    }
  }
  return kExitOk;
}

inline std::filesystem::path plot_path_for(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension();
  p += "_plot.py";
  return p;
}

inline int cmd_sweep(const CliOptions& opt, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(opt);
  const std::vector<ErrorCurve> curves = run_sweep(cfg);
  const std::string path = !opt.out.empty() ? opt.out : (!cfg.output.empty() ? cfg.output : cfg.name + ".csv");
  write_curves_csv(curves, path, config_echo(cfg, curves));
  const auto script = plot_path_for(path);
  emit_plot_script(path, script);
  if (!opt.quiet) {
    print_kv(out, "written", path);
    print_kv(out, "plot_script", script.string());
    for (const auto& c : curves) {
      out << "curve rule=" << to_string(c.rule) << " M=" << c.clients << " N_i=" << c.rollouts
          << " epsilon=" << num(c.epsilon) << " final_e_r=" << num(c.final_error()) << "\n";
    }
  }
  return kExitOk;
}

inline int cmd_bound(const CliOptions& opt, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(opt);
  const TrialData trial = generate_trial(cfg, 0);
  const std::vector<NoiseSpec> noises(cfg.clients, cfg.noise);
  const std::vector<std::size_t> counts(cfg.clients, cfg.rollouts);
  const BoundReport r = theorem1_bound(trial.ensemble.systems, noises, counts, cfg.horizon, cfg.epsilon, cfg.delta);
  print_kv(out, "C0", num(r.C0));
  print_kv(out, "C1", num(r.C1));
  print_kv(out, "C2", num(r.C2));
  print_kv(out, "term_noise", num(r.term_noise));
  print_kv(out, "term_hetero", num(r.term_hetero));
  print_kv(out, "total", num(r.total));
  print_kv(out, "delta", num(r.delta));
  print_kv(out, "epsilon", num(r.epsilon));
  print_kv(out, "sample_threshold", num(r.sample_threshold));
  print_kv(out, "sample_ok", r.sample_ok ? "true" : "false");
  if (!opt.quiet) {
    const CentralizedBound c = centralized_bound(trial.ensemble.systems.front(), cfg.noise, cfg.rollouts,
                                                 cfg.horizon, std::min(cfg.delta, 0.999));
    print_kv(out, "centralized_bound_client0", num(c.value));
    print_kv(out, "centralized_sample_ok", c.sample_ok ? "true" : "false");
  }
  return kExitOk;
}

inline int cmd_diagnose(const CliOptions& opt, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(opt);
  const TrialData trial = generate_trial(cfg, 0);
  const std::vector<NoiseSpec> noises(cfg.clients, cfg.noise);
  const DiagnosticsReport d = empirical_diagnostics(trial.ensemble.systems, noises, trial.datasets, cfg.delta);
  double dz_max = 0.0;
  double dz_bound_min_ratio = 1.0;
  bool dz_ok = true;
  for (std::size_t i = 0; i < d.dz_norms.size(); ++i) {
    dz_max = std::max(dz_max, d.dz_norms[i]);
    dz_ok = dz_ok && d.dz_norms[i] <= d.dz_bounds[i];
    if (d.dz_bounds[i] > 0.0) dz_bound_min_ratio = std::min(dz_bound_min_ratio, d.dz_norms[i] / d.dz_bounds[i]);
  }
  double gram_min = d.gram_lmin.front();
  double gram_bound_max = d.gram_lmin_bound.front();
  for (std::size_t i = 0; i < d.gram_lmin.size(); ++i) {
    gram_min = std::min(gram_min, d.gram_lmin[i]);
    gram_bound_max = std::max(gram_bound_max, d.gram_lmin_bound[i]);
  }
  print_kv(out, "wz_norm", num(d.wz_norm));
  print_kv(out, "wz_bound", num(d.wz_bound));
  print_kv(out, "wz_bound_holds", d.wz_bound_holds() ? "true" : "false");
  print_kv(out, "dz_norm_max", num(dz_max));
  print_kv(out, "dz_bounds_hold", dz_ok ? "true" : "false");
  print_kv(out, "gram_lambda_min_min", num(gram_min));
  print_kv(out, "gram_lambda_min_bound_max", num(gram_bound_max));
  print_kv(out, "gram_bounds_hold", d.all_gram_bounds_hold() ? "true" : "false");
  print_kv(out, "beta", num(d.beta));
  print_kv(out, "gram_threshold", num(d.gram_threshold));
  print_kv(out, "wz_threshold", num(d.wz_threshold));
  print_kv(out, "thresholds_met", d.thresholds_met ? "true" : "false");
  return kExitOk;
}

}  // namespace detail

/// Entry point of the `fedsysid` tool.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Federated identification of linear systems: simulation, bounds and experiment sweeps"};
  app.name("fedsysid");
  app.require_subcommand(1);

  CliOptions opt;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "config file or preset name")->capture_default_str();
    cmd->add_option("--seed", opt.seed, "master seed (overrides config and FEDSYSID_SEED)");
    cmd->add_option("--out", opt.out, "output path");
    cmd->add_option("--rule", opt.rule, "client update rule")->check(CLI::IsMember({"fedavg", "fedlin"}));
    cmd->add_option("--rounds", opt.rounds, "global rounds R");
    cmd->add_flag("--quiet", opt.quiet, "suppress summaries");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "simulate one trial's client datasets");
  CLI::App* run = app.add_subcommand("run", "run one error curve and write it as CSV");
  CLI::App* sweep = app.add_subcommand("sweep", "run a one-axis sweep, write CSV and a plot script");
  CLI::App* bound = app.add_subcommand("bound", "evaluate the federated error bound");
  CLI::App* diagnose = app.add_subcommand("diagnose", "compare measured data quantities with their bounds");
  for (auto* cmd : {simulate, run, sweep, bound, diagnose}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*simulate) return detail::cmd_simulate(opt, out);
    if (*run) return detail::cmd_run(opt, out);
    if (*sweep) return detail::cmd_sweep(opt, out);
    if (*bound) return detail::cmd_bound(opt, out);
    if (*diagnose) return detail::cmd_diagnose(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace fedsysid::experiments
