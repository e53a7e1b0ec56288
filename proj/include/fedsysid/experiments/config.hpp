#pragma once

// Experiment configuration: a plain `key = value` text format with `#` comments.
//
//   A0 = 0.6 0.5 0.4; 0 0.4 0.3; 0 0 0.3   # matrix rows separated by ';'
//   sweep_clients = 1, 10, 50, 100          # lists separated by ','
//
// Unknown or repeated keys are errors.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "fedsysid/errors.hpp"
#include "fedsysid/federation.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/lti_dynamics.hpp"

namespace fedsysid::experiments {

enum class ScheduleChoice { kAuto, kConstant, kLinear };

inline std::string to_string(ScheduleChoice s) {
  switch (s) {
    case ScheduleChoice::kAuto: return "auto";
    case ScheduleChoice::kConstant: return "constant";
    case ScheduleChoice::kLinear: return "linear";
  }
  return "auto";
}

inline constexpr std::uint64_t kDefaultSeed = 20230101;

namespace defaults {

inline Matrix nominal_a() {
  Matrix a(3, 3);
  a << 0.6, 0.5, 0.4,  //
      0.0, 0.4, 0.3,   //
      0.0, 0.0, 0.3;
  return a;
}

inline Matrix nominal_b() {
  Matrix b(3, 2);
  b << 1.0, 0.5,  //
      0.5, 1.0,   //
      0.5, 0.5;
  return b;
}

inline Matrix pattern_v() {
  Matrix v = Matrix::Zero(3, 3);
  v(1, 1) = 1.0;
  v(2, 2) = 1.0;
  return v;
}

inline Matrix pattern_u() {
  Matrix u = Matrix::Zero(3, 2);
  u(0, 0) = 1.0;
  u(2, 1) = 1.0;
  return u;
}

}  // namespace defaults

struct ExperimentConfig {
  std::string name = "custom";

  // ensemble
  Matrix A0 = defaults::nominal_a();
  Matrix B0 = defaults::nominal_b();
  Matrix V = defaults::pattern_v();
  Matrix U = defaults::pattern_u();
  double epsilon = 0.01;
  bool freeze_ensemble = false;

  // data
  std::size_t clients = 50;
  std::size_t rollouts = 25;
  std::size_t horizon = 5;
  NoiseSpec noise{1.0, 1.0, 1.0};

  // federation
  UpdateRule rule = UpdateRule::kFedLin;
  ScheduleChoice schedule = ScheduleChoice::kAuto;
  double step_size = 1e-4;
  std::size_t rounds = 200;
  std::size_t local_steps = 10;
  double participation = 1.0;
  bool normalize_gradient = false;

  // experiment
  std::size_t trials = 25;
  std::optional<std::uint64_t> seed;
  double delta = 0.05;
  std::vector<std::size_t> sweep_clients;
  std::vector<std::size_t> sweep_rollouts;
  std::vector<double> sweep_epsilon;
  std::vector<UpdateRule> sweep_rule;
  std::string output;
  unsigned threads = 0;

  Eigen::Index n() const { return A0.rows(); }
  Eigen::Index p() const { return B0.cols(); }
  std::uint64_t master_seed() const { return seed.value_or(kDefaultSeed); }

  /// Step schedule after resolving `auto` (FedAvg decays linearly, FedLin stays constant).
  StepSchedule step_schedule() const {
    StepSchedule s;
    s.alpha0 = step_size;
    const bool linear = schedule == ScheduleChoice::kLinear ||
                        (schedule == ScheduleChoice::kAuto && rule == UpdateRule::kFedAvg);
    s.kind = linear ? StepSchedule::Kind::kLinearDecreasing : StepSchedule::Kind::kConstant;
    return s;
  }

  FederationConfig federation(std::uint64_t federation_seed) const {
    FederationConfig f;
    f.clients = clients;
    f.rounds = rounds;
    f.local_steps = local_steps;
    f.rule = rule;
    f.schedule = step_schedule();
    f.participation = participation;
    f.seed = federation_seed;
    f.normalize_gradient = normalize_gradient;
    return f;
  }

  std::size_t sweep_axis_count() const {
    return static_cast<std::size_t>(!sweep_clients.empty()) + static_cast<std::size_t>(!sweep_rollouts.empty()) +
           static_cast<std::size_t>(!sweep_epsilon.empty()) + static_cast<std::size_t>(!sweep_rule.empty());
  }

  void validate() const {
    const auto n = A0.rows();
    if (n < 1 || A0.cols() != n) throw ConfigError("A0 must be square");
    if (B0.rows() != n || B0.cols() < 1) throw ConfigError("B0 must have n rows and p >= 1 columns");
    if (V.rows() != n || V.cols() != n) throw ConfigError("V must have the shape of A0");
    if (U.rows() != B0.rows() || U.cols() != B0.cols()) throw ConfigError("U must have the shape of B0");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if (clients < 1) throw ConfigError("clients must be >= 1");
    if (rollouts < 1) throw ConfigError("rollouts must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    try {
      noise.validate();
      federation(0).validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    for (auto m : sweep_clients) {
      if (m < 1) throw ConfigError("sweep_clients entries must be >= 1");
    }
    for (auto r : sweep_rollouts) {
      if (r < 1) throw ConfigError("sweep_rollouts entries must be >= 1");
    }
    for (auto e : sweep_epsilon) {
      if (!(e >= 0.0)) throw ConfigError("sweep_epsilon entries must be >= 0");
    }
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("key '" + std::string(key) + "': cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("key '" + std::string(key) + "': cannot parse non-negative integer '" + std::string(text) +
                      "'");
  }
  return v;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("key '" + std::string(key) + "': expected true or false, got '" + std::string(text) + "'");
}

inline Matrix parse_matrix(std::string_view key, std::string_view text) {
  std::vector<std::vector<double>> rows;
  for (auto row : split(text, ';')) {
    std::vector<double> values;
    std::string buffer(row);
    for (auto& c : buffer) {
      if (c == ',') c = ' ';
    }
    std::istringstream in(buffer);
    std::string token;
    while (in >> token) values.push_back(parse_double(key, token));
    if (values.empty()) throw ConfigError("key '" + std::string(key) + "': empty matrix row");
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw ConfigError("key '" + std::string(key) + "': matrix rows have different lengths");
    }
    rows.push_back(std::move(values));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

template <typename T, typename Parse>
std::vector<T> parse_list(std::string_view key, std::string_view text, Parse parse) {
  std::vector<T> out;
  for (auto item : split(text, ',')) {
    if (item.empty()) throw ConfigError("key '" + std::string(key) + "': empty list entry");
    out.push_back(parse(item));
  }
  return out;
}

}  // namespace detail

/// Parses configuration text. `origin` names the source in error messages.
inline ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<config>") {
  using namespace detail;
  ExperimentConfig cfg;
  std::map<std::string, std::string, std::less<>> entries;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(view.substr(0, eq)));
    std::string value(trim(view.substr(eq + 1)));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (!entries.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }

  std::optional<std::uint64_t> declared_n;
  std::optional<std::uint64_t> declared_p;
  for (const auto& [key, value] : entries) {
    const std::string_view v = value;
    auto size = [&](std::string_view t) { return static_cast<std::size_t>(parse_u64(key, t)); };
    if (key == "name") {
      cfg.name = value;
    } else if (key == "n") {
      declared_n = parse_u64(key, v);
    } else if (key == "p") {
      declared_p = parse_u64(key, v);
    } else if (key == "A0") {
      cfg.A0 = parse_matrix(key, v);
    } else if (key == "B0") {
      cfg.B0 = parse_matrix(key, v);
    } else if (key == "V") {
      cfg.V = parse_matrix(key, v);
    } else if (key == "U") {
      cfg.U = parse_matrix(key, v);
    } else if (key == "epsilon") {
      cfg.epsilon = parse_double(key, v);
    } else if (key == "freeze_ensemble") {
      cfg.freeze_ensemble = parse_bool(key, v);
    } else if (key == "clients") {
      cfg.clients = size(v);
    } else if (key == "rollouts") {
      cfg.rollouts = size(v);
    } else if (key == "horizon") {
      cfg.horizon = size(v);
    } else if (key == "sigma_x") {
      cfg.noise.sigma_x = parse_double(key, v);
    } else if (key == "sigma_u") {
      cfg.noise.sigma_u = parse_double(key, v);
    } else if (key == "sigma_w") {
      cfg.noise.sigma_w = parse_double(key, v);
    } else if (key == "rule") {
      try {
        cfg.rule = parse_update_rule(value);
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "step_schedule") {
      if (value == "auto") {
        cfg.schedule = ScheduleChoice::kAuto;
      } else if (value == "constant") {
        cfg.schedule = ScheduleChoice::kConstant;
      } else if (value == "linear") {
        cfg.schedule = ScheduleChoice::kLinear;
      } else {
        throw ConfigError("key 'step_schedule': expected auto, constant or linear");
      }
    } else if (key == "step_size") {
      cfg.step_size = parse_double(key, v);
    } else if (key == "rounds") {
      cfg.rounds = size(v);
    } else if (key == "local_steps") {
      cfg.local_steps = size(v);
    } else if (key == "participation") {
      cfg.participation = parse_double(key, v);
    } else if (key == "normalize_gradient") {
      cfg.normalize_gradient = parse_bool(key, v);
    } else if (key == "trials") {
      cfg.trials = size(v);
    } else if (key == "seed") {
      cfg.seed = parse_u64(key, v);
    } else if (key == "delta") {
      cfg.delta = parse_double(key, v);
    } else if (key == "sweep_clients") {
      cfg.sweep_clients = parse_list<std::size_t>(key, v, size);
    } else if (key == "sweep_rollouts") {
      cfg.sweep_rollouts = parse_list<std::size_t>(key, v, size);
    } else if (key == "sweep_epsilon") {
      cfg.sweep_epsilon = parse_list<double>(key, v, [&](std::string_view t) { return parse_double(key, t); });
    } else if (key == "sweep_rule") {
      cfg.sweep_rule = parse_list<UpdateRule>(key, v, [&](std::string_view t) {
        try {
          return parse_update_rule(std::string(t));
        } catch (const InvalidArgument& e) {
          throw ConfigError(e.what());
        }
      });
    } else if (key == "output") {
      cfg.output = value;
    } else if (key == "threads") {
      cfg.threads = static_cast<unsigned>(parse_u64(key, v));
    } else {
      throw ConfigError(origin + ": unknown key '" + key + "'");
    }
  }
  if (declared_n && static_cast<Eigen::Index>(*declared_n) != cfg.n()) {
    throw ConfigError(origin + ": n = " + std::to_string(*declared_n) + " does not match A0");
  }
  if (declared_p && static_cast<Eigen::Index>(*declared_p) != cfg.p()) {
    throw ConfigError(origin + ": p = " + std::to_string(*declared_p) + " does not match B0");
  }
  cfg.validate();
  return cfg;
}

// Built-in experiment presets. The files under configs/ carry the same text.
namespace presets {

inline constexpr std::string_view kPaperDefaults = R"(# Default experiment: FedLin, M = 50, N_i = 25, epsilon = 0.01.
name = paper_defaults
clients = 50
rollouts = 25
horizon = 5
epsilon = 0.01
rule = fedlin
step_size = 1e-4
local_steps = 10
rounds = 200
trials = 25
)";

inline constexpr std::string_view kFig1aM50 = R"(# One FedLin error curve at M = 50 (one line of the client-count figure).
name = fig1a_M50
clients = 50
rollouts = 25
epsilon = 0.01
rule = fedlin
step_size = 1e-4
local_steps = 10
rounds = 200
trials = 25
)";

inline constexpr std::string_view kFig1a = R"(# FedLin, varying the number of clients.
name = fig1a
rollouts = 25
epsilon = 0.01
rule = fedlin
rounds = 200
trials = 25
sweep_clients = 1, 10, 50, 100
)";

inline constexpr std::string_view kFig1b = R"(# FedLin, varying the rollouts per client.
name = fig1b
clients = 50
epsilon = 0.01
rule = fedlin
rounds = 200
trials = 25
sweep_rollouts = 25, 50, 100
)";

inline constexpr std::string_view kFig1c = R"(# FedLin, varying the heterogeneity level.
name = fig1c
clients = 50
rollouts = 25
rule = fedlin
rounds = 200
trials = 25
sweep_epsilon = 0.01, 0.1, 1
)";

inline constexpr std::string_view kFig2a = R"(# FedAvg (linearly decreasing step), varying the number of clients.
name = fig2a
rollouts = 25
epsilon = 0.01
rule = fedavg
rounds = 200
trials = 25
sweep_clients = 1, 10, 50, 100
)";

inline constexpr std::string_view kFig2b = R"(# FedAvg (linearly decreasing step), varying the rollouts per client.
name = fig2b
clients = 50
epsilon = 0.01
rule = fedavg
rounds = 200
trials = 25
sweep_rollouts = 25, 50, 100
)";

inline constexpr std::string_view kFig2c = R"(# FedAvg (linearly decreasing step), varying the heterogeneity level.
name = fig2c
clients = 50
rollouts = 25
rule = fedavg
rounds = 200
trials = 25
sweep_epsilon = 0.01, 0.1, 1
)";

inline constexpr std::string_view kFig3Compare = R"(# FedAvg (linearly decreasing step) against FedLin (constant step).
name = fig3_compare
clients = 50
rollouts = 25
epsilon = 0.01
local_steps = 10
step_size = 1e-4
step_schedule = auto
rounds = 200
trials = 25
sweep_rule = fedavg, fedlin
)";

inline const std::vector<std::pair<std::string_view, std::string_view>>& all() {
  static const std::vector<std::pair<std::string_view, std::string_view>> table = {
      {"paper_defaults", kPaperDefaults}, {"fig1a_M50", kFig1aM50}, {"fig1a", kFig1a},
      {"fig1b", kFig1b},                  {"fig1c", kFig1c},        {"fig2a", kFig2a},
      {"fig2b", kFig2b},                  {"fig2c", kFig2c},        {"fig3_compare", kFig3Compare},
  };
  return table;
}

inline std::optional<std::string_view> find(std::string_view name) {
  for (const auto& [key, text] : all()) {
    if (key == name) return text;
  }
  return std::nullopt;
}

}  // namespace presets

/// Loads a configuration from a file path, falling back to a built-in preset name.
inline ExperimentConfig load_config(const std::string& path_or_preset) {
  std::ifstream file(path_or_preset);
  if (file) {
    std::stringstream buffer;
    buffer << file.rdbuf();
    return parse_config(buffer.str(), path_or_preset);
  }
  if (auto text = presets::find(path_or_preset)) return parse_config(*text, std::string(path_or_preset));
  throw ConfigError("no config file or preset named '" + path_or_preset + "'");
}

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_matrix(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i > 0) out += "; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ' ';
      out += format_number(m(i, j));
    }
  }
  return out;
}

template <typename T, typename Fmt>
std::string format_list(const std::vector<T>& values, Fmt fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += fmt(values[i]);
  }
  return out;
}

}  // namespace detail

/// Fully resolved configuration as ordered `key = value` pairs; parse_config accepts
/// the same text back.
inline std::vector<std::pair<std::string, std::string>> resolved_entries(const ExperimentConfig& c) {
  using detail::format_number;
  auto size = [](std::size_t v) { return std::to_string(v); };
  auto rule = [](UpdateRule r) { return to_string(r); };
  std::vector<std::pair<std::string, std::string>> e = {
      {"name", c.name},
      {"n", std::to_string(c.n())},
      {"p", std::to_string(c.p())},
      {"A0", detail::format_matrix(c.A0)},
      {"B0", detail::format_matrix(c.B0)},
      {"V", detail::format_matrix(c.V)},
      {"U", detail::format_matrix(c.U)},
      {"epsilon", format_number(c.epsilon)},
      {"freeze_ensemble", c.freeze_ensemble ? "true" : "false"},
      {"clients", size(c.clients)},
      {"rollouts", size(c.rollouts)},
      {"horizon", size(c.horizon)},
      {"sigma_x", format_number(c.noise.sigma_x)},
      {"sigma_u", format_number(c.noise.sigma_u)},
      {"sigma_w", format_number(c.noise.sigma_w)},
      {"rule", to_string(c.rule)},
      {"step_schedule", to_string(c.schedule)},
      {"step_size", format_number(c.step_size)},
      {"rounds", size(c.rounds)},
      {"local_steps", size(c.local_steps)},
      {"participation", format_number(c.participation)},
      {"normalize_gradient", c.normalize_gradient ? "true" : "false"},
      {"trials", size(c.trials)},
      {"seed", std::to_string(c.master_seed())},
      {"delta", format_number(c.delta)},
  };
  if (!c.sweep_clients.empty()) e.emplace_back("sweep_clients", detail::format_list(c.sweep_clients, size));
  if (!c.sweep_rollouts.empty()) e.emplace_back("sweep_rollouts", detail::format_list(c.sweep_rollouts, size));
  if (!c.sweep_epsilon.empty()) {
    e.emplace_back("sweep_epsilon", detail::format_list(c.sweep_epsilon, [](double v) { return format_number(v); }));
  }
  if (!c.sweep_rule.empty()) e.emplace_back("sweep_rule", detail::format_list(c.sweep_rule, rule));
  return e;
}

}  // namespace fedsysid::experiments
