#pragma once

// Error-curve CSV: `#`-prefixed metadata lines, then
//   rule,M,N_i,epsilon,round,e_r,std
// with one row per (curve, round) in input order and 12 significant digits.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fedsysid/errors.hpp"
#include "fedsysid/experiments/config.hpp"
#include "fedsysid/experiments/error_curve.hpp"

namespace fedsysid::experiments {

inline constexpr std::string_view kCurveCsvHeader = "rule,M,N_i,epsilon,round,e_r,std";

inline std::string format_sig12(double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

/// `#` metadata lines echoing the resolved configuration and the derived trial seeds.
inline std::vector<std::string> config_echo(const ExperimentConfig& cfg, std::span<const ErrorCurve> curves = {}) {
  std::vector<std::string> lines;
  lines.push_back("fedsysid error curves");
  for (const auto& [key, value] : resolved_entries(cfg)) lines.push_back(key + " = " + value);
  if (!curves.empty()) {
    std::string seeds;
    for (std::size_t k = 0; k < curves.front().trial_seeds.size(); ++k) {
      if (k > 0) seeds += ", ";
      seeds += std::to_string(curves.front().trial_seeds[k]);
    }
    lines.push_back("trial_seeds = " + seeds);
  }
  return lines;
}

inline std::string format_curves_csv(std::span<const ErrorCurve> curves, std::span<const std::string> comments = {}) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += kCurveCsvHeader;
  out += '\n';
  for (const auto& curve : curves) {
    const std::string prefix = to_string(curve.rule) + "," + std::to_string(curve.clients) + "," +
                               std::to_string(curve.rollouts) + "," + format_sig12(curve.epsilon) + ",";
    for (std::size_t r = 0; r < curve.e.size(); ++r) {
      out += prefix + std::to_string(r) + "," + format_sig12(curve.e[r]) + "," + format_sig12(curve.stdev[r]) + "\n";
    }
  }
  return out;
}

inline void write_curves_csv(std::span<const ErrorCurve> curves, const std::filesystem::path& path,
                             std::span<const std::string> comments = {}) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open CSV for writing", path.string());
  out << format_curves_csv(curves, comments);
  out.flush();
  if (!out) throw IoError("failed writing CSV", path.string());
}

/// One parsed data row.
struct CurveRow {
  std::string rule;
  std::size_t clients = 0;
  std::size_t rollouts = 0;
  double epsilon = 0.0;
  std::size_t round = 0;
  double e_r = 0.0;
  double stdev = 0.0;
};

inline std::vector<CurveRow> parse_curves_csv(const std::string& text) {
  std::vector<CurveRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  auto number = [&](const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw Error("curve CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kCurveCsvHeader) throw Error("curve CSV: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw Error("curve CSV line " + std::to_string(line_no) + ": expected 7 fields");
    rows.push_back({f[0], static_cast<std::size_t>(number(f[1])), static_cast<std::size_t>(number(f[2])),
                    number(f[3]), static_cast<std::size_t>(number(f[4])), number(f[5]), number(f[6])});
  }
  if (!header_seen) throw Error("curve CSV: missing header");
  return rows;
}

inline std::vector<CurveRow> read_curves_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open CSV for reading", path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_curves_csv(buffer.str());
}

}  // namespace fedsysid::experiments
