#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

using namespace fedsysid;
using namespace fedsysid::experiments;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "fedsysid_csv_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ErrorCurve synthetic_curve(UpdateRule rule, std::size_t rounds, double scale) {
  ErrorCurve c;
  c.rule = rule;
  c.clients = 50;
  c.rollouts = 25;
  c.epsilon = 0.01;
  for (std::size_t r = 0; r <= rounds; ++r) {
    c.e.push_back(scale * std::exp(-0.1 * static_cast<double>(r)) + 1.0 / 3.0);
    c.stdev.push_back(scale * 1e-3 / (1.0 + static_cast<double>(r)));
  }
  return c;
}

std::string run_command(const std::string& cmd, int& status) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    status = -1;
    return out;
  }
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) out += buf;
  status = pclose(pipe);
  return out;
}

}  // namespace

TEST(CurvesCsv, HeaderAndRowCount) {
  const std::vector<ErrorCurve> curves{synthetic_curve(UpdateRule::kFedLin, 1, 1.0)};
  const auto path = scratch("one.csv");
  write_curves_csv(curves, path);
  const std::string text = slurp(path);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "rule,M,N_i,epsilon,round,e_r,std");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(read_curves_csv(path).size(), 2u);
}

TEST(CurvesCsv, EmptyListIsHeaderOnly) {
  const auto path = scratch("empty.csv");
  write_curves_csv(std::vector<ErrorCurve>{}, path);
  EXPECT_EQ(slurp(path), "rule,M,N_i,epsilon,round,e_r,std\n");
  EXPECT_TRUE(read_curves_csv(path).empty());
}

TEST(CurvesCsv, RoundTripPrecision) {
  const std::vector<ErrorCurve> curves{synthetic_curve(UpdateRule::kFedAvg, 30, 2.7),
                                       synthetic_curve(UpdateRule::kFedLin, 30, 0.123456789)};
  const std::vector<std::string> comments{"seed = 5"};
  const auto rows = parse_curves_csv(format_curves_csv(curves, comments));
  ASSERT_EQ(rows.size(), 62u);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const ErrorCurve& c = curves[k / 31];
    const std::size_t r = k % 31;
    EXPECT_EQ(rows[k].rule, to_string(c.rule));
    EXPECT_EQ(rows[k].round, r);
    EXPECT_EQ(rows[k].clients, 50u);
    // 12 significant digits: relative error at most half a unit in the 12th digit.
    EXPECT_LE(std::abs(rows[k].e_r - c.e[r]), 5e-12 * std::abs(c.e[r]));
    EXPECT_LE(std::abs(rows[k].stdev - c.stdev[r]), 5e-12 * std::abs(c.stdev[r]));
  }
}

TEST(CurvesCsv, DeterministicRowOrder) {
  const std::vector<ErrorCurve> curves{synthetic_curve(UpdateRule::kFedAvg, 5, 1.0),
                                       synthetic_curve(UpdateRule::kFedLin, 5, 1.0)};
  EXPECT_EQ(format_curves_csv(curves), format_curves_csv(curves));
  const auto rows = parse_curves_csv(format_curves_csv(curves));
  EXPECT_EQ(rows.front().rule, "FedAvg");
  EXPECT_EQ(rows.back().rule, "FedLin");
}

TEST(CurvesCsv, CommentsArePrefixed) {
  const std::vector<std::string> comments{"name = x", "seed = 3"};
  const std::string text = format_curves_csv(std::vector<ErrorCurve>{}, comments);
  EXPECT_EQ(text.rfind("# name = x\n# seed = 3\nrule,", 0), 0u);
}

TEST(CurvesCsv, IoErrorsNamePath) {
  const std::string bad = "/nonexistent_dir_fedsysid/x.csv";
  try {
    write_curves_csv(std::vector<ErrorCurve>{}, bad);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), bad);
  }
  EXPECT_THROW(read_curves_csv(bad), IoError);
  EXPECT_THROW(parse_curves_csv("wrong,header\n"), Error);
}

TEST(PlotScript, ReferencesCsvAndIsDeterministic) {
  const auto csv = scratch("plot_input.csv");
  write_curves_csv(std::vector<ErrorCurve>{synthetic_curve(UpdateRule::kFedLin, 3, 1.0)}, csv);
  const auto a = scratch("a_plot.py");
  const auto b = scratch("b_plot.py");
  emit_plot_script(csv, a);
  emit_plot_script(csv, b);
  const std::string text = slurp(a);
  EXPECT_EQ(text, slurp(b));
  EXPECT_NE(text.find("CSV_PATH = \"" + csv.string() + "\""), std::string::npos);
  EXPECT_NE(text.find("set_yscale(\"log\")"), std::string::npos);
}

TEST(PlotScript, MissingCsvIsError) {
  EXPECT_THROW(emit_plot_script(scratch("does_not_exist.csv"), scratch("x_plot.py")), IoError);
}

TEST(PlotScript, RunsAndReportsEachCurve) {
  if (std::system("python3 -c pass > /dev/null 2>&1") != 0) GTEST_SKIP() << "python3 not available";
  const auto csv = scratch("two_curves.csv");
  write_curves_csv(std::vector<ErrorCurve>{synthetic_curve(UpdateRule::kFedAvg, 40, 2.0),
                                           synthetic_curve(UpdateRule::kFedLin, 40, 1.0)},
                   csv);
  const auto script = scratch("two_curves_plot.py");
  emit_plot_script(csv, script);
  int status = 0;
  const std::string out = run_command("python3 " + script.string() + " 2>&1", status);
  ASSERT_EQ(status, 0) << out;
  EXPECT_NE(out.find("curve rule=FedAvg M=50 N_i=25 epsilon=0.01 points=41"), std::string::npos) << out;
  EXPECT_NE(out.find("curve rule=FedLin M=50 N_i=25 epsilon=0.01 points=41"), std::string::npos) << out;
}
