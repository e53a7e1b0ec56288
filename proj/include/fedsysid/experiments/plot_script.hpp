#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "fedsysid/errors.hpp"

namespace fedsysid::experiments {

namespace detail {

inline std::string python_string_literal(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\\' || c == '"') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// Text of a standalone Python script that plots every curve of `csv_path` on a log scale.
///
/// The script prints one summary line per curve, then writes `<csv stem>.png` next to
/// the CSV if matplotlib is importable.
inline std::string plot_script_text(const std::string& csv_path) {
  std::string s;
  s += "#!/usr/bin/env python3\n";
  s += "# Generated by fedsysid. Plots e_r against the global round on a log scale.\n";
  s += "import csv\n";
  s += "import os\n";
  s += "import sys\n";
  s += "\n";
  s += "CSV_PATH = " + detail::python_string_literal(csv_path) + "\n";
  s += "\n";
  s += "\n";
  s += "def load_curves(path):\n";
  s += "    curves = {}\n";
  s += "    with open(path, newline=\"\") as handle:\n";
  s += "        rows = csv.DictReader(line for line in handle if not line.startswith(\"#\"))\n";
  s += "        for row in rows:\n";
  s += "            key = (row[\"rule\"], row[\"M\"], row[\"N_i\"], row[\"epsilon\"])\n";
  s += "            curves.setdefault(key, []).append((int(row[\"round\"]), float(row[\"e_r\"])))\n";
  s += "    return curves\n";
  s += "\n";
  s += "\n";
  s += "def main():\n";
  s += "    path = sys.argv[1] if len(sys.argv) > 1 else CSV_PATH\n";
  s += "    curves = load_curves(path)\n";
  s += "    for (rule, m, n_i, eps), points in curves.items():\n";
  s += "        print(\"curve rule=%s M=%s N_i=%s epsilon=%s points=%d final_e_r=%.12g\"\n";
  s += "              % (rule, m, n_i, eps, len(points), points[-1][1]))\n";
  s += "    try:\n";
  s += "        import matplotlib\n";
  s += "        matplotlib.use(\"Agg\")\n";
  s += "        import matplotlib.pyplot as plt\n";
  s += "    except ImportError:\n";
  s += "        print(\"matplotlib not available; figure skipped\")\n";
  s += "        return 0\n";
  s += "    fig, ax = plt.subplots(figsize=(6, 4))\n";
  s += "    for (rule, m, n_i, eps), points in curves.items():\n";
  s += "        rounds = [r for r, _ in points]\n";
  s += "        errors = [e for _, e in points]\n";
  s += "        ax.plot(rounds, errors, label=\"%s M=%s N_i=%s eps=%s\" % (rule, m, n_i, eps))\n";
  s += "    ax.set_yscale(\"log\")\n";
  s += "    ax.set_xlabel(\"global round r\")\n";
  s += "    ax.set_ylabel(\"e_r\")\n";
  s += "    ax.grid(True, which=\"both\", alpha=0.3)\n";
  s += "    ax.legend()\n";
  s += "    fig.tight_layout()\n";
  s += "    png = os.path.splitext(path)[0] + \".png\"\n";
  s += "    fig.savefig(png, dpi=150)\n";
  s += "    print(\"wrote \" + png)\n";
  s += "    return 0\n";
  s += "\n";
  s += "\n";
  s += "if __name__ == \"__main__\":\n";
  s += "    sys.exit(main())\n";
  return s;
}

inline void emit_plot_script(const std::filesystem::path& csv_path, const std::filesystem::path& out_path) {
  if (!std::filesystem::exists(csv_path)) throw IoError("curve CSV does not exist", csv_path.string());
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open plot script for writing", out_path.string());
  out << plot_script_text(csv_path.string());
  out.flush();
  if (!out) throw IoError("failed writing plot script", out_path.string());
}

}  // namespace fedsysid::experiments
