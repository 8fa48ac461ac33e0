#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "coulomb_hbt/cli.hpp"

namespace golden {

namespace fs = std::filesystem;

struct Case {
  std::string name;
  std::vector<std::string> args;
};

inline const std::vector<Case>& cases() {
  static const std::vector<Case> all{
      {"map", {"map", "--u-min", "0.01", "--u-max", "100", "--points", "9", "--approx"}},
      {"timemap",
       {"timemap", "--xi", "0nm,5nm,10nm,30nm", "--ef", "50keV", "--L", "100cm", "--ti-range", "1e-4,10", "--points",
        "41", "--approx"}},
      {"correlation",
       {"correlation", "--ef", "0.9keV", "--de", "0.13eV", "--L", "1cm", "--tbar", "0.002ns", "--tr", "tau_c",
        "--tmax", "10", "--points", "40"}},
      {"simulate",
       {"simulate", "--ef", "0.9keV", "--de", "0.13eV", "--L", "1cm", "--tbar", "0.002ns", "--pairs", "20000",
        "--seed", "5", "--bins", "20", "--workers", "2"}},
      {"scales_kot", {"scales", "--preset", "kot", "--r0", "45nm"}},
      {"scales_kiesel", {"scales", "--preset", "KIESEL", "--r0", "38nm"}},
      {"gamow", {"gamow", "--eta", "1"}},
  };
  return all;
}

inline fs::path root() { return fs::path(COULOMB_HBT_GOLDEN_DIR); }

inline bool updating() {
  const char* v = std::getenv("UPDATE_GOLDEN");
  return v && std::string(v) == "1";
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code = 0;
  std::string out;
  std::string err;
  fs::path dir;
};

inline Run run_in(const fs::path& dir, std::vector<std::string> args) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  args.insert(args.begin(), {"--out-dir", dir.string()});
  std::ostringstream out, err;
  Run r;
  r.code = coulomb_hbt::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  r.dir = dir;
  return r;
}

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '"' || c == ':' || c == '[' || c == ']' || c == '{' || c == '}') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
      out.push_back(std::string(1, c));
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline bool as_number(const std::string& s, double& v) {
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return !s.empty() && end == s.c_str() + s.size();
}

// Texts match when non-numeric tokens agree and numbers agree to rel_tol.
inline std::string compare_text(const std::string& expected, const std::string& actual, double rel_tol) {
  std::istringstream a(expected), b(actual);
  std::string la, lb;
  int line = 0;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(a, la));
    const bool gb = static_cast<bool>(std::getline(b, lb));
    ++line;
    if (!ga && !gb) return {};
    if (ga != gb) return "line count differs at line " + std::to_string(line);
    const auto ta = split_tokens(la), tb = split_tokens(lb);
    if (ta.size() != tb.size()) return "token count differs at line " + std::to_string(line) + ": " + lb;
    for (std::size_t k = 0; k < ta.size(); ++k) {
      double x, y;
      if (as_number(ta[k], x) && as_number(tb[k], y)) {
        if (std::abs(x - y) > rel_tol * std::max({std::abs(x), std::abs(y), 1e-300})) {
          return "line " + std::to_string(line) + ": " + ta[k] + " vs " + tb[k];
        }
      } else if (ta[k] != tb[k]) {
        return "line " + std::to_string(line) + ": '" + ta[k] + "' vs '" + tb[k] + "'";
      }
    }
  }
}

inline std::vector<std::string> listing(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

// Empty string on match; writes the golden set instead when UPDATE_GOLDEN=1.
inline std::string check_case(const Case& c, const fs::path& scratch, double rel_tol = 1e-9) {
  const auto r = run_in(scratch / c.name, c.args);
  if (r.code != 0) return "exit code " + std::to_string(r.code) + ": " + r.err;
  std::ofstream(r.dir / "stdout.txt", std::ios::binary) << r.out;
  const fs::path want = root() / c.name;
  if (updating()) {
    fs::remove_all(want);
    fs::create_directories(want);
    for (const auto& f : listing(r.dir)) fs::copy_file(r.dir / f, want / f);
    return {};
  }
  if (!fs::exists(want)) return "missing golden directory " + want.string();
  if (listing(want) != listing(r.dir)) return "file set differs";
  for (const auto& f : listing(want)) {
    if (f == coulomb_hbt::cli::kManifestName) continue;
    const auto diff = compare_text(slurp(want / f), slurp(r.dir / f), rel_tol);
    if (!diff.empty()) return f + ": " + diff;
  }
  return {};
}

}  // namespace golden
