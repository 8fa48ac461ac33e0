#pragma once

// Command-line front end.
//
//   coulomb_hbt [--config FILE] [--out-dir DIR] [--format csv|json] <command> [flags]
//   coulomb_hbt --replay DIR/run-manifest.json [--out-dir DIR]
//
// Commands: scales, map, timemap, correlation, simulate, gamow. Dimensioned
// flags take unit-suffixed values ("50keV", "100cm", "0.2ns"). A config file
// holds flat `key = value` lines, one per flag; flags given on the command
// line win. Every successful run writes run-manifest.json next to its outputs.
//
// Exit codes: 0 success, 2 usage, 3 numerical configuration, 4 internal
// invariant violation.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coulomb_hbt/constants.hpp"
#include "coulomb_hbt/csv.hpp"
#include "coulomb_hbt/dynamics.hpp"
#include "coulomb_hbt/error.hpp"
#include "coulomb_hbt/montecarlo.hpp"
#include "coulomb_hbt/scales.hpp"
#include "coulomb_hbt/statistics.hpp"
#include "coulomb_hbt/units.hpp"

namespace coulomb_hbt::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

inline constexpr std::string_view kToolName = "coulomb_hbt";
inline constexpr std::string_view kOutputDirEnv = "COULOMB_HBT_OUTPUT_DIR";
inline constexpr std::string_view kManifestName = "run-manifest.json";

enum ExitCode : int { ok = 0, usage = 2, numerical = 3, internal = 4 };

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Options {
  std::string config;
  std::string replay;
  std::string out_dir;
  std::string format = "csv";

  // beam
  std::string ef, de, l, r0, tbar;

  // scales
  std::string preset;
  double negligible_above = 100.0;
  double dominant_at_or_below = 3.0;

  // map
  double u_min = 0.01;
  double u_max = 100.0;
  int points = 200;
  bool approx = false;

  // timemap
  std::vector<double> xi_over_sc;
  std::vector<std::string> xi;
  std::vector<double> ti_range{1e-3, 10.0};

  // correlation
  std::string tr = "tau_c";
  double tmax = 10.0;
  double x_over_sc = 0.0;
  std::string map_kind = "both";
  std::uint64_t mc_pairs = 0;
  std::size_t mc_bins = 50;

  // simulate
  std::uint64_t pairs = 0;
  std::uint64_t seed = 1;
  std::string transverse = "point";
  std::string offset;
  double hist_min = 0.5;
  double hist_max = 40.0;
  std::size_t bins = 100;
  std::string spacing = "log";
  unsigned workers = 1;

  // gamow
  std::optional<double> eta;
  std::string vrel;
  int z = -1;
  int zprime = -1;
};

struct Context {
  fs::path out_dir;
  std::string format;
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> outputs;
  std::optional<std::uint64_t> seed;
};

namespace detail {

template <class Q>
Q quantity(const std::string& text, const char* flag) {
  try {
    return parse_as<Q>(text);
  } catch (const DimensionError& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  } catch (const ParseError& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw UsageError(message);
}

inline ordered_json table_json(const csv::Table& t) {
  ordered_json j;
  ordered_json cols = ordered_json::array();
  for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}});
  j["columns"] = cols;
  if (t.normalization) j["normalization"] = *t.normalization;
  ordered_json params = ordered_json::object();
  for (const auto& [k, v] : t.params) params[k] = v;
  j["params"] = params;
  j["comments"] = t.comments;
  j["rows"] = t.rows;
  return j;
}

inline void write_text(Context& ctx, const std::string& name, const std::string& text) {
  const fs::path path = ctx.out_dir / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  ctx.outputs.push_back(name);
}

inline void write_table(Context& ctx, const std::string& stem, const csv::Table& t) {
  if (ctx.format == "json") {
    write_text(ctx, stem + ".json", table_json(t).dump(2) + "\n");
  } else {
    write_text(ctx, stem + ".csv", csv::to_string(t));
  }
}

inline std::vector<double> log_space(double a, double b, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] = a * std::pow(b / a, static_cast<double>(k) / (n - 1));
  }
  out.front() = a;
  out.back() = b;
  return out;
}

inline BeamParameters full_beam(const Options& o) {
  require(!o.ef.empty() && !o.de.empty() && !o.l.empty(), "--ef, --de and --L are all required");
  BeamParameters b{quantity<Energy>(o.ef, "--ef"), quantity<Energy>(o.de, "--de"),
                   quantity<Length>(o.l, "--L")};
  if (!o.r0.empty()) b.r0 = quantity<Length>(o.r0, "--r0");
  if (!o.tbar.empty()) b.t_bar = quantity<Time>(o.tbar, "--tbar");
  b.validate();
  return b;
}

/// Coulomb scale from --ef and --L when both are given.
inline std::optional<CoulombScale> optional_scale(const Options& o) {
  require(o.ef.empty() == o.l.empty(), "--ef and --L must be given together");
  if (o.ef.empty()) return std::nullopt;
  return critical_scale(quantity<Energy>(o.ef, "--ef"), quantity<Length>(o.l, "--L"));
}

/// "--tr" accepts a time ("0.4ps") or a multiple of tau_c ("tau_c", "0.5tau_c").
inline double resolution_over_tau_c(const std::string& text, const CoulombScale& sc) {
  constexpr std::string_view suffix = "tau_c";
  if (text.size() >= suffix.size() && text.compare(text.size() - suffix.size(), suffix.size(), suffix) == 0) {
    const std::string number = trim(text.substr(0, text.size() - suffix.size()));
    if (number.empty()) return 1.0;
    double k = 0.0;
    const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), k);
    require(ec == std::errc{} && ptr == number.data() + number.size(), "--tr: cannot parse '" + text + "'");
    return k;
  }
  return quantity<Time>(text, "--tr") / sc.tau_c;
}

inline void print_warnings(Context& ctx, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) ctx.err << "warning: " << w << '\n';
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline void cmd_scales(const Options& o, Context& ctx) {
  const bool any_beam = !o.ef.empty() || !o.de.empty() || !o.l.empty();
  detail::require(o.preset.empty() || !any_beam, "--preset excludes --ef/--de/--L");
  detail::require(!o.preset.empty() || any_beam, "give --preset or --ef, --de and --L");
  const RegimeThresholds th{o.negligible_above, o.dominant_at_or_below};
  std::optional<Length> r0;
  if (!o.r0.empty()) r0 = detail::quantity<Length>(o.r0, "--r0");

  RegimeReport report;
  if (!o.preset.empty()) {
    const ExperimentPreset* preset = nullptr;
    try {
      preset = &find_preset(o.preset);
    } catch (const ParseError& e) {
      throw UsageError(e.what());
    }
    report = regime_report(*preset, r0, th);
  } else {
    const BeamParameters beam = detail::full_beam(o);
    detail::print_warnings(ctx, beam.warnings());
    report = regime_report("custom", {beam}, th);
  }
  const ordered_json j = to_json(report);
  detail::write_text(ctx, "scales.json", j.dump(2) + "\n");
  if (ctx.format == "json") {
    ctx.out << j.dump(2) << '\n';
  } else {
    ctx.out << to_text(report);
  }
}

inline void cmd_map(const Options& o, Context& ctx) {
  detail::require(o.u_min > 0.0 && o.u_max > o.u_min, "map: need 0 < --u-min < --u-max");
  detail::require(o.points >= 2, "map: --points must be at least 2");
  const auto sc = detail::optional_scale(o);

  csv::Table t;
  t.columns = {{"s_i/s_c", "1"}, {"sigma", "1"}, {"s_f/s_c", "1"}};
  if (o.approx) t.columns.push_back({"s_f_approx/s_c", "1"});
  if (sc) {
    t.columns.push_back({"s_i", "nm"});
    t.columns.push_back({"s_f", "nm"});
    if (o.approx) t.columns.push_back({"s_f_approx", "nm"});
    t.params.emplace_back("s_c_nm", csv::format_double(sc->s_c.canonical()));
  }
  t.params.emplace_back("map", o.approx ? "exact+approximate" : "exact");

  std::size_t argmin = 0;
  for (double u : detail::log_space(o.u_min, o.u_max, o.points)) {
    const double sigma = map_sigma_exact(u);
    std::vector<double> row{u, sigma, u * sigma};
    if (o.approx) row.push_back(u * map_sigma_approx(u));
    if (sc) {
      const double s_c = sc->s_c.canonical();
      row.push_back(u * s_c);
      row.push_back(u * sigma * s_c);
      if (o.approx) row.push_back(u * map_sigma_approx(u) * s_c);
    }
    if (!t.rows.empty() && row[2] < t.rows[argmin][2]) argmin = t.rows.size();
    t.rows.push_back(std::move(row));
  }
  const auto& hole = coulomb_hole();
  t.comments.push_back("grid minimum: row=" + std::to_string(argmin) +
                       " s_i/s_c=" + csv::format_double(t.rows[argmin][0]) +
                       " s_f/s_c=" + csv::format_double(t.rows[argmin][2]));
  t.comments.push_back("coulomb hole: s_i/s_c=" + csv::format_double(hole.u_star) +
                       " s_f/s_c=" + csv::format_double(hole.floor));
  detail::write_table(ctx, "map", t);
}

inline void cmd_timemap(const Options& o, Context& ctx) {
  detail::require(o.xi_over_sc.empty() != o.xi.empty(), "timemap: give exactly one of --xi-over-sc or --xi");
  detail::require(o.ti_range.size() == 2 && o.ti_range[0] > 0.0 && o.ti_range[1] > o.ti_range[0],
                  "timemap: --ti-range must be two increasing positive numbers");
  detail::require(o.points >= 2, "timemap: --points must be at least 2");
  const auto sc = detail::optional_scale(o);
  detail::require(o.xi.empty() || sc.has_value(), "timemap: --xi needs --ef and --L");

  std::vector<double> xs = o.xi_over_sc;
  for (const auto& s : o.xi) xs.push_back(detail::quantity<Length>(s, "--xi") / sc->s_c);
  for (double x : xs) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("timemap: x_i must be non-negative");
  }

  std::vector<TimeMap> maps;
  csv::Table t;
  t.columns = {{"t_i/tau_c", "1"}};
  if (sc) t.columns.push_back({"t_i", "ns"});
  const std::vector<MapKind> kinds =
      o.approx ? std::vector<MapKind>{MapKind::exact, MapKind::approximate} : std::vector<MapKind>{MapKind::exact};
  for (MapKind k : kinds) {
    for (double x : xs) {
      maps.emplace_back(x, k);
      const std::string tag = k == MapKind::exact ? "" : "_approx";
      t.columns.push_back({"t_f" + tag + "/tau_c(x_i/s_c=" + csv::format_double(x) + ")", "1"});
      if (sc) t.columns.push_back({"t_f" + tag + "(x_i/s_c=" + csv::format_double(x) + ")", "ns"});
    }
  }
  if (sc) {
    t.params.emplace_back("s_c_nm", csv::format_double(sc->s_c.canonical()));
    t.params.emplace_back("tau_c_ns", csv::format_double(sc->tau_c.canonical()));
  }
  for (double ti : detail::log_space(o.ti_range[0], o.ti_range[1], o.points)) {
    std::vector<double> row{ti};
    if (sc) row.push_back(ti * sc->tau_c.canonical());
    for (const auto& m : maps) {
      const double tf = m(ti);
      row.push_back(tf);
      if (sc) row.push_back(tf * sc->tau_c.canonical());
    }
    t.rows.push_back(std::move(row));
  }
  for (const auto& m : maps) {
    for (const auto& tp : m.turning_points()) {
      t.comments.push_back(std::string(to_string(m.kind())) + " x_i/s_c=" + csv::format_double(m.x_over_sc()) +
                           ": turning point t_i/tau_c=" + csv::format_double(tp.t) +
                           " t_f/tau_c=" + csv::format_double(tp.value));
    }
  }
  detail::write_table(ctx, "timemap", t);
}

/// Correlation on [0, tmax] in units of tau_c, for one map.
struct CorrelationCurves {
  std::vector<double> p, p_conv, c, c_conv;
  double normalization;
  double floor;
  std::vector<std::string> warnings;
};

inline CorrelationCurves correlation_curves(const std::vector<double>& plot, double t_bar, double t_r,
                                            const TimeMap& map) {
  const double plot_step = plot.size() > 1 ? plot[1] - plot[0] : plot.back();
  GridSpec spec;
  spec.t_max = plot.back() + 8.0 * t_r;
  spec.max_spacing = plot_step / 2.0;
  spec.anchors = map.structure_values();
  std::vector<double> grid = make_time_grid(spec);
  grid.insert(grid.end(), plot.begin(), plot.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  GridFunction p = pushforward_density(grid, t_bar, map);
  const double tail = interval_probability(grid.back(), std::numeric_limits<double>::infinity(), t_bar, map);
  CorrelationCurves out;
  out.normalization = p.normalization + tail;
  out.floor = map.infimum();
  for (const auto& w : p.warnings) {
    if (w.rfind("grid ends before", 0) != 0) out.warnings.push_back(w);
  }
  if (std::abs(out.normalization - 1.0) > 1e-2) {
    throw InvariantError("correlation: density normalization " + csv::format_double(out.normalization) +
                         " deviates from 1");
  }
  const GridFunction c = correlation_function(p, t_bar);
  const GridFunction p_conv = convolve_resolution(p, t_r);
  const GridFunction c_conv = convolve_resolution(c, t_r);
  for (double t : plot) {
    const auto i = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), t) - grid.begin());
    out.p.push_back(p.values[i]);
    out.p_conv.push_back(p_conv.values[i]);
    out.c.push_back(c.values[i]);
    out.c_conv.push_back(c_conv.values[i]);
  }
  return out;
}

inline void cmd_correlation(const Options& o, Context& ctx) {
  detail::require(!o.tbar.empty(), "correlation: --tbar is required");
  detail::require(o.tmax > 0.0 && o.points >= 2, "correlation: need --tmax > 0 and --points >= 2");
  detail::require(o.x_over_sc >= 0.0, "correlation: --x-over-sc must be non-negative");
  detail::require(o.map_kind == "exact" || o.map_kind == "approx" || o.map_kind == "both",
                  "correlation: --map must be exact, approx or both");
  const BeamParameters beam = detail::full_beam(o);
  detail::print_warnings(ctx, beam.warnings());
  const CoulombScale sc = critical_scale(beam);
  const double tau = sc.tau_c.canonical();
  const double t_bar = *beam.t_bar / sc.tau_c;
  const double t_r = detail::resolution_over_tau_c(o.tr, sc);
  if (!(t_r > 0.0)) throw DomainError("correlation: --tr must be positive");

  std::vector<double> plot(static_cast<std::size_t>(o.points) + 1);
  for (std::size_t k = 0; k < plot.size(); ++k) plot[k] = o.tmax * static_cast<double>(k) / o.points;

  std::vector<MapKind> kinds;
  if (o.map_kind != "approx") kinds.push_back(MapKind::exact);
  if (o.map_kind != "exact") kinds.push_back(MapKind::approximate);

  csv::Table t;
  t.columns = {{"t_f/tau_c", "1"}, {"t_f", "ns"}};
  t.params = {{"t_bar_over_tau_c", csv::format_double(t_bar)},
              {"t_r_over_tau_c", csv::format_double(t_r)},
              {"x_i_over_s_c", csv::format_double(o.x_over_sc)},
              {"tau_c_ns", csv::format_double(tau)},
              {"s_c_nm", csv::format_double(sc.s_c.canonical())}};
  std::vector<CorrelationCurves> curves;
  for (MapKind k : kinds) {
    const std::string tag(k == MapKind::exact ? "exact" : "approx");
    curves.push_back(correlation_curves(plot, t_bar, t_r, TimeMap(o.x_over_sc, k)));
    const auto& cv = curves.back();
    for (const char* name : {"P*t_bar", "P~*t_bar", "C", "C~"}) {
      t.columns.push_back({std::string(name) + "(" + tag + ")", "1"});
    }
    t.params.emplace_back("normalization_" + tag, csv::format_double(cv.normalization));
    t.comments.push_back(tag + " map: hole floor t_f/tau_c=" + csv::format_double(cv.floor));
    for (const auto& w : cv.warnings) t.comments.push_back(tag + " map: " + w);
    detail::print_warnings(ctx, cv.warnings);
  }
  t.normalization = curves.front().normalization;
  for (std::size_t r = 0; r < plot.size(); ++r) {
    std::vector<double> row{plot[r], plot[r] * tau};
    for (const auto& cv : curves) {
      row.insert(row.end(), {cv.p[r] * t_bar, cv.p_conv[r] * t_bar, cv.c[r], cv.c_conv[r]});
    }
    t.rows.push_back(std::move(row));
  }
  detail::write_table(ctx, "correlation", t);

  if (o.mc_pairs > 0) {
    SimulationConfig cfg;
    cfg.beam = beam;
    cfg.n_pairs = o.mc_pairs;
    cfg.seed = o.seed;
    ctx.seed = o.seed;
    cfg.workers = o.workers;
    if (o.x_over_sc > 0.0) cfg.transverse = FixedOffset{sc.s_c * o.x_over_sc};
    cfg.histogram = {Time::from_canonical(0.0), sc.tau_c * o.tmax, o.mc_bins, BinSpacing::linear};
    const SimulationResult r = run_simulation(cfg);
    const TimeMap exact(o.x_over_sc, MapKind::exact);
    csv::Table m;
    m.columns = {{"t_lo/tau_c", "1"}, {"t_hi/tau_c", "1"}, {"count", "1"},
                 {"C_mc", "1"},       {"C_mc_stderr", "1"}, {"C_expected", "1"}};
    m.params = {{"n_pairs", std::to_string(cfg.n_pairs)}, {"seed", std::to_string(cfg.seed)},
                {"map", "exact"}};
    m.comments.push_back("smallest t_f/tau_c=" + csv::format_double(r.summary.hole_floor_time / sc.tau_c));
    const auto bins = histogram_correlation(r.t_f, *beam.t_bar);
    for (std::size_t k = 0; k < bins.size(); ++k) {
      const double a = bins[k].t_lo / tau, b = bins[k].t_hi / tau;
      const double p0 = std::exp(-a / t_bar) * -std::expm1(-(b - a) / t_bar);
      m.rows.push_back({a, b, static_cast<double>(r.t_f.counts()[k]), bins[k].c, bins[k].stderr_c,
                        interval_probability(a, b, t_bar, exact) / p0});
    }
    detail::write_table(ctx, "correlation-mc", m);
  }
}

inline void cmd_simulate(const Options& o, Context& ctx) {
  detail::require(!o.tbar.empty(), "simulate: --tbar is required");
  detail::require(o.pairs >= 1, "simulate: --pairs must be at least 1");
  detail::require(o.spacing == "log" || o.spacing == "linear", "simulate: --spacing must be log or linear");
  const BeamParameters beam = detail::full_beam(o);
  detail::print_warnings(ctx, beam.warnings());
  const CoulombScale sc = critical_scale(beam);

  SimulationConfig cfg;
  cfg.beam = beam;
  cfg.n_pairs = o.pairs;
  cfg.seed = o.seed;
  ctx.seed = o.seed;
  cfg.workers = o.workers;
  if (o.transverse == "point") {
    detail::require(o.offset.empty() && o.r0.empty(), "simulate: point transverse model takes no --offset/--r0");
    cfg.transverse = PointSource{};
  } else if (o.transverse == "fixed") {
    detail::require(!o.offset.empty(), "simulate: fixed transverse model needs --offset");
    cfg.transverse = FixedOffset{detail::quantity<Length>(o.offset, "--offset")};
  } else if (o.transverse == "disk") {
    detail::require(beam.r0.has_value(), "simulate: disk transverse model needs --r0");
    cfg.transverse = GaussianDisk{*beam.r0};
  } else {
    throw UsageError("simulate: --transverse must be point, fixed or disk");
  }
  cfg.histogram = {sc.tau_c * o.hist_min, sc.tau_c * o.hist_max, o.bins,
                   o.spacing == "log" ? BinSpacing::log : BinSpacing::linear};

  const SimulationResult r = run_simulation(cfg);
  ordered_json summary = to_json(r.summary);
  summary["tau_c"] = sc.tau_c.canonical();
  if (std::holds_alternative<PointSource>(cfg.transverse)) {
    const double floor = coulomb_hole().floor * sc.tau_c.canonical();
    summary["analytic_hole_floor_time"] = floor;
    if (r.summary.hole_floor_time.canonical() < floor * (1.0 - 1e-12)) {
      throw InvariantError("simulate: sample below the analytic Coulomb-hole floor");
    }
  }
  summary["transverse"] = to_string(cfg.transverse);

  auto tf = to_table(r.t_f, sc, "t_f");
  tf.params.emplace_back("seed", std::to_string(cfg.seed));
  auto ti = to_table(r.t_i, sc, "t_i");
  ti.params.emplace_back("seed", std::to_string(cfg.seed));
  detail::write_table(ctx, "histogram-tf", tf);
  detail::write_table(ctx, "histogram-ti", ti);
  detail::write_text(ctx, "summary.json", summary.dump(2) + "\n");
  ctx.out << summary.dump(2) << '\n';
}

inline void cmd_gamow(const Options& o, Context& ctx) {
  const bool has_eta = o.eta.has_value();
  const bool has_v = !o.vrel.empty();
  detail::require(has_eta != has_v, "gamow: give exactly one of --eta or --vrel");
  const double eta = has_eta ? *o.eta : coulomb_eta(detail::quantity<Velocity>(o.vrel, "--vrel"), o.z, o.zprime);
  const double g = gamow_factor(eta);
  ordered_json j{{"eta", eta}, {"gamow_factor", g}};
  detail::write_text(ctx, "gamow.json", j.dump(2) + "\n");
  ctx.out << csv::format_double(g) << '\n';
}

// ---------------------------------------------------------------------------
// Driver

namespace detail {

/// Value of `--name X` or `--name=X` in args, if present.
inline std::optional<std::string> find_flag_value(const std::vector<std::string>& args, const std::string& name) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == name && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind(name + "=", 0) == 0) return args[i].substr(name.size() + 1);
  }
  return std::nullopt;
}

inline bool has_flag(const std::vector<std::string>& args, const std::string& name) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == name || a.rfind(name + "=", 0) == 0; });
}

inline bool is_flag(const CLI::Option* opt) { return opt->get_type_size() == 0; }

/// Flat `key = value` lines; '#' and ';' start comments.
inline std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(n) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

/// Prepends config values for flags that the command line does not set.
inline std::vector<std::string> inject_config(const std::vector<std::string>& args, CLI::App& app,
                                              const CLI::App* sub, const fs::path& path, std::ostream& err) {
  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config(path)) {
    const std::string name = "--" + key;
    const CLI::Option* opt = sub ? sub->get_option_no_throw(name) : nullptr;
    if (!opt) opt = app.get_option_no_throw(name);
    if (!opt || key == "config" || key == "replay") {
      err << "warning: config key '" << key << "' is not a flag of this command; ignored\n";
      continue;
    }
    if (has_flag(args, name)) continue;
    if (is_flag(opt)) {
      if (value == "true" || value == "1") injected.push_back(name);
      continue;
    }
    injected.push_back(name);
    injected.push_back(value);
  }
  // Global flags go before the subcommand, command flags after it.
  std::vector<std::string> out;
  std::vector<std::string> sub_flags, global_flags;
  for (std::size_t i = 0; i < injected.size(); ++i) {
    const bool global = sub == nullptr || !sub->get_option_no_throw(injected[i]);
    auto& dst = global ? global_flags : sub_flags;
    dst.push_back(injected[i]);
    const CLI::Option* opt = global ? app.get_option_no_throw(injected[i]) : sub->get_option_no_throw(injected[i]);
    if (!is_flag(opt)) dst.push_back(injected[++i]);
  }
  out.insert(out.end(), global_flags.begin(), global_flags.end());
  out.insert(out.end(), args.begin(), args.end());
  out.insert(out.end(), sub_flags.begin(), sub_flags.end());
  return out;
}

/// Every option of the command with its resolved value, defaults included.
inline ordered_json resolved_arguments(const CLI::App& sub) {
  ordered_json args = ordered_json::object();
  const auto record = [&](const CLI::Option* opt) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name == "replay" || name == "out-dir") return;
    if (opt->count() > 0) {
      if (is_flag(opt)) {
        args[name] = true;
        return;
      }
      std::string joined;
      for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
      args[name] = joined;
    } else if (!is_flag(opt) && !opt->get_default_str().empty()) {
      std::string d = opt->get_default_str();
      if (d.size() >= 2 && d.front() == '[' && d.back() == ']') d = d.substr(1, d.size() - 2);
      args[name] = d;
    }
  };
  for (const auto* opt : sub.get_options()) record(opt);
  return args;
}

inline std::vector<std::string> args_from_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read manifest " + path.string());
  ordered_json m;
  try {
    m = ordered_json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed manifest " + path.string() + ": " + e.what());
  }
  if (!m.contains("command") || !m.contains("arguments")) {
    throw UsageError("manifest " + path.string() + " lacks command/arguments");
  }
  std::vector<std::string> globals, local;
  const auto& g = m.value("global_arguments", ordered_json::object());
  for (const auto& [k, v] : g.items()) {
    globals.push_back("--" + k);
    globals.push_back(v.get<std::string>());
  }
  for (const auto& [k, v] : m["arguments"].items()) {
    if (v.is_boolean()) {
      if (v.get<bool>()) local.push_back("--" + k);
      continue;
    }
    local.push_back("--" + k);
    local.push_back(v.get<std::string>());
  }
  globals.push_back(m["command"].get<std::string>());
  globals.insert(globals.end(), local.begin(), local.end());
  return globals;
}

}  // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Coulomb effects in electron-beam HBT correlations", std::string(kToolName)};
  app.set_help_all_flag("--help-all", "Show help for all commands");
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.add_option("--config", o.config, "Flat key = value file; command-line flags win");
  app.add_option("--replay", o.replay, "Re-run the command recorded in a run-manifest.json");
  app.add_option("--out-dir", o.out_dir, "Output directory (default: $COULOMB_HBT_OUTPUT_DIR or .)");
  app.add_option("--format", o.format, "Data file format")->check(CLI::IsMember({"csv", "json"}));

  const auto beam_flags = [&](CLI::App* s, bool with_r0, bool with_tbar) {
    s->add_option("--ef", o.ef, "Final beam energy, e.g. 50keV");
    s->add_option("--de", o.de, "Initial energy spread, e.g. 0.17eV");
    s->add_option("--L", o.l, "Tip-to-detector distance, e.g. 100cm");
    if (with_r0) s->add_option("--r0", o.r0, "Transverse source size, e.g. 45nm");
    if (with_tbar) s->add_option("--tbar", o.tbar, "Mean emission interval, e.g. 0.2ns");
  };

  auto* scales = app.add_subcommand("scales", "HBT and Coulomb scales with regime verdicts");
  scales->add_option("--preset", o.preset, "kot or kiesel (case-insensitive)");
  beam_flags(scales, true, false);
  scales->add_option("--negligible-above", o.negligible_above, "Ratio above which Coulomb effects are negligible");
  scales->add_option("--dominant-at-or-below", o.dominant_at_or_below, "Ratio at or below which they dominate");

  auto* map = app.add_subcommand("map", "Final vs initial separation, s_f/s_c against s_i/s_c");
  map->add_option("--u-min", o.u_min, "Smallest s_i/s_c");
  map->add_option("--u-max", o.u_max, "Largest s_i/s_c");
  map->add_option("--points", o.points, "Number of log-spaced points");
  map->add_flag("--approx", o.approx, "Add the piecewise approximate map");
  map->add_option("--ef", o.ef, "Final beam energy, for absolute columns");
  map->add_option("--L", o.l, "Flight distance, for absolute columns");

  auto* timemap = app.add_subcommand("timemap", "Final vs initial time separation per transverse offset");
  timemap->add_option("--xi-over-sc", o.xi_over_sc, "Transverse offsets in units of s_c")->delimiter(',');
  timemap->add_option("--xi", o.xi, "Transverse offsets with units, e.g. 0nm,5nm")->delimiter(',');
  timemap->add_option("--ti-range", o.ti_range, "t_i/tau_c range as min,max")->delimiter(',')->expected(2);
  timemap->add_option("--points", o.points, "Number of log-spaced points");
  timemap->add_flag("--approx", o.approx, "Add the approximate-map columns");
  timemap->add_option("--ef", o.ef, "Final beam energy (needed for --xi)");
  timemap->add_option("--L", o.l, "Flight distance (needed for --xi)");

  auto* corr = app.add_subcommand("correlation", "P(t_f) and C(t_f), bare and resolution-smeared");
  beam_flags(corr, false, true);
  corr->add_option("--tr", o.tr, "Detector resolution: a time or tau_c");
  corr->add_option("--tmax", o.tmax, "Plot range in units of tau_c");
  corr->add_option("--points", o.points, "Plot intervals on [0, tmax]");
  corr->add_option("--x-over-sc", o.x_over_sc, "Transverse offset in units of s_c");
  corr->add_option("--map", o.map_kind, "exact, approx or both");
  corr->add_option("--mc-pairs", o.mc_pairs, "Monte Carlo overlay pairs (0: none)");
  corr->add_option("--mc-bins", o.mc_bins, "Monte Carlo overlay bins on [0, tmax]");
  corr->add_option("--seed", o.seed, "Monte Carlo seed");
  corr->add_option("--workers", o.workers, "Monte Carlo worker threads");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo histogram of detected intervals");
  beam_flags(sim, true, true);
  sim->add_option("--pairs", o.pairs, "Number of pairs")->required();
  sim->add_option("--seed", o.seed, "Seed");
  sim->add_option("--transverse", o.transverse, "point, fixed or disk");
  sim->add_option("--offset", o.offset, "Transverse offset for the fixed model, e.g. 5nm");
  sim->add_option("--hist-min", o.hist_min, "Lowest bin edge in units of tau_c");
  sim->add_option("--hist-max", o.hist_max, "Highest bin edge in units of tau_c");
  sim->add_option("--bins", o.bins, "Number of bins");
  sim->add_option("--spacing", o.spacing, "log or linear");
  sim->add_option("--workers", o.workers, "Worker threads; results do not depend on it");

  auto* gamow = app.add_subcommand("gamow", "Gamow factor 2 pi eta / (exp(2 pi eta) - 1)");
  gamow->add_option("--eta", o.eta, "Sommerfeld parameter");
  gamow->add_option("--vrel", o.vrel, "Relative velocity, e.g. 2e6m/s");
  gamow->add_option("--z", o.z, "Charge number of the first particle");
  gamow->add_option("--zprime", o.zprime, "Charge number of the second particle");

  app.require_subcommand(0, 1);

  try {
    if (const auto replay = detail::find_flag_value(args, "--replay")) {
      std::vector<std::string> rebuilt;
      if (const auto dir = detail::find_flag_value(args, "--out-dir")) rebuilt = {"--out-dir", *dir};
      const auto recorded = detail::args_from_manifest(*replay);
      rebuilt.insert(rebuilt.end(), recorded.begin(), recorded.end());
      args = std::move(rebuilt);
    }
    if (const auto config = detail::find_flag_value(args, "--config")) {
      const CLI::App* sub = nullptr;
      for (const auto& a : args) {
        for (const auto* s : app.get_subcommands({})) {
          if (s->get_name() == a) sub = s;
        }
        if (sub) break;
      }
      args = detail::inject_config(args, app, sub, *config, err);
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return usage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  }

  const auto chosen = app.get_subcommands();
  if (chosen.empty()) {
    err << app.help();
    return usage;
  }
  const CLI::App* sub = chosen.front();

  try {
    std::string dir = o.out_dir;
    if (dir.empty()) {
      const char* env = std::getenv(std::string(kOutputDirEnv).c_str());
      dir = env && *env ? env : ".";
    }
    Context ctx{dir, o.format, out, err, {}, std::nullopt};
    fs::create_directories(ctx.out_dir);

    const std::string& name = sub->get_name();
    if (name == "scales") cmd_scales(o, ctx);
    else if (name == "map") cmd_map(o, ctx);
    else if (name == "timemap") cmd_timemap(o, ctx);
    else if (name == "correlation") cmd_correlation(o, ctx);
    else if (name == "simulate") cmd_simulate(o, ctx);
    else if (name == "gamow") cmd_gamow(o, ctx);

    ordered_json manifest;
    manifest["tool"] = std::string(kToolName);
    manifest["command"] = name;
    manifest["global_arguments"] = {{"format", o.format}};
    manifest["arguments"] = detail::resolved_arguments(*sub);
    manifest["constants"] = std::string(kConstantsVersion);
    if (ctx.seed) manifest["seed"] = *ctx.seed;
    manifest["outputs"] = ctx.outputs;
    std::ofstream(ctx.out_dir / kManifestName, std::ios::binary) << manifest.dump(2) << '\n';
    return ok;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return numerical;
  } catch (const UnderResolutionError& e) {
    err << "error: " << e.what() << '\n';
    return numerical;
  } catch (const IntegrationError& e) {
    err << "error: " << e.what() << '\n';
    return numerical;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return internal;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace coulomb_hbt::cli
