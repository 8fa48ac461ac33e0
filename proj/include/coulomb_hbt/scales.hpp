#pragma once

// HBT and Coulomb scales of a beam, and the regime verdicts derived from them.
//
//   T_i   = 2 dE                      t_HBT = hbar / T_f = hbar E_f / (2 dE^2)
//   T_f   = 2 dE^2 / E_f              s_HBT = hbar L / (m v r0)
//   r_tp  = e^2 / dE
//
// The ratios t_HBT / tau_c and s_HBT / s_c are also available in closed form,
//
//   t_HBT / tau_c = 2^{-5/6} hbar E_f^{11/6} / (dE^2 m^{1/2} e^{2/3} L^{2/3})
//   s_HBT / s_c   = 2^{-5/6} hbar L^{1/3} / (m^{1/2} e^{2/3} E_f^{1/6} r0)
//
// which the tests use as a second computation path.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coulomb_hbt/constants.hpp"
#include "coulomb_hbt/dynamics.hpp"
#include "coulomb_hbt/error.hpp"
#include "coulomb_hbt/units.hpp"

namespace coulomb_hbt {

struct DerivedScales {
  Velocity v;
  Length s_c;
  Time tau_c;
  Energy t_i_temp;
  Energy t_f_temp;
  Time t_hbt;
  std::optional<Length> s_hbt;
  Length r_tp;
  double ratio_time = 0.0;
  std::optional<double> ratio_space;
};

inline DerivedScales derive_scales(const BeamParameters& beam) {
  beam.validate();
  const auto& k = kConstants;
  const CoulombScale sc = critical_scale(beam);
  DerivedScales d;
  d.v = beam.velocity();
  d.s_c = sc.s_c;
  d.tau_c = sc.tau_c;
  d.t_i_temp = 2.0 * beam.delta_e;
  d.t_f_temp = 2.0 * beam.delta_e * (beam.delta_e / beam.e_f);
  d.t_hbt = k.hbar / d.t_f_temp;
  d.r_tp = turning_point(beam.delta_e);
  d.ratio_time = d.t_hbt / d.tau_c;
  if (beam.r0) {
    d.s_hbt = k.hbar * beam.l / (k.electron_mass() * d.v * *beam.r0);
    d.ratio_space = *d.s_hbt / d.s_c;
  }
  return d;
}

inline double ratio_time_closed_form(Energy e_f, Energy delta_e, Length l) {
  const auto& k = kConstants;
  return std::pow(2.0, -5.0 / 6.0) * k.hbar.canonical() * std::pow(e_f.canonical(), 11.0 / 6.0) /
         (delta_e.canonical() * delta_e.canonical() * std::sqrt(k.electron_mass().canonical()) *
          std::cbrt(k.e2.canonical()) * std::pow(l.canonical(), 2.0 / 3.0));
}

inline double ratio_space_closed_form(Energy e_f, Length l, Length r0) {
  const auto& k = kConstants;
  return std::pow(2.0, -5.0 / 6.0) * k.hbar.canonical() * std::cbrt(l.canonical()) /
         (std::sqrt(k.electron_mass().canonical()) * std::cbrt(k.e2.canonical()) *
          std::pow(e_f.canonical(), 1.0 / 6.0) * r0.canonical());
}

/// Practical-units coefficients: each is the scale evaluated at
/// E_f = 1 keV, dE = 1 eV, L = 1 cm, r0 = 10 nm, expressed in the unit named.

/// ratio_time = k E_keV^{11/6} / (dE_eV^2 L_cm^{2/3})
inline double ratio_time_coefficient() {
  return ratio_time_closed_form(Energy(1.0, Unit::keV), Energy(1.0, Unit::eV), Length(1.0, Unit::cm));
}

/// ratio_space = k L_cm^{1/3} / (E_keV^{1/6} r_10nm)
inline double ratio_space_coefficient() {
  return ratio_space_closed_form(Energy(1.0, Unit::keV), Length(1.0, Unit::cm), Length(10.0, Unit::nm));
}

/// s_c = k (L_cm^2 / E_keV)^{1/3} cm
inline double s_c_coefficient_cm() {
  const BeamParameters b{Energy(1.0, Unit::keV), Energy(1.0, Unit::eV), Length(1.0, Unit::cm)};
  return critical_scale(b).s_c.in(Unit::cm);
}

/// r_tp = k / dE_eV nm
inline double r_tp_coefficient_nm() { return turning_point(Energy(1.0, Unit::eV)).in(Unit::nm); }

/// s_HBT = k L_cm / (E_keV^{1/2} r_10nm) cm
inline double s_hbt_coefficient_cm() {
  BeamParameters b{Energy(1.0, Unit::keV), Energy(1.0, Unit::eV), Length(1.0, Unit::cm)};
  b.r0 = Length(10.0, Unit::nm);
  return derive_scales(b).s_hbt->in(Unit::cm);
}

struct ExperimentPreset {
  std::string name;
  Energy e_f_min;
  Energy e_f_max;
  Energy delta_e;
  Length l;

  /// One beam per distinct E_f endpoint.
  std::vector<BeamParameters> beams(std::optional<Length> r0 = std::nullopt) const {
    std::vector<BeamParameters> out{{e_f_min, delta_e, l, r0}};
    if (e_f_max != e_f_min) out.push_back({e_f_max, delta_e, l, r0});
    return out;
  }
};

inline const std::vector<ExperimentPreset>& presets() {
  static const std::vector<ExperimentPreset> all{
      {"KOT", Energy(50.0, Unit::keV), Energy(100.0, Unit::keV), Energy(0.17, Unit::eV),
       Length(100.0, Unit::cm)},
      {"Kiesel", Energy(0.9, Unit::keV), Energy(0.9, Unit::keV), Energy(0.13, Unit::eV),
       Length(1.0, Unit::cm)},
  };
  return all;
}

/// Case-insensitive preset lookup; throws ParseError for unknown names.
inline const ExperimentPreset& find_preset(std::string_view name) {
  const auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  for (const auto& p : presets()) {
    if (lower(p.name) == lower(name)) return p;
  }
  throw ParseError("unknown preset '" + std::string(name) + "'");
}

enum class Regime { coulomb_negligible, coulomb_relevant, coulomb_dominant };

constexpr std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::coulomb_negligible:
      return "coulomb_negligible";
    case Regime::coulomb_relevant:
      return "coulomb_relevant";
    case Regime::coulomb_dominant:
      return "coulomb_dominant";
  }
  return "?";
}

struct RegimeThresholds {
  double negligible_above = 100.0;
  double dominant_at_or_below = 3.0;
};

inline Regime classify(double ratio, const RegimeThresholds& th = {}) {
  if (ratio > th.negligible_above) return Regime::coulomb_negligible;
  if (ratio > th.dominant_at_or_below) return Regime::coulomb_relevant;
  return Regime::coulomb_dominant;
}

struct RegimeEntry {
  BeamParameters beam;
  DerivedScales scales;
  Regime time_regime;
  std::optional<Regime> space_regime;
};

struct RegimeReport {
  std::string name;
  RegimeThresholds thresholds;
  std::vector<RegimeEntry> entries;
};

inline RegimeReport regime_report(std::string name, const std::vector<BeamParameters>& beams,
                                  const RegimeThresholds& th = {}) {
  RegimeReport r{std::move(name), th, {}};
  for (const auto& b : beams) {
    RegimeEntry e{b, derive_scales(b), {}, {}};
    e.time_regime = classify(e.scales.ratio_time, th);
    if (e.scales.ratio_space) e.space_regime = classify(*e.scales.ratio_space, th);
    r.entries.push_back(std::move(e));
  }
  return r;
}

inline RegimeReport regime_report(const ExperimentPreset& p, std::optional<Length> r0 = std::nullopt,
                                  const RegimeThresholds& th = {}) {
  return regime_report(p.name, p.beams(r0), th);
}

namespace detail {

struct ReportRow {
  std::string key;
  std::string unit;
  std::vector<std::optional<double>> values;
};

inline std::vector<ReportRow> report_rows(const RegimeReport& r) {
  std::vector<ReportRow> rows{
      {"E_f", "keV", {}},   {"delta_E", "eV", {}}, {"L", "cm", {}},         {"r0", "nm", {}},
      {"v", "m/s", {}},     {"s_c", "nm", {}},     {"tau_c", "s", {}},      {"T_i", "eV", {}},
      {"T_f", "eV", {}},    {"t_hbt", "s", {}},    {"s_hbt", "nm", {}},     {"r_tp", "nm", {}},
      {"ratio_time", "1", {}}, {"ratio_space", "1", {}},
  };
  for (const auto& e : r.entries) {
    const auto& s = e.scales;
    const auto opt = [](const auto& q, Unit u) -> std::optional<double> {
      if (!q) return std::nullopt;
      return q->in(u);
    };
    const std::vector<std::optional<double>> col{
        e.beam.e_f.in(Unit::keV), e.beam.delta_e.in(Unit::eV), e.beam.l.in(Unit::cm),
        opt(e.beam.r0, Unit::nm), s.v.in(Unit::m_per_s), s.s_c.in(Unit::nm), s.tau_c.in(Unit::s),
        s.t_i_temp.in(Unit::eV), s.t_f_temp.in(Unit::eV), s.t_hbt.in(Unit::s),
        opt(s.s_hbt, Unit::nm), s.r_tp.in(Unit::nm), s.ratio_time, s.ratio_space,
    };
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].values.push_back(col[i]);
  }
  return rows;
}

}  // namespace detail

/// Stable key order: name, thresholds, then one object per beam.
inline nlohmann::ordered_json to_json(const RegimeReport& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["thresholds"] = {{"negligible_above", r.thresholds.negligible_above},
                     {"dominant_at_or_below", r.thresholds.dominant_at_or_below}};
  j["constants"] = std::string(kConstantsVersion);
  const auto rows = detail::report_rows(r);
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.entries.size(); ++c) {
    nlohmann::ordered_json e;
    for (const auto& row : rows) {
      const auto& v = row.values[c];
      if (!v) continue;
      e[row.key] = {{"value", *v}, {"unit", row.unit}};
    }
    e["time_regime"] = std::string(to_string(r.entries[c].time_regime));
    if (r.entries[c].space_regime) {
      e["space_regime"] = std::string(to_string(*r.entries[c].space_regime));
    }
    entries.push_back(std::move(e));
  }
  j["beams"] = std::move(entries);
  return j;
}

inline std::string to_text(const RegimeReport& r) {
  const auto rows = detail::report_rows(r);
  const auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rows) {
    std::vector<std::string> line{row.key, row.unit};
    for (const auto& v : row.values) line.push_back(fmt(v));
    cells.push_back(std::move(line));
  }
  {
    std::vector<std::string> line{"time_regime", ""};
    for (const auto& e : r.entries) line.emplace_back(to_string(e.time_regime));
    cells.push_back(std::move(line));
    line = {"space_regime", ""};
    for (const auto& e : r.entries) {
      line.emplace_back(e.space_regime ? std::string(to_string(*e.space_regime)) : "-");
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream os;
  os << r.name << '\n';
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) os << "  ";
      os << line[i];
      if (i + 1 < line.size()) os << std::string(width[i] - line[i].size(), ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace coulomb_hbt
