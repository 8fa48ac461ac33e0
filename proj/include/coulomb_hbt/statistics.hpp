#pragma once

// Arrival-time statistics of adjacent electron pairs.
//
// Emission intervals are exponential with mean t_bar. Each interval t_i is
// carried to a detection interval t_f by the Coulomb map, which is not
// monotone, so the detected density is a sum over all preimages:
//
//     P(t_f) = sum_k P0(t_i,k) |dt_i/dt_f|_k .
//
// Everything below works in units of tau_c (times) and s_c (lengths). At a
// smooth fold of the map the Jacobian diverges like |t - t_fold|^{-1/2}; such
// nodes are recorded as singular and integrated with that local form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "coulomb_hbt/csv.hpp"
#include "coulomb_hbt/dynamics.hpp"
#include "coulomb_hbt/error.hpp"
#include "coulomb_hbt/units.hpp"

namespace coulomb_hbt {

struct EmissionModel {
  Time t_bar;
};

/// Poisson emission: P0(t) = exp(-t / t_bar) / t_bar.
inline InverseTime poisson_interval_pdf(Time t, const EmissionModel& model) {
  if (!(model.t_bar.canonical() > 0.0)) throw DomainError("t_bar must be positive");
  if (t.canonical() < 0.0) throw DomainError("poisson_interval_pdf: t must be >= 0");
  return std::exp(-(t / model.t_bar)) / model.t_bar;
}

namespace detail {
inline double poisson_pdf(double t, double t_bar) { return std::exp(-t / t_bar) / t_bar; }
}  // namespace detail

// ---------------------------------------------------------------------------
// Sampled functions

enum class GridKind { density_per_time, dimensionless_ratio };

/// A jump and/or one-sided inverse-square-root singularity at a node.
struct Discontinuity {
  std::size_t index;
  double left = 0.0;   // limit from below (ignored if left_singular)
  double right = 0.0;  // limit from above (ignored if right_singular)
  bool left_singular = false;
  bool right_singular = false;
};

struct GridFunction {
  std::vector<double> t;       // abscissae in units of time_unit
  std::vector<double> values;  // at a singular node: mean over the singular cell
  GridKind kind = GridKind::density_per_time;
  Time time_unit = Time::from_canonical(1.0);
  std::string time_label = "ns";
  std::vector<Discontinuity> discontinuities;  // sorted by index
  double normalization = 0.0;
  std::vector<std::string> warnings;
  csv::Params params;

  const Discontinuity* discontinuity_at(std::size_t i) const {
    auto it = std::lower_bound(
        discontinuities.begin(), discontinuities.end(), i,
        [](const Discontinuity& d, std::size_t idx) { return d.index < idx; });
    return (it != discontinuities.end() && it->index == i) ? &*it : nullptr;
  }

  /// Value approached from above at node i.
  double right_limit(std::size_t i) const {
    if (const auto* d = discontinuity_at(i)) return d->right;
    return values[i];
  }
  double left_limit(std::size_t i) const {
    if (const auto* d = discontinuity_at(i)) return d->left;
    return values[i];
  }
};

namespace detail {

/// Model of f on one cell: linear between the one-sided node limits, or
/// a / sqrt(|t - t_s|) when the cell touches a singular node.
struct Cell {
  double a, b;
  enum class Shape { linear, singular_left, singular_right } shape;
  double f_left, f_right;  // linear ends
  double amplitude;        // singular coefficient
};

inline Cell make_cell(const GridFunction& f, std::size_t k) {
  const double a = f.t[k];
  const double b = f.t[k + 1];
  const double width = b - a;
  const auto* dl = f.discontinuity_at(k);
  const auto* dr = f.discontinuity_at(k + 1);
  const bool sing_l = dl && dl->right_singular;
  const bool sing_r = dr && dr->left_singular;
  const double fl = f.right_limit(k);
  const double fr = f.left_limit(k + 1);
  if (sing_l) return {a, b, Cell::Shape::singular_left, 0.0, 0.0, fr * std::sqrt(width)};
  if (sing_r) return {a, b, Cell::Shape::singular_right, 0.0, 0.0, fl * std::sqrt(width)};
  return {a, b, Cell::Shape::linear, fl, fr, 0.0};
}

inline double cell_integral(const Cell& c) {
  const double width = c.b - c.a;
  if (c.shape == Cell::Shape::linear) return 0.5 * (c.f_left + c.f_right) * width;
  return 2.0 * c.amplitude * std::sqrt(width);
}

/// Phi(zb) - Phi(za) for the standard normal, without cancellation in the tails.
inline double normal_mass(double za, double zb) {
  constexpr double k = std::numbers::sqrt2 / 2.0;
  if (za > 0.0) return 0.5 * (std::erfc(za * k) - std::erfc(zb * k));
  if (zb < 0.0) return 0.5 * (std::erfc(-zb * k) - std::erfc(-za * k));
  return 1.0 - 0.5 * (std::erfc(-za * k) + std::erfc(zb * k));
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Integral over the cell of f(t') * exp(-(t' - c)^2 / 2 s^2) / (sqrt(2 pi) s).
inline double cell_gaussian_moment(const Cell& cell, double c, double s) {
  if (cell.shape == Cell::Shape::linear) {
    const double width = cell.b - cell.a;
    if (width < 1e-2 * s) {
      const auto integrand = [&](double tp) {
        return (cell.f_left + (cell.f_right - cell.f_left) * (tp - cell.a) / width) * normal_pdf((tp - c) / s) / s;
      };
      return boost::math::quadrature::gauss<double, 7>::integrate(integrand, cell.a, cell.b);
    }
    const double slope = (cell.f_right - cell.f_left) / (cell.b - cell.a);
    const double za = (cell.a - c) / s;
    const double zb = (cell.b - c) / s;
    const double at_center = cell.f_left + slope * (c - cell.a);
    return at_center * normal_mass(za, zb) + slope * s * (normal_pdf(za) - normal_pdf(zb));
  }
  // t' = t_s +/- y^2 removes the singularity: dt' = 2 y dy.
  const double root = std::sqrt(cell.b - cell.a);
  const bool left = cell.shape == Cell::Shape::singular_left;
  const auto integrand = [&](double y) {
    const double tp = left ? cell.a + y * y : cell.b - y * y;
    return 2.0 * cell.amplitude * normal_pdf((tp - c) / s) / s;
  };
  return boost::math::quadrature::gauss<double, 30>::integrate(integrand, 0.0, root);
}

}  // namespace detail

/// Integral of f over its grid, honouring jumps and fold singularities.
inline double integrate(const GridFunction& f) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < f.t.size(); ++k) sum += detail::cell_integral(detail::make_cell(f, k));
  return sum;
}

/// Integral of f over [0, upper] (upper must be a grid node or beyond the grid).
inline double integrate_to(const GridFunction& f, double upper) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < f.t.size() && f.t[k + 1] <= upper; ++k) {
    sum += detail::cell_integral(detail::make_cell(f, k));
  }
  return sum;
}

inline csv::Table to_table(const GridFunction& f, const std::string& value_name) {
  csv::Table table;
  const std::string value_unit =
      f.kind == GridKind::density_per_time ? "1/" + f.time_label : "1";
  table.columns = {{"t", f.time_label}, {value_name, value_unit}};
  table.normalization = f.normalization;
  table.params = f.params;
  for (const auto& d : f.discontinuities) {
    if (d.left_singular || d.right_singular) {
      table.comments.push_back("fold node t=" + csv::format_double(f.t[d.index]) +
                               ": value is the mean over the singular cell");
    }
  }
  for (std::size_t i = 0; i < f.t.size(); ++i) table.rows.push_back({f.t[i], f.values[i]});
  return table;
}

// ---------------------------------------------------------------------------
// Grids

struct GridSpec {
  double t_max = 10.0;
  double max_spacing = 0.05;
  double min_spacing = 1e-9;
  double growth = 1.15;
  std::vector<double> anchors;  // points refined geometrically on both sides
};

/// Nodes on [0, t_max]: geometric refinement away from the origin and toward
/// each anchor (which is itself a node), uniform spacing elsewhere, never
/// wider than max_spacing.
inline std::vector<double> make_time_grid(const GridSpec& spec) {
  if (!(spec.t_max > 0.0) || !(spec.max_spacing > 0.0) || !(spec.min_spacing > 0.0) ||
      !(spec.growth > 1.0)) {
    throw DomainError("make_time_grid: invalid grid specification");
  }
  std::vector<double> anchors;
  for (double a : spec.anchors) {
    if (a > 0.0 && a < spec.t_max) anchors.push_back(a);
  }
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());

  std::vector<double> ends{0.0};
  ends.insert(ends.end(), anchors.begin(), anchors.end());
  ends.push_back(spec.t_max);

  std::vector<double> nodes;
  const auto offsets = [&](double limit) {
    std::vector<double> out;
    double p = spec.min_spacing;
    while (p < limit) {
      out.push_back(p);
      p += std::clamp((spec.growth - 1.0) * p, spec.min_spacing, spec.max_spacing);
    }
    return out;
  };
  for (std::size_t s = 0; s + 1 < ends.size(); ++s) {
    const double a = ends[s];
    const double b = ends[s + 1];
    const bool refine_a = true;  // the origin too: map structure lives at small t
    const bool refine_b = s + 2 < ends.size();
    const double half = (refine_a && refine_b) ? 0.5 * (b - a) : (b - a);
    std::vector<double> seg{a, b};
    if (refine_a) {
      for (double p : offsets(half)) seg.push_back(a + p);
    }
    if (refine_b) {
      for (double p : offsets(half)) seg.push_back(b - p);
    }
    std::sort(seg.begin(), seg.end());
    for (std::size_t i = 0; i + 1 < seg.size(); ++i) {
      nodes.push_back(seg[i]);
      const double gap = seg[i + 1] - seg[i];
      if (gap > spec.max_spacing) {
        const auto n = static_cast<std::size_t>(std::ceil(gap / spec.max_spacing));
        for (std::size_t j = 1; j < n; ++j) {
          nodes.push_back(seg[i] + gap * static_cast<double>(j) / static_cast<double>(n));
        }
      }
    }
  }
  nodes.push_back(spec.t_max);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

// ---------------------------------------------------------------------------
// The time map t_i -> t_f at fixed transverse offset

enum class MapKind { exact, approximate };

constexpr std::string_view to_string(MapKind k) {
  return k == MapKind::exact ? "exact" : "approximate";
}

/// t_f / tau_c as a function of t_i / tau_c for a pair with transverse
/// offset x_i / s_c, split into monotone pieces.
class TimeMap {
 public:
  struct TurningPoint {
    double t;      // t_i of the extremum
    double value;  // t_f there
    bool smooth;   // derivative vanishes (fold) rather than jumps (kink)
  };

  struct Piece {
    double t_lo, t_hi;  // t_hi may be +inf
    double f_lo, f_hi;  // map values at the ends; +inf allowed
    bool increasing;
    double d_lo, d_hi;  // one-sided derivatives at the ends (0 at a fold)
  };

  struct Branch {
    double t_i;
    double jacobian;  // |dt_i / dt_f|
    std::size_t piece;
  };

  TimeMap(double x_over_sc, MapKind kind) : x_(x_over_sc), kind_(kind) {
    if (!(x_ >= 0.0) || !std::isfinite(x_)) {
      throw DomainError("TimeMap: transverse offset must be finite and >= 0");
    }
    build_pieces();
  }

  double x_over_sc() const { return x_; }
  MapKind kind() const { return kind_; }

  double operator()(double t) const {
    if (t == 0.0) return x_ > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    const double u = std::hypot(x_, t);
    if (kind_ == MapKind::exact) return t + t * map_sigma_excess(u);
    return t * map_sigma_approx(u);
  }

  /// dt_f/dt_i = sigma + (t^2/u^2) (d(u sigma)/du - sigma).
  double derivative(double t) const {
    if (t == 0.0) {
      if (x_ == 0.0) return -std::numeric_limits<double>::infinity();
      return sigma(x_);
    }
    const double u = std::hypot(x_, t);
    const double s = sigma(u);
    const double d = kind_ == MapKind::exact ? map_derivative(u) : map_derivative_approx(u);
    if (x_ == 0.0) return d;
    return s + (t / u) * (t / u) * (d - s);
  }

  const std::vector<Piece>& pieces() const { return pieces_; }
  const std::vector<TurningPoint>& turning_points() const { return turning_; }

  /// t_f values where the density has sharp features: turning values plus
  /// local minima of |dt_f/dt_i| that stop short of a fold. Grids should be
  /// refined around these.
  std::vector<double> structure_values() const {
    std::vector<double> out;
    for (const auto& tp : turning_) out.push_back(tp.value);
    for (double t : near_folds_) out.push_back((*this)(t));
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Smallest attainable t_f: 0 when x_i > 0, the hole floor otherwise.
  double infimum() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : pieces_) m = std::min({m, p.f_lo, p.f_hi});
    return m;
  }

  /// The unique t_i in piece k with map value y; y must lie strictly inside
  /// the piece's range.
  double solve_in_piece(std::size_t k, double y) const {
    const Piece& p = pieces_[k];
    const auto residual = [&](double t) { return (*this)(t) - y; };
    double a = p.t_lo;
    double b = p.t_hi;
    if (std::isinf(b)) {
      b = std::max(2.0 * a, 1.01 * y);  // t_f >= t_i on every branch
      while (residual(b) <= 0.0) b *= 2.0;
    }
    if (a == 0.0 && std::isinf(p.f_lo)) {
      a = std::min(0.5 * b, 0.5 / (y * y));
      while (residual(a) <= 0.0) a *= 0.25;
    }
    std::uintmax_t iters = 300;
    auto [lo, hi] = boost::math::tools::toms748_solve(
        residual, a, b, boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (lo + hi);
  }

  /// Every preimage of y with y strictly inside a piece's range, ordered by t_i.
  std::vector<Branch> preimages(double y) const {
    std::vector<Branch> out;
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      const auto& p = pieces_[k];
      const double lo = std::min(p.f_lo, p.f_hi);
      const double hi = std::max(p.f_lo, p.f_hi);
      if (!(y > lo && y < hi)) continue;
      const double t = solve_in_piece(k, y);
      out.push_back({t, 1.0 / std::abs(derivative(t)), k});
    }
    return out;
  }

 private:
  double sigma(double u) const {
    return kind_ == MapKind::exact ? map_sigma_exact(u) : map_sigma_approx(u);
  }

  void build_pieces() {
    const double t_lo = x_ > 0.0 ? std::min(1e-8, 1e-3 * x_) : 1e-9;
    const double t_hi = 1e4;
    constexpr int kPerDecade = 32;
    const int n = static_cast<int>(std::ceil(std::log10(t_hi / t_lo) * kPerDecade));
    std::vector<double> ts(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) ts[static_cast<std::size_t>(i)] = t_lo * std::pow(t_hi / t_lo, double(i) / n);

    std::vector<double> ds(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) ds[i] = derivative(ts[i]);
    for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
      const bool same_sign = (ds[i - 1] > 0.0) == (ds[i] > 0.0) && (ds[i] > 0.0) == (ds[i + 1] > 0.0);
      if (same_sign && std::abs(ds[i]) < std::abs(ds[i - 1]) && std::abs(ds[i]) < std::abs(ds[i + 1])) {
        std::uintmax_t iters = 200;
        const auto r = boost::math::tools::brent_find_minima(
            [this](double t) { return std::abs(derivative(t)); }, ts[i - 1], ts[i + 1], 40, iters);
        near_folds_.push_back(r.first);
      }
    }

    double prev_d = ds[0];
    for (std::size_t i = 1; i < ts.size(); ++i) {
      const double d = ds[i];
      if ((d > 0.0) != (prev_d > 0.0)) {
        std::uintmax_t iters = 300;
        auto [lo, hi] = boost::math::tools::toms748_solve(
            [this](double t) { return derivative(t); }, ts[i - 1], ts[i],
            boost::math::tools::eps_tolerance<double>(52), iters);
        const double tc = 0.5 * (lo + hi);
        const double f = (*this)(tc);
        const double probe = std::max(std::abs(derivative(tc * (1 - 1e-7))),
                                      std::abs(derivative(tc * (1 + 1e-7))));
        turning_.push_back({tc, f, probe * tc / f < 1e-3});
      }
      prev_d = d;
    }

    std::vector<double> bounds{0.0};
    for (const auto& tp : turning_) bounds.push_back(tp.t);
    bounds.push_back(std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
      Piece p{};
      p.t_lo = bounds[k];
      p.t_hi = bounds[k + 1];
      p.f_lo = k == 0 ? (*this)(0.0) : turning_[k - 1].value;
      p.f_hi = k + 1 < bounds.size() - 1 ? turning_[k].value : std::numeric_limits<double>::infinity();
      p.increasing = p.f_hi > p.f_lo;
      p.d_lo = k == 0 ? derivative(0.0)
                      : (turning_[k - 1].smooth ? 0.0 : derivative(p.t_lo * (1 + 1e-12)));
      p.d_hi = std::isinf(p.t_hi) ? 1.0
                                  : (turning_[k].smooth ? 0.0 : derivative(p.t_hi * (1 - 1e-12)));
      pieces_.push_back(p);
    }
  }

  double x_;
  MapKind kind_;
  std::vector<TurningPoint> turning_;
  std::vector<double> near_folds_;
  std::vector<Piece> pieces_;
};

// ---------------------------------------------------------------------------
// Push-forward

namespace detail {

inline bool same_point(double a, double b) {
  return std::abs(a - b) <= 1e-13 * std::max(std::abs(a), std::abs(b));
}

/// Fills the mean-over-singular-cell representative at every singular node.
inline void finalize_singular_nodes(GridFunction& f) {
  for (const auto& d : f.discontinuities) {
    const std::size_t i = d.index;
    double sum = 0.0;
    int n = 0;
    if (d.right_singular && i + 1 < f.t.size()) {
      sum += 2.0 * f.left_limit(i + 1);
      ++n;
    }
    if (d.left_singular && i > 0) {
      sum += 2.0 * f.right_limit(i - 1);
      ++n;
    }
    if (n > 0) f.values[i] = sum / n;
  }
}

}  // namespace detail

/// Detected-interval density P(t_f) on `grid` (units of tau_c), for Poisson
/// emission with mean interval t_bar (units of tau_c).
inline GridFunction pushforward_density(std::span<const double> grid, double t_bar,
                                        const TimeMap& map) {
  if (!(t_bar > 0.0)) throw DomainError("pushforward_density: t_bar must be positive");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw DomainError("pushforward_density: grid must be non-negative and strictly increasing");
    }
  }
  GridFunction out;
  out.t.assign(grid.begin(), grid.end());
  out.values.assign(grid.size(), 0.0);
  out.kind = GridKind::density_per_time;
  out.time_label = "tau_c";

  const auto& pieces = map.pieces();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double y = grid[i];
    bool at_turning = false;
    for (const auto& tp : map.turning_points()) at_turning |= detail::same_point(y, tp.value);
    const bool at_origin = y == 0.0 && map.x_over_sc() > 0.0;
    if (!at_turning && !at_origin) {
      double sum = 0.0;
      for (const auto& b : map.preimages(y)) sum += detail::poisson_pdf(b.t_i, t_bar) * b.jacobian;
      out.values[i] = sum;
      continue;
    }
    // One-sided limits at a turning value (or at t_f = 0 for x_i > 0).
    Discontinuity d{i};
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      const auto& p = pieces[k];
      const bool at_lo = !std::isinf(p.f_lo) && detail::same_point(y, p.f_lo);
      const bool at_hi = !std::isinf(p.t_hi) && detail::same_point(y, p.f_hi);
      if (!at_lo && !at_hi) {
        const double lo = std::min(p.f_lo, p.f_hi);
        const double hi = std::max(p.f_lo, p.f_hi);
        if (y > lo && y < hi) {
          const double t = map.solve_in_piece(k, y);
          const double v = detail::poisson_pdf(t, t_bar) / std::abs(map.derivative(t));
          d.left += v;
          d.right += v;
        }
        continue;
      }
      // y is an end of this piece: the piece only feeds one side of the node.
      const double t_end = at_lo ? p.t_lo : p.t_hi;
      const double deriv = at_lo ? p.d_lo : p.d_hi;
      const bool above = (at_lo ? p.f_hi : p.f_lo) > y;
      if (deriv == 0.0) {
        (above ? d.right_singular : d.left_singular) = true;
      } else {
        (above ? d.right : d.left) += detail::poisson_pdf(t_end, t_bar) / std::abs(deriv);
      }
    }
    out.values[i] = d.right_singular || d.left_singular ? 0.0 : d.right;
    out.discontinuities.push_back(d);
  }
  detail::finalize_singular_nodes(out);
  out.normalization = integrate(out);

  for (const auto& tp : map.turning_points()) {
    if (tp.value <= grid.front() || tp.value >= grid.back()) continue;
    const bool present = std::any_of(grid.begin(), grid.end(),
                                     [&](double t) { return detail::same_point(t, tp.value); });
    if (!present) {
      out.warnings.push_back("map turning value t_f/tau_c=" + csv::format_double(tp.value) +
                             " is not a grid node; refine the grid around the hole edge");
    }
  }
  if (grid.back() < 40.0 * t_bar) {
    out.warnings.push_back("grid ends before 40 t_bar; normalization is truncated");
  }
  out.params = {{"t_bar_over_tau_c", csv::format_double(t_bar)},
                {"x_i_over_s_c", csv::format_double(map.x_over_sc())},
                {"map", std::string(to_string(map.kind()))}};
  return out;
}

/// Physical-unit front end: grid in any time unit, x_i as a length.
inline GridFunction pushforward_time_density(std::span<const Time> grid,
                                             const BeamParameters& beam,
                                             const EmissionModel& model, Length x_i,
                                             MapKind kind = MapKind::exact) {
  const CoulombScale sc = critical_scale(beam);
  std::vector<double> scaled(grid.size());
  std::transform(grid.begin(), grid.end(), scaled.begin(),
                 [&](Time t) { return t / sc.tau_c; });
  GridFunction out = pushforward_density(scaled, model.t_bar / sc.tau_c, TimeMap(x_i / sc.s_c, kind));
  out.time_unit = sc.tau_c;
  return out;
}

/// Probability that t_f falls in [a, b], from the exponential CDF at the
/// preimages of the interval ends on each monotone piece.
inline double interval_probability(double a, double b, double t_bar, const TimeMap& map) {
  if (!(b > a)) return 0.0;
  double total = 0.0;
  const auto& pieces = map.pieces();
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const auto& p = pieces[k];
    const double lo = std::max(a, std::min(p.f_lo, p.f_hi));
    const double hi = std::min(b, std::max(p.f_lo, p.f_hi));
    if (!(hi > lo)) continue;
    const auto preimage = [&](double y) {
      if (y == p.f_lo) return p.t_lo;
      if (y == p.f_hi) return p.t_hi;
      return map.solve_in_piece(k, y);
    };
    const double t1 = preimage(lo);
    const double t2 = preimage(hi);
    total += std::abs(std::exp(-t1 / t_bar) - std::exp(-t2 / t_bar));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Correlation function and detector resolution

/// C(t) = P(t) / P0(t), where P0 is the emission-interval density.
inline GridFunction correlation_function(const GridFunction& p, double t_bar) {
  if (p.kind != GridKind::density_per_time) {
    throw DomainError("correlation_function: input must be a density");
  }
  GridFunction c = p;
  c.kind = GridKind::dimensionless_ratio;
  for (std::size_t i = 0; i < c.t.size(); ++i) c.values[i] /= detail::poisson_pdf(c.t[i], t_bar);
  for (auto& d : c.discontinuities) {
    const double p0 = detail::poisson_pdf(c.t[d.index], t_bar);
    d.left /= p0;
    d.right /= p0;
  }
  c.normalization = integrate(c);
  return c;
}

/// f~(t) = integral R(t - t') f(t') dt' over the even extension of f, with a
/// Gaussian R of width t_r (units of f's time axis). The result is returned
/// on f's grid extended by 6 t_r beyond its last node.
inline GridFunction convolve_resolution(const GridFunction& f, double t_r) {
  if (!(t_r > 0.0) || !std::isfinite(t_r)) throw DomainError("convolve_resolution: t_r must be positive");
  if (f.t.size() < 2 || f.t.front() < 0.0) throw DomainError("convolve_resolution: f must be sampled on t >= 0");
  double max_spacing = 0.0;
  for (std::size_t k = 0; k + 1 < f.t.size(); ++k) max_spacing = std::max(max_spacing, f.t[k + 1] - f.t[k]);
  if (t_r < max_spacing) {
    throw UnderResolutionError("convolve_resolution: t_r=" + csv::format_double(t_r) +
                               " is smaller than the grid spacing " + csv::format_double(max_spacing) +
                               "; refine the grid");
  }

  std::vector<detail::Cell> cells;
  cells.reserve(f.t.size() - 1);
  for (std::size_t k = 0; k + 1 < f.t.size(); ++k) cells.push_back(detail::make_cell(f, k));

  GridFunction out;
  out.kind = f.kind;
  out.time_unit = f.time_unit;
  out.time_label = f.time_label;
  out.params = f.params;
  out.params.emplace_back("t_r", csv::format_double(t_r));
  out.t = f.t;
  const double end = f.t.back();
  const double step = t_r / 4.0;
  const auto n_ext = static_cast<std::size_t>(std::ceil(6.0 * t_r / step));
  for (std::size_t j = 1; j <= n_ext; ++j) out.t.push_back(end + 6.0 * t_r * double(j) / double(n_ext));

  constexpr double kReach = 9.0;
  const auto window_begin = [&](double lo) {
    auto it = std::lower_bound(cells.begin(), cells.end(), lo,
                               [](const detail::Cell& c, double x) { return c.b < x; });
    return it;
  };
  out.values.resize(out.t.size());
  for (std::size_t i = 0; i < out.t.size(); ++i) {
    const double t = out.t[i];
    double sum = 0.0;
    for (auto it = window_begin(t - kReach * t_r); it != cells.end() && it->a <= t + kReach * t_r; ++it) {
      sum += detail::cell_gaussian_moment(*it, t, t_r);
    }
    // Mirror image f(-t') contributes R(t + t').
    for (auto it = cells.begin(); it != cells.end() && it->a <= -t + kReach * t_r; ++it) {
      sum += detail::cell_gaussian_moment(*it, -t, t_r);
    }
    out.values[i] = sum;
  }
  out.normalization = integrate(out);
  return out;
}

}  // namespace coulomb_hbt
