#pragma once

// Classical relative motion of an electron pair emitted at relative rest.
//
// With u = s_i / s_c the final separation s_f = sigma * s_i solves
//
//     u^{3/2} h(sigma) = 1,   h(sigma) = sqrt(sigma (sigma - 1))
//                                        + ln(sqrt(sigma) + sqrt(sigma - 1)).
//
// Internally the root is found in w = sqrt(sigma - 1), where
// h = w sqrt(1 + w^2) + asinh(w) and dh/dw = 2 sqrt(1 + w^2). This keeps
// sigma - 1 accurate when the pair barely expands (u >> 1).

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>

#include "coulomb_hbt/constants.hpp"
#include "coulomb_hbt/error.hpp"
#include "coulomb_hbt/units.hpp"

namespace coulomb_hbt {

struct BeamParameters {
  Energy e_f;      // final beam energy, m v^2 / 2
  Energy delta_e;  // initial energy spread
  Length l;        // tip-to-detector distance
  std::optional<Length> r0 = std::nullopt;   // transverse source size
  std::optional<Time> t_bar = std::nullopt;  // mean emission interval
  std::optional<Time> t_r = std::nullopt;    // detector time resolution

  void validate() const {
    auto positive = [](double x, const char* what) {
      if (!(std::isfinite(x) && x > 0.0)) {
        throw DomainError(std::string(what) + " must be positive and finite");
      }
    };
    positive(e_f.canonical(), "E_f");
    positive(delta_e.canonical(), "delta_E");
    positive(l.canonical(), "L");
    if (r0) positive(r0->canonical(), "r0");
    if (t_bar) positive(t_bar->canonical(), "t_bar");
    if (t_r) positive(t_r->canonical(), "t_r");
  }

  /// Non-fatal diagnostics. The model is nonrelativistic by construction.
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (e_f > 0.25 * kConstants.mc2) {
      out.emplace_back(
          "E_f exceeds 0.25 mc^2; the nonrelativistic model E_f = m v^2 / 2 is "
          "used regardless");
    }
    return out;
  }

  Velocity velocity() const {
    return sqrt(2.0 * e_f / kConstants.electron_mass());
  }
};

struct CoulombScale {
  Length s_c;
  Time tau_c;
};

/// s_c = (2 e^2 L^2 / E_f)^{1/3}, tau_c = s_c / v.
inline CoulombScale critical_scale(Energy e_f, Length l) {
  if (!(e_f.canonical() > 0.0) || !std::isfinite(e_f.canonical()) || !(l.canonical() > 0.0) ||
      !std::isfinite(l.canonical())) {
    throw DomainError("critical_scale: E_f and L must be positive and finite");
  }
  const Length s_c = cbrt(2.0 * kConstants.e2 * l * l / e_f);
  const Velocity v = sqrt(2.0 * e_f / kConstants.electron_mass());
  return {s_c, s_c / v};
}

inline CoulombScale critical_scale(const BeamParameters& beam) {
  beam.validate();
  return critical_scale(beam.e_f, beam.l);
}

enum class Branch { lower, upper, unique };

constexpr std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::lower:
      return "lower";
    case Branch::upper:
      return "upper";
    case Branch::unique:
      return "unique";
  }
  return "?";
}

namespace detail {

inline double h_of_w(double w) { return w * std::sqrt(1.0 + w * w) + std::asinh(w); }

inline void check_u(double u) {
  if (!std::isfinite(u) || !(u > 0.0)) {
    throw DomainError("scaled initial separation u must be positive and finite");
  }
}

/// Solves h(w) = target, target > 0, by Newton steps kept inside a bracket;
/// a step leaving the bracket is replaced by bisection.
inline double solve_expansion_w(double target) {
  // h(w) >= w sqrt(1 + w^2) >= max(w, w^2), so h(hi) >= target.
  double lo = 0.0;
  double hi = target < 1.0 ? target : std::sqrt(target);
  double w = target < 1.0 ? 0.5 * target : std::sqrt(target) * 0.9;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  for (int it = 0; it < 200; ++it) {
    const double f = h_of_w(w) - target;
    if (f == 0.0) return w;
    if (f > 0.0) {
      hi = w;
    } else {
      lo = w;
    }
    double next = w - f / (2.0 * std::sqrt(1.0 + w * w));
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - w) <= 2.0 * kEps * next || hi - lo <= 2.0 * kEps * hi) {
      return next;
    }
    w = next;
  }
  return w;
}

}  // namespace detail

/// sigma - 1 for the exact map, accurate to full relative precision.
inline double map_sigma_excess(double u) {
  detail::check_u(u);
  const double w = detail::solve_expansion_w(std::pow(u, -1.5));
  return w * w;
}

/// Expansion ratio sigma = s_f / s_i of the exact map at u = s_i / s_c.
inline double map_sigma_exact(double u) { return 1.0 + map_sigma_excess(u); }

/// Scaled final separation s_f / s_c = u * sigma(u).
inline double scaled_final_separation(double u) {
  return u + u * map_sigma_excess(u);
}

/// d(u sigma)/du for the exact map, by implicit differentiation:
/// d sigma/du = -(3 / 2u) h / h', h'(sigma) = sqrt(sigma / (sigma - 1)).
inline double map_derivative(double u) {
  detail::check_u(u);
  const double w = detail::solve_expansion_w(std::pow(u, -1.5));
  if (w == 0.0) {
    throw DomainError("map derivative undefined at sigma = 1 (h' diverges)");
  }
  const double sigma = 1.0 + w * w;
  return sigma - 1.5 * detail::h_of_w(w) * w / std::sqrt(sigma);
}

/// Piecewise approximation of the expansion ratio: u^{-3/2} below s_c, 1 above.
inline double map_sigma_approx(double u) {
  detail::check_u(u);
  return u <= 1.0 ? std::pow(u, -1.5) : 1.0;
}

/// d(u sigma)/du of the approximate map; one-sided value from below at u = 1.
inline double map_derivative_approx(double u) {
  detail::check_u(u);
  return u <= 1.0 ? -0.5 * std::pow(u, -1.5) : 1.0;
}

inline Length map_approx(Length s_i, const CoulombScale& sc) {
  if (!(s_i.canonical() > 0.0) || !std::isfinite(s_i.canonical())) {
    throw DomainError("map_approx: initial separation must be positive");
  }
  if (s_i <= sc.s_c) return sc.s_c * std::sqrt(sc.s_c / s_i);
  return s_i;
}

/// Location and depth of the minimum of s_f / s_c over u: the Coulomb hole.
struct CoulombHole {
  double u_star;  // argmin of u sigma(u)
  double floor;   // min of u sigma(u), i.e. s_min / s_c
};

inline const CoulombHole& coulomb_hole() {
  static const CoulombHole hole = [] {
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(
        [](double u) { return map_derivative(u); }, 0.3, 1.5,
        boost::math::tools::eps_tolerance<double>(52), iters);
    const double u = 0.5 * (a + b);
    return CoulombHole{u, scaled_final_separation(u)};
  }();
  return hole;
}

struct PairInitial {
  Length x_i;  // transverse emission separation
  Time t_i;    // emission interval
};

inline Length initial_separation(const PairInitial& p, Velocity v) {
  return Length::from_canonical(
      std::hypot(p.x_i.canonical(), (v * p.t_i).canonical()));
}

struct MapSolution {
  double sigma;
  Length s_f;
  Length x_f;
  Time t_f;
  Branch branch;
};

inline Branch branch_of(double u) {
  const double u_star = coulomb_hole().u_star;
  if (std::abs(u - u_star) <= 1e-12 * u_star) return Branch::unique;
  return u < u_star ? Branch::lower : Branch::upper;
}

/// Propagates one pair through the exact map. The relative position angle is
/// conserved, so x and t scale by the same sigma as s.
inline MapSolution propagate_pair(const PairInitial& p, const BeamParameters& beam,
                                  const CoulombScale& sc) {
  if (p.x_i.canonical() < 0.0 || p.t_i.canonical() < 0.0) {
    throw DomainError("propagate_pair: separations must be non-negative");
  }
  const Length s_i = initial_separation(p, beam.velocity());
  if (s_i.canonical() == 0.0) {
    throw SingularInputError("propagate_pair: zero initial separation");
  }
  const double u = s_i / sc.s_c;
  const double sigma = map_sigma_exact(u);
  return {sigma, s_i * sigma, p.x_i * sigma, p.t_i * sigma, branch_of(u)};
}

inline MapSolution propagate_pair(const PairInitial& p, const BeamParameters& beam) {
  return propagate_pair(p, beam, critical_scale(beam));
}

struct Preimage {
  Length s_i;
  Branch branch;
};

/// All initial separations that the exact map sends to `s_f`, lower branch
/// first. Empty below the Coulomb-hole floor.
inline std::vector<Preimage> invert_map(Length s_f, const CoulombScale& sc) {
  if (!(s_f.canonical() > 0.0)) {
    throw DomainError("invert_map: final separation must be positive");
  }
  const double y = s_f / sc.s_c;
  const auto& hole = coulomb_hole();
  if (y < hole.floor * (1.0 - 1e-12)) return {};
  if (y <= hole.floor * (1.0 + 1e-12)) {
    return {{sc.s_c * hole.u_star, Branch::unique}};
  }
  const auto residual = [y](double u) { return scaled_final_separation(u) - y; };
  const auto tol = boost::math::tools::eps_tolerance<double>(52);

  double lo = std::min(0.5 * hole.u_star, 0.5 / (y * y));
  while (residual(lo) <= 0.0) lo *= 0.25;
  std::uintmax_t iters = 200;
  auto [a1, b1] = boost::math::tools::toms748_solve(residual, lo, hole.u_star, tol, iters);

  const double hi = 1.01 * std::max(y, hole.u_star);
  iters = 200;
  auto [a2, b2] = boost::math::tools::toms748_solve(residual, hole.u_star, hi, tol, iters);

  return {{sc.s_c * (0.5 * (a1 + b1)), Branch::lower},
          {sc.s_c * (0.5 * (a2 + b2)), Branch::upper}};
}

struct OdeResult {
  Length s_f;
  Energy initial_energy;  // E_rel = (m/4) sdot^2 + e^2 / s at t = 0
  Energy final_energy;
  double max_energy_drift;  // max relative |E(t) - E(0)| / E(0)
  std::size_t steps;
};

/// Integrates s'' = 2 e^2 / (m s^2) from rest for a time dt, independently of
/// the closed-form map. Uses an adaptive Dormand-Prince 5(4) stepper on the
/// scaled problem xi'' = 1 / xi^2, xi(0) = 1, with s = s_i xi and
/// t = tau_0 t', tau_0 = sqrt(m s_i^3 / (2 e^2)).
inline OdeResult ode_oracle(Length s_i, Time dt, double rtol) {
  if (!(s_i.canonical() > 0.0)) throw DomainError("ode_oracle: s_i must be positive");
  if (dt.canonical() < 0.0) throw DomainError("ode_oracle: dt must be non-negative");
  if (!(rtol > 0.0)) throw DomainError("ode_oracle: rtol must be positive");

  const Mass m = kConstants.electron_mass();
  const Time tau0 = sqrt(m * s_i * s_i * s_i / (2.0 * kConstants.e2));
  const double duration = dt / tau0;
  const Energy e_scale = kConstants.e2 / s_i;

  using State = std::array<double, 2>;
  namespace ode = boost::numeric::odeint;
  const auto rhs = [](const State& x, State& dxdt, double) {
    dxdt[0] = x[1];
    dxdt[1] = 1.0 / (x[0] * x[0]);
  };
  const auto energy = [](const State& x) { return 0.5 * x[1] * x[1] + 1.0 / x[0]; };

  State x{1.0, 0.0};
  double t = 0.0;
  double step = std::min(1e-3, duration);
  double drift = 0.0;
  std::size_t steps = 0;
  auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<State>>(rtol, rtol);
  while (duration - t > 1e-15 * duration) {
    step = std::min(step, duration - t);
    if (stepper.try_step(rhs, x, t, step) == ode::fail) {
      if (step < 1e-14 * std::max(1.0, t)) {
        throw IntegrationError("ode_oracle: step size underflow", t);
      }
      continue;
    }
    ++steps;
    drift = std::max(drift, std::abs(energy(x) - 1.0));
  }
  // E_rel = (m/4) sdot^2 + e^2/s equals (e^2/s_i) (xi'^2/2 + 1/xi).
  return {s_i * x[0], e_scale, e_scale * energy(x), drift, steps};
}

/// Classical turning point e^2 / E of a pair with relative energy E.
inline Length turning_point(Energy relative_energy) {
  if (!(relative_energy.canonical() > 0.0) || !std::isfinite(relative_energy.canonical())) {
    throw DomainError("turning_point: relative energy must be positive");
  }
  return kConstants.e2 / relative_energy;
}

/// |psi_c(0)|^2 = 2 pi eta / (exp(2 pi eta) - 1); equals 1 at eta = 0.
inline double gamow_factor(double eta) {
  if (!std::isfinite(eta)) throw DomainError("gamow_factor: eta must be finite");
  const double x = 2.0 * std::numbers::pi * eta;
  if (std::abs(eta) < 1e-8) return 1.0 - 0.5 * x + x * x / 12.0;
  return x / std::expm1(x);
}

/// eta = z z' e^2 / (hbar v_rel).
inline double coulomb_eta(Velocity v_rel, int z, int z_prime) {
  if (!(v_rel.canonical() > 0.0) || !std::isfinite(v_rel.canonical())) {
    throw DomainError("coulomb_eta: relative velocity must be positive");
  }
  return static_cast<double>(z * z_prime) * (kConstants.e2 / (kConstants.hbar * v_rel));
}

}  // namespace coulomb_hbt
