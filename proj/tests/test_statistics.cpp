#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "coulomb_hbt/statistics.hpp"

using namespace coulomb_hbt;
using namespace coulomb_hbt::literals;

namespace {

GridFunction density(double x, MapKind kind, double t_bar, double t_max, double spacing) {
  const TimeMap map(x, kind);
  GridSpec spec;
  spec.t_max = t_max;
  spec.max_spacing = spacing;
  spec.anchors = map.structure_values();
  const auto grid = make_time_grid(spec);
  return pushforward_density(grid, t_bar, map);
}

GridFunction sampled(const std::vector<double>& t, auto f) {
  GridFunction g;
  g.t = t;
  for (double x : t) g.values.push_back(f(x));
  g.kind = GridKind::dimensionless_ratio;
  return g;
}

std::vector<double> uniform(double a, double b, std::size_t n) {
  std::vector<double> t(n + 1);
  for (std::size_t i = 0; i <= n; ++i) t[i] = a + (b - a) * double(i) / double(n);
  return t;
}

}  // namespace

TEST(Emission, PoissonDensity) {
  const EmissionModel m{0.2_ns};
  EXPECT_NEAR(poisson_interval_pdf(0_ns, m).canonical(), 5.0, 1e-15);
  EXPECT_NEAR(poisson_interval_pdf(0.2_ns, m).canonical(), 5.0 / std::numbers::e, 1e-15);
  EXPECT_THROW(poisson_interval_pdf(-1_ns, m), DomainError);
  EXPECT_THROW(poisson_interval_pdf(1_ns, EmissionModel{0_ns}), DomainError);
}

TEST(Grid, AnchorsAreNodesAndSpacingIsBounded) {
  GridSpec spec;
  spec.t_max = 10.0;
  spec.max_spacing = 0.1;
  spec.anchors = {1.126, 3.5, 20.0};
  const auto g = make_time_grid(spec);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 10.0);
  EXPECT_NE(std::find(g.begin(), g.end(), 1.126), g.end());
  EXPECT_NE(std::find(g.begin(), g.end(), 3.5), g.end());
  for (std::size_t i = 1; i < g.size(); ++i) {
    ASSERT_GT(g[i], g[i - 1]);
    ASSERT_LE(g[i] - g[i - 1], 0.1 * (1.0 + 1e-12));
  }
  spec.growth = 1.0;
  EXPECT_THROW(make_time_grid(spec), DomainError);
}

TEST(TimeMapTest, PointSourceHasOneFold) {
  const TimeMap map(0.0, MapKind::exact);
  ASSERT_EQ(map.turning_points().size(), 1u);
  EXPECT_NEAR(map.turning_points()[0].t, coulomb_hole().u_star, 1e-9);
  EXPECT_NEAR(map.turning_points()[0].value, coulomb_hole().floor, 1e-13);
  EXPECT_TRUE(map.turning_points()[0].smooth);
  EXPECT_NEAR(map.infimum(), coulomb_hole().floor, 1e-13);
  EXPECT_EQ(map.pieces().size(), 2u);
}

TEST(TimeMapTest, ApproximateMapHasAKink) {
  const TimeMap map(0.0, MapKind::approximate);
  ASSERT_EQ(map.turning_points().size(), 1u);
  EXPECT_NEAR(map.turning_points()[0].t, 1.0, 1e-12);
  EXPECT_FALSE(map.turning_points()[0].smooth);
  EXPECT_NEAR(map.infimum(), 1.0, 1e-12);
}

TEST(TimeMapTest, SmallOffsetAddsALocalMaximum) {
  const TimeMap map(0.05, MapKind::exact);
  ASSERT_EQ(map.turning_points().size(), 2u);
  EXPECT_NEAR(map.turning_points()[0].value, 2.636485845, 1e-8);
  EXPECT_NEAR(map.turning_points()[1].value, 1.123260542, 1e-8);
  EXPECT_EQ(map.infimum(), 0.0);
  EXPECT_EQ(map.pieces().size(), 3u);
}

TEST(TimeMapTest, LargeOffsetIsMonotone) {
  const TimeMap map(2.0, MapKind::exact);
  EXPECT_TRUE(map.turning_points().empty());
  EXPECT_EQ(map.pieces().size(), 1u);
  EXPECT_THROW(TimeMap(-1.0, MapKind::exact), DomainError);
}

TEST(TimeMapTest, PreimagesMapBack) {
  for (double x : {0.0, 0.05, 0.3, 2.0}) {
    for (MapKind kind : {MapKind::exact, MapKind::approximate}) {
      const TimeMap map(x, kind);
      for (double y : {0.3, 1.05, 1.2, 2.0, 5.0, 50.0}) {
        for (const auto& b : map.preimages(y)) {
          EXPECT_NEAR(map(b.t_i), y, 1e-11 * y) << x << ' ' << y;
          EXPECT_NEAR(b.jacobian, 1.0 / std::abs(map.derivative(b.t_i)), 1e-12 * b.jacobian);
        }
      }
    }
  }
}

TEST(TimeMapTest, OffsetCurvesConvergeAtLargeTi) {
  const TimeMap base(0.0, MapKind::exact);
  for (double x : {0.01, 0.05, 0.1}) {
    const TimeMap m(x, MapKind::exact);
    EXPECT_NEAR(m(10.0) / base(10.0), 1.0, 0.01) << x;
  }
  // Larger offsets give smaller t_f at small t_i.
  EXPECT_GT(TimeMap(0.0, MapKind::exact)(1e-3), TimeMap(1e-3, MapKind::exact)(1e-3));
  EXPECT_GT(TimeMap(1e-3, MapKind::exact)(1e-3), TimeMap(4e-3, MapKind::exact)(1e-3));
}

TEST(Pushforward, ZeroBelowTheHole) {
  const auto p = density(0.0, MapKind::exact, 200.0, 8000.0, 4.0);
  for (std::size_t i = 0; i < p.t.size() && p.t[i] < coulomb_hole().floor * (1.0 - 1e-12); ++i) {
    ASSERT_EQ(p.values[i], 0.0) << p.t[i];
  }
}

TEST(Pushforward, FoldNodeIsSingularFromAbove) {
  const auto p = density(0.0, MapKind::exact, 5.0, 200.0, 0.1);
  ASSERT_EQ(p.discontinuities.size(), 1u);
  const auto& d = p.discontinuities[0];
  EXPECT_NEAR(p.t[d.index], coulomb_hole().floor, 1e-13);
  EXPECT_TRUE(d.right_singular);
  EXPECT_FALSE(d.left_singular);
  EXPECT_EQ(d.left, 0.0);
  EXPECT_TRUE(p.warnings.empty());
}

TEST(Pushforward, Normalization) {
  for (double x : {0.0, 0.05, 0.3, 2.0}) {
    for (MapKind kind : {MapKind::exact, MapKind::approximate}) {
      for (double t_bar : {5.0, 200.0}) {
        const auto p = density(x, kind, t_bar, 40.0 * t_bar, t_bar / 50.0);
        EXPECT_NEAR(p.normalization, 1.0, 1e-3) << x << ' ' << to_string(kind) << ' ' << t_bar;
      }
    }
  }
}

TEST(Pushforward, CellMassesMatchIntervalProbability) {
  const TimeMap map(0.05, MapKind::exact);
  const auto p = density(0.05, MapKind::exact, 5.0, 200.0, 0.02);
  for (double a : {0.5, 1.0, 2.0, 3.0, 10.0}) {
    const double b = a + 1.0;
    double mass = 0.0;
    for (std::size_t k = 0; k + 1 < p.t.size(); ++k) {
      if (p.t[k] >= a && p.t[k + 1] <= b) mass += detail::cell_integral(detail::make_cell(p, k));
    }
    const auto lo = *std::lower_bound(p.t.begin(), p.t.end(), a);
    const auto hi = *(std::upper_bound(p.t.begin(), p.t.end(), b) - 1);
    EXPECT_NEAR(mass, interval_probability(lo, hi, 5.0, map), 2e-4) << a;
  }
}

TEST(Pushforward, IntervalProbabilityIsAProbability) {
  for (double x : {0.0, 0.05, 0.3}) {
    const TimeMap map(x, MapKind::exact);
    EXPECT_NEAR(interval_probability(0.0, INFINITY, 3.0, map), 1.0, 1e-12);
    EXPECT_EQ(interval_probability(2.0, 1.0, 3.0, map), 0.0);
  }
}

TEST(Pushforward, RejectsBadGrids) {
  const TimeMap map(0.0, MapKind::exact);
  const std::vector<double> bad{0.0, 1.0, 0.5};
  EXPECT_THROW(pushforward_density(bad, 1.0, map), DomainError);
  const std::vector<double> ok{0.0, 1.0};
  EXPECT_THROW(pushforward_density(ok, 0.0, map), DomainError);
}

TEST(Pushforward, PhysicalUnitsWrapper) {
  const BeamParameters beam{0.9_keV, 0.13_eV, 1_cm};
  const auto sc = critical_scale(beam);
  std::vector<Time> grid;
  for (double t : make_time_grid({40.0 * 5.0, 0.1, 1e-9, 1.15, {coulomb_hole().floor}})) {
    grid.push_back(sc.tau_c * t);
  }
  const auto p = pushforward_time_density(grid, beam, EmissionModel{sc.tau_c * 5.0}, 0_nm);
  EXPECT_NEAR(p.normalization, 1.0, 1e-3);
  EXPECT_EQ(p.time_unit, sc.tau_c);
}

TEST(Correlation, ApproachesOneFarFromTheHole) {
  const auto p = density(0.0, MapKind::exact, 200.0, 8000.0, 4.0);
  const auto c = correlation_function(p, 200.0);
  const auto it = std::lower_bound(c.t.begin(), c.t.end(), 40.0);
  const std::size_t i = static_cast<std::size_t>(it - c.t.begin());
  const double at_40 = c.values[i - 1] + (c.values[i] - c.values[i - 1]) * (40.0 - c.t[i - 1]) / (c.t[i] - c.t[i - 1]);
  EXPECT_NEAR(at_40, 1.0, 0.01);
  EXPECT_THROW(correlation_function(c, 200.0), DomainError);
}

TEST(Convolution, GaussianIdentity) {
  // A Gaussian of width a smeared by width b is a Gaussian of width sqrt(a^2 + b^2).
  const double a = 2.0, b = 1.0, c = std::sqrt(a * a + b * b);
  const auto t = uniform(0.0, 30.0, 3000);
  const auto g = sampled(t, [&](double x) { return std::exp(-0.5 * x * x / (a * a)) / (a * std::sqrt(2 * std::numbers::pi)); });
  const auto out = convolve_resolution(g, b);
  double worst = 0.0;
  for (std::size_t i = 0; i < out.t.size(); ++i) {
    const double x = out.t[i];
    const double expect = std::exp(-0.5 * x * x / (c * c)) / (c * std::sqrt(2 * std::numbers::pi));
    worst = std::max(worst, std::abs(out.values[i] - expect));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Convolution, ConstantsAreFixedPoints) {
  const auto t = uniform(0.0, 40.0, 400);
  const auto g = sampled(t, [](double) { return 2.5; });
  const auto out = convolve_resolution(g, 1.0);
  for (std::size_t i = 0; i < out.t.size() && out.t[i] <= 40.0 - 9.0; ++i) {
    ASSERT_NEAR(out.values[i], 2.5, 1e-12) << out.t[i];
  }
}

TEST(Convolution, PreservesMassOfADensity) {
  const auto p = density(0.0, MapKind::exact, 5.0, 200.0, 0.1);
  const auto out = convolve_resolution(p, 1.0);
  EXPECT_NEAR(out.normalization, p.normalization, 2e-5);
  EXPECT_GT(out.values.front(), 0.0);
}

TEST(Convolution, UnderResolutionIsAnError) {
  const auto t = uniform(0.0, 10.0, 10);
  const auto g = sampled(t, [](double) { return 1.0; });
  EXPECT_THROW(convolve_resolution(g, 0.5), UnderResolutionError);
  EXPECT_THROW(convolve_resolution(g, 0.0), DomainError);
  EXPECT_NO_THROW(convolve_resolution(g, 1.0));
}

TEST(ConvolutionProperty, RandomPolynomialsOnLinearCellsMatchQuadrature) {
  // Piecewise-linear input: exact moments vs brute-force Riemann sums.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double c0 = coef(rng), c1 = coef(rng), c2 = 0.1 * coef(rng);
    const auto t = uniform(0.0, 10.0, 200);
    const auto g = sampled(t, [&](double x) { return c0 + c1 * x + c2 * x * x; });
    const auto out = convolve_resolution(g, 0.3);
    for (double x : {0.0, 1.3, 5.0, 8.7}) {
      double brute = 0.0;
      const int n = 200000;
      for (int k = 0; k < n; ++k) {
        const double tp = -10.0 + 20.0 * (k + 0.5) / n;
        const double at = std::abs(tp);
        const auto j = std::min<std::size_t>(static_cast<std::size_t>(at / 0.05), 199);
        const double f = g.values[j] + (g.values[j + 1] - g.values[j]) * (at - t[j]) / (t[j + 1] - t[j]);
        brute += f * std::exp(-0.5 * (x - tp) * (x - tp) / 0.09) / (0.3 * std::sqrt(2 * std::numbers::pi)) * (20.0 / n);
      }
      const auto i = static_cast<std::size_t>(std::lower_bound(out.t.begin(), out.t.end(), x - 1e-12) - out.t.begin());
      EXPECT_NEAR(out.values[i], brute, 1e-6) << trial << ' ' << x;
    }
  }
}

TEST(Csv, GridFunctionTable) {
  const auto p = density(0.0, MapKind::exact, 5.0, 20.0, 0.5);
  const auto table = to_table(p, "P");
  std::ostringstream os;
  csv::write(os, table);
  const std::string text = os.str();
  EXPECT_EQ(text.rfind("# columns: t [tau_c], P [1/tau_c]; normalization=", 0), 0u);
  EXPECT_NE(text.find("params=t_bar_over_tau_c=5 x_i_over_s_c=0 map=exact"), std::string::npos);
  EXPECT_NE(text.find("# fold node t=1.126243462001093"), std::string::npos);
  std::istringstream is(text);
  const auto rows = csv::read_rows(is);
  ASSERT_EQ(rows.size(), p.t.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][0], p.t[i]);
    EXPECT_EQ(rows[i][1], p.values[i]);
  }
}

TEST(Convolution, NearlyCoincidentNodesStayStable) {
  auto t = uniform(0.0, 20.0, 200);
  t.insert(std::upper_bound(t.begin(), t.end(), 10.0), std::nextafter(std::nextafter(10.0, 11.0), 11.0));
  auto g = sampled(t, [](double x) { return x > 10.0 ? 1.0 : 0.0; });
  const auto out = convolve_resolution(g, 1.0);
  for (std::size_t i = 0; i < out.t.size() && out.t[i] <= 15.0; ++i) {
    const double expect = 0.5 * std::erfc(-(out.t[i] - 10.0) / std::numbers::sqrt2);
    ASSERT_NEAR(out.values[i], expect, 1e-6) << out.t[i];
  }
}
