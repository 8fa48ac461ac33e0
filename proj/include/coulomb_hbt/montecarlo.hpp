#pragma once

// Monte Carlo validation of the pair map.
//
// Pairs are drawn in fixed blocks of kBlockSize. Block b owns an mt19937_64
// seeded from seed_seq{seed_lo, seed_hi, b}, so the sample stream depends only
// on the seed and never on how blocks are spread over workers. Worker w
// processes blocks w, w + W, w + 2W, ...; integer counts merge exactly and the
// floating-point sigma sums merge in block order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "coulomb_hbt/csv.hpp"
#include "coulomb_hbt/dynamics.hpp"
#include "coulomb_hbt/error.hpp"
#include "coulomb_hbt/units.hpp"

namespace coulomb_hbt {

inline constexpr std::uint64_t kBlockSize = 65536;

struct PointSource {};
struct FixedOffset {
  Length x_i;
};
struct GaussianDisk {
  Length r0;  // per-axis standard deviation of each emission point
};
using TransverseModel = std::variant<PointSource, FixedOffset, GaussianDisk>;

inline std::string to_string(const TransverseModel& m) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, PointSource>) {
          return "point";
        } else if constexpr (std::is_same_v<V, FixedOffset>) {
          return "fixed:" + csv::format_double(v.x_i.canonical()) + "nm";
        } else {
          return "disk:" + csv::format_double(v.r0.canonical()) + "nm";
        }
      },
      m);
}

enum class BinSpacing { linear, log };

constexpr std::string_view to_string(BinSpacing s) {
  return s == BinSpacing::linear ? "linear" : "log";
}

struct HistogramSpec {
  Time t_min;
  Time t_max;
  std::size_t n_bins = 100;
  BinSpacing spacing = BinSpacing::log;

  void validate() const {
    if (!(t_min < t_max)) throw DomainError("histogram: t_min must be below t_max");
    if (n_bins < 2) throw DomainError("histogram: at least two bins are required");
    if (spacing == BinSpacing::log && !(t_min.canonical() > 0.0)) {
      throw DomainError("histogram: log spacing needs t_min > 0");
    }
    if (t_min.canonical() < 0.0) throw DomainError("histogram: t_min must be non-negative");
  }
};

struct SimulationConfig {
  BeamParameters beam;  // t_bar is required
  std::uint64_t n_pairs = 0;
  std::uint64_t seed = 0;
  TransverseModel transverse = PointSource{};
  HistogramSpec histogram;
  unsigned workers = 1;

  void validate() const {
    beam.validate();
    if (!beam.t_bar) throw DomainError("simulation: t_bar is required");
    if (n_pairs < 1) throw DomainError("simulation: n_pairs must be at least 1");
    if (workers < 1) throw DomainError("simulation: workers must be at least 1");
    histogram.validate();
    if (const auto* f = std::get_if<FixedOffset>(&transverse)) {
      if (!(f->x_i.canonical() >= 0.0) || !std::isfinite(f->x_i.canonical())) {
        throw DomainError("simulation: fixed offset must be non-negative");
      }
    }
    if (const auto* g = std::get_if<GaussianDisk>(&transverse)) {
      if (!(g->r0.canonical() > 0.0) || !std::isfinite(g->r0.canonical())) {
        throw DomainError("simulation: r0 must be positive");
      }
    }
  }
};

/// Histogram over time in canonical units (ns).
class Histogram {
 public:
  Histogram() = default;

  explicit Histogram(const HistogramSpec& spec) : spacing_(spec.spacing) {
    spec.validate();
    const double a = spec.t_min.canonical();
    const double b = spec.t_max.canonical();
    edges_.resize(spec.n_bins + 1);
    for (std::size_t k = 0; k <= spec.n_bins; ++k) {
      const double f = static_cast<double>(k) / static_cast<double>(spec.n_bins);
      edges_[k] = spacing_ == BinSpacing::linear ? a + (b - a) * f : a * std::pow(b / a, f);
    }
    edges_.front() = a;
    edges_.back() = b;
    counts_.assign(spec.n_bins, 0);
  }

  void fill(double t) {
    ++n_total_;
    if (t < edges_.front()) {
      ++underflow_;
      return;
    }
    if (t >= edges_.back()) {
      ++overflow_;
      return;
    }
    ++counts_[bin_of(t)];
  }

  void merge(const Histogram& o) {
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += o.counts_[k];
    underflow_ += o.underflow_;
    overflow_ += o.overflow_;
    n_total_ += o.n_total_;
  }

  const std::vector<double>& edges() const { return edges_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t underflow() const { return underflow_; }
  std::uint64_t overflow() const { return overflow_; }
  std::uint64_t n_total() const { return n_total_; }
  std::size_t size() const { return counts_.size(); }

  double standard_error(std::size_t k) const {
    return std::sqrt(static_cast<double>(counts_[k]));
  }

  /// Counts per pair per unit time.
  double density(std::size_t k) const {
    return static_cast<double>(counts_[k]) /
           (static_cast<double>(n_total_) * (edges_[k + 1] - edges_[k]));
  }

  std::size_t filled_bins() const {
    return static_cast<std::size_t>(
        std::count_if(counts_.begin(), counts_.end(), [](auto c) { return c > 0; }));
  }

 private:
  std::size_t bin_of(double t) const {
    const double a = edges_.front();
    const double b = edges_.back();
    const double n = static_cast<double>(counts_.size());
    const double f = spacing_ == BinSpacing::linear ? (t - a) / (b - a) : std::log(t / a) / std::log(b / a);
    auto k = static_cast<std::size_t>(std::clamp(std::floor(f * n), 0.0, n - 1.0));
    while (k > 0 && t < edges_[k]) --k;
    while (k + 1 < counts_.size() && t >= edges_[k + 1]) ++k;
    return k;
  }

  BinSpacing spacing_ = BinSpacing::log;
  std::vector<double> edges_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t underflow_ = 0;
  std::uint64_t overflow_ = 0;
  std::uint64_t n_total_ = 0;
};

/// Deterministic source of initial pair configurations for one block.
class PairSampler {
 public:
  PairSampler(const SimulationConfig& cfg, std::uint64_t block)
      : transverse_(cfg.transverse), t_bar_(cfg.beam.t_bar->canonical()) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
    rng_.seed(seq);
  }

  PairInitial next() {
    std::exponential_distribution<double> interval(1.0 / t_bar_);
    const double t = interval(rng_);
    const double x = std::visit(
        [this](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, PointSource>) {
            return 0.0;
          } else if constexpr (std::is_same_v<M, FixedOffset>) {
            return m.x_i.canonical();
          } else {
            std::normal_distribution<double> axis(0.0, m.r0.canonical());
            const double x1 = axis(rng_), y1 = axis(rng_);
            const double x2 = axis(rng_), y2 = axis(rng_);
            return std::hypot(x1 - x2, y1 - y2);
          }
        },
        transverse_);
    return {Length::from_canonical(x), Time::from_canonical(t)};
  }

 private:
  TransverseModel transverse_;
  double t_bar_;
  std::mt19937_64 rng_;
};

inline std::uint64_t block_count(std::uint64_t n_pairs) {
  return (n_pairs + kBlockSize - 1) / kBlockSize;
}

inline std::uint64_t block_pairs(std::uint64_t n_pairs, std::uint64_t block) {
  return std::min(kBlockSize, n_pairs - block * kBlockSize);
}

/// The first n_pairs draws of the full seeded stream, in block order.
inline std::vector<PairInitial> sample_pairs(const SimulationConfig& cfg) {
  cfg.validate();
  std::vector<PairInitial> out;
  out.reserve(cfg.n_pairs);
  for (std::uint64_t b = 0; b < block_count(cfg.n_pairs); ++b) {
    PairSampler sampler(cfg, b);
    for (std::uint64_t i = 0; i < block_pairs(cfg.n_pairs, b); ++i) out.push_back(sampler.next());
  }
  return out;
}

struct SimulationSummary {
  Time hole_floor_time;  // smallest observed t_f
  double mean_sigma = 0.0;
  std::uint64_t n_pairs = 0;
  std::uint64_t seed = 0;
  std::uint64_t resample_count = 0;
};

struct SimulationResult {
  Histogram t_f;
  Histogram t_i;
  SimulationSummary summary;
  CoulombScale scale;
};

inline SimulationResult run_simulation(const SimulationConfig& cfg) {
  cfg.validate();
  const CoulombScale sc = critical_scale(cfg.beam);
  const std::uint64_t n_blocks = block_count(cfg.n_pairs);
  const unsigned n_workers = static_cast<unsigned>(std::min<std::uint64_t>(cfg.workers, n_blocks));

  struct Partial {
    Histogram t_f, t_i;
    double t_min = std::numeric_limits<double>::infinity();
    std::uint64_t resamples = 0;
  };
  std::vector<Partial> partials(n_workers, Partial{Histogram(cfg.histogram), Histogram(cfg.histogram)});
  std::vector<double> sigma_sums(n_blocks, 0.0);
  std::vector<std::exception_ptr> errors(n_workers);

  const auto work = [&](unsigned w) {
    try {
      auto& part = partials[w];
      for (std::uint64_t b = w; b < n_blocks; b += n_workers) {
        PairSampler sampler(cfg, b);
        double sum = 0.0;
        for (std::uint64_t i = 0; i < block_pairs(cfg.n_pairs, b); ++i) {
          for (;;) {
            const PairInitial p = sampler.next();
            try {
              const MapSolution s = propagate_pair(p, cfg.beam, sc);
              part.t_f.fill(s.t_f.canonical());
              part.t_i.fill(p.t_i.canonical());
              part.t_min = std::min(part.t_min, s.t_f.canonical());
              sum += s.sigma;
              break;
            } catch (const SingularInputError&) {
              ++part.resamples;
            }
          }
        }
        sigma_sums[b] = sum;
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };

  if (n_workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) threads.emplace_back(work, w);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SimulationResult r{Histogram(cfg.histogram), Histogram(cfg.histogram), {}, sc};
  double t_min = std::numeric_limits<double>::infinity();
  for (const auto& part : partials) {
    r.t_f.merge(part.t_f);
    r.t_i.merge(part.t_i);
    t_min = std::min(t_min, part.t_min);
    r.summary.resample_count += part.resamples;
  }
  double sigma_total = 0.0;
  for (double s : sigma_sums) sigma_total += s;
  r.summary.hole_floor_time = Time::from_canonical(t_min);
  r.summary.mean_sigma = sigma_total / static_cast<double>(cfg.n_pairs);
  r.summary.n_pairs = cfg.n_pairs;
  r.summary.seed = cfg.seed;
  return r;
}

/// Expected counts-based view of a histogram: per-bin correlation estimate
/// C = counts / (n * P0 mass of the bin), with its sqrt(counts) error.
struct CorrelationBin {
  double t_lo;
  double t_hi;
  double c;
  double stderr_c;
};

inline std::vector<CorrelationBin> histogram_correlation(const Histogram& h, Time t_bar) {
  std::vector<CorrelationBin> out;
  const double tb = t_bar.canonical();
  const double n = static_cast<double>(h.n_total());
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double a = h.edges()[k], b = h.edges()[k + 1];
    const double p0 = std::exp(-a / tb) * -std::expm1(-(b - a) / tb);
    const double c = static_cast<double>(h.counts()[k]) / (n * p0);
    out.push_back({a, b, c, h.standard_error(k) / (n * p0)});
  }
  return out;
}

inline csv::Table to_table(const Histogram& h, const CoulombScale& sc, const std::string& name) {
  csv::Table t;
  t.columns = {{"t_lo", "ns"},         {"t_hi", "ns"},  {"t_lo/tau_c", "1"}, {"t_hi/tau_c", "1"},
               {name + "_count", "1"}, {"stderr", "1"}, {"density", "1/ns"}};
  t.params = {{"n_total", std::to_string(h.n_total())},
              {"underflow", std::to_string(h.underflow())},
              {"overflow", std::to_string(h.overflow())}};
  const double tau = sc.tau_c.canonical();
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double a = h.edges()[k], b = h.edges()[k + 1];
    t.rows.push_back({a, b, a / tau, b / tau, static_cast<double>(h.counts()[k]),
                      h.standard_error(k), h.density(k)});
  }
  return t;
}

inline nlohmann::ordered_json to_json(const SimulationSummary& s) {
  nlohmann::ordered_json j;
  j["hole_floor_time"] = s.hole_floor_time.canonical();
  j["hole_floor_time_unit"] = "ns";
  j["mean_sigma"] = s.mean_sigma;
  j["n_pairs"] = s.n_pairs;
  j["seed"] = s.seed;
  j["resample_count"] = s.resample_count;
  return j;
}

}  // namespace coulomb_hbt
