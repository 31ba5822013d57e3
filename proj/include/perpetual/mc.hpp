#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "perpetual/model.hpp"

namespace perpetual::mc {

enum class OneSidedMode {
  Indicator,  // accumulate f(Y) 1{Y > 0} along unreflected paths
  Reflected,  // simulate |Y| (reflection by projection) and accumulate f
};

struct SimConfig {
  long paths = 10000;
  double dt = 1e-3;
  double t_cap = 1e4;
  // Paths stop once Y exceeds this level; NaN picks the smallest level whose tail proxy meets tail_tol.
  double far_cutoff = std::numeric_limits<double>::quiet_NaN();
  double tail_tol = 1e-6;
  std::uint64_t seed = 1;
  OneSidedMode one_sided_mode = OneSidedMode::Indicator;
  int batches = 64;  // fixed work split; results do not depend on the thread count
  int threads = 0;   // 0: hardware concurrency

  void validate() const;
};

inline constexpr const char* kRngName = "mt19937_64 + ziggurat normal (boost::random), seed_seq{seed_lo, seed_hi, batch}";

struct SimResult {
  std::vector<double> samples;  // one value of A per path, in path order
  long capped = 0;              // paths stopped by t_cap
  bool unreliable = false;      // capped > 1% of paths
  double far_cutoff = 0.0;
  double tail_bound = 0.0;  // tail proxy at far_cutoff
  double mean = 0.0;
  double std_error = 0.0;
  double mean_lifetime = 0.0;  // simulated time per path
  std::string rng = kRngName;
};

// Tail proxy 10 f(y) / (kappa(y) b(y)) with kappa = -f'/f: the remaining integral of an
// exponentially decaying f along a path drifting outward at speed b.
double tail_proxy(const model::DiffusionSpec& y, const model::FunctionalSpec& fs, double level);

// Euler-Maruyama paths of Y with trapezoidal accumulation of f until the path passes far_cutoff.
SimResult simulate_functional(const model::DiffusionSpec& y, const model::FunctionalSpec& fs, const SimConfig& cfg);

// sup |F_emp - cdf| over both one-sided sups at the sample points.
double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf);
double ks_two_sample(std::span<const double> a, std::span<const double> b);

// Fraction of sample values <= t; `sorted` must be ascending.
double empirical_cdf(std::span<const double> sorted, double t);

}  // namespace perpetual::mc
