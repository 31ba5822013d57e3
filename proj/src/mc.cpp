#include "perpetual/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include <boost/random/normal_distribution.hpp>

namespace perpetual::mc {

using model::BoundaryKind;

void SimConfig::validate() const {
  if (paths < 1) throw ConfigError("mc: paths must be at least 1");
  if (!(dt > 0.0)) throw ConfigError("mc: dt must be positive");
  if (!(t_cap > 0.0)) throw ConfigError("mc: t_cap must be positive");
  if (!(tail_tol > 0.0)) throw ConfigError("mc: tail_tol must be positive");
  if (batches < 1) throw ConfigError("mc: batches must be at least 1");
  if (threads < 0) throw ConfigError("mc: threads must be non-negative");
}

namespace {

expr::Params merged(const model::DiffusionSpec& y, const model::FunctionalSpec& fs) {
  expr::Params p = y.params;
  for (const auto& [k, v] : fs.params) p[k] = v;
  return p;
}

double find_cutoff(const model::DiffusionSpec& y, const model::FunctionalSpec& fs, double from, double tol) {
  const double hi = std::isfinite(y.interval.hi) ? y.interval.hi : from + 2000.0;
  const double h = std::isfinite(y.interval.hi) ? (hi - from) / 4000.0 : 0.125;
  int run = 0;
  double first = std::numeric_limits<double>::quiet_NaN();
  for (double lvl = from + h; lvl < hi; lvl += h) {
    double v;
    try {
      v = tail_proxy(y, fs, lvl);
    } catch (const Error&) {
      v = std::numeric_limits<double>::infinity();
    }
    if (v <= tol) {
      if (run++ == 0) first = lvl;
      if (run == 8) return first;
    } else {
      run = 0;
    }
  }
  throw ConfigError("mc: no far cutoff satisfies tail_tol; set far_cutoff explicitly");
}

struct Path {
  expr::Compiled b, s, f;
  double dt, sqdt, t_cap, cutoff, lo;
  bool one_sided, reflect_zero, reflect_lo, kill_lo;
};

}  // namespace

double tail_proxy(const model::DiffusionSpec& y, const model::FunctionalSpec& fs, double level) {
  const expr::Params p = merged(y, fs);
  const Dual2 f = fs.f.eval_dual2(level, p);
  const double b = y.drift.eval(level, p);
  if (f.v == 0.0) return b > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  const double kappa = -f.d1 / f.v;
  if (!(kappa > 0.0) || !(b > 0.0)) return std::numeric_limits<double>::infinity();
  return 10.0 * f.v / (kappa * b);
}

SimResult simulate_functional(const model::DiffusionSpec& y, const model::FunctionalSpec& fs, const SimConfig& cfg) {
  cfg.validate();
  y.validate();
  const expr::Params p = merged(y, fs);
  if (fs.one_sided && !y.interval.contains(0.0)) throw ConfigError("mc: one-sided functional needs 0 inside the interval");

  SimResult res;
  double start = y.start;
  const double lo = y.interval.lo;
  // An entrance start is pushed one diffusive step inside.
  if (start == lo) start = lo + std::sqrt(cfg.dt);
  if (start == y.interval.hi) throw ConfigError("mc: start at the right endpoint");

  res.far_cutoff = std::isnan(cfg.far_cutoff) ? find_cutoff(y, fs, std::max(start, 0.0), cfg.tail_tol) : cfg.far_cutoff;
  if (!(res.far_cutoff > start)) throw ConfigError("mc: far_cutoff must lie above the start");
  res.tail_bound = tail_proxy(y, fs, res.far_cutoff);

  Path P;
  P.b = expr::Compiled(y.drift, p);
  P.s = expr::Compiled(y.sigma, p);
  P.f = expr::Compiled(fs.f, p);
  P.dt = cfg.dt;
  P.sqdt = std::sqrt(cfg.dt);
  P.t_cap = cfg.t_cap;
  P.cutoff = res.far_cutoff;
  P.lo = lo;
  P.one_sided = fs.one_sided;
  P.reflect_zero = fs.one_sided && cfg.one_sided_mode == OneSidedMode::Reflected;
  const bool killing_lo = y.left_boundary == BoundaryKind::RegularKilling || y.left_boundary == BoundaryKind::ExitNotEntrance;
  P.reflect_lo = std::isfinite(lo) && !killing_lo;
  P.kill_lo = std::isfinite(lo) && killing_lo;
  if (P.reflect_zero) start = std::abs(start);

  const long n = cfg.paths;
  const int nb = static_cast<int>(std::min<long>(cfg.batches, n));
  res.samples.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<long> capped(static_cast<std::size_t>(nb), 0);
  std::vector<double> time_used(static_cast<std::size_t>(nb), 0.0);
  std::vector<std::string> failure(static_cast<std::size_t>(nb));

  auto run_batch = [&](int bidx) {
    const long first = n * bidx / nb, last = n * (bidx + 1) / nb;
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(bidx)};
    std::mt19937_64 eng(seq);
    boost::random::normal_distribution<double> normal;
    const bool const_b = P.b.is_constant(), const_s = P.s.is_constant();
    const double b0 = const_b ? P.b.constant_value() : 0.0, s0 = const_s ? P.s.constant_value() : 0.0;
    auto weight = [&](double x) { return (P.one_sided && x <= 0.0) ? 0.0 : P.f(x); };
    for (long i = first; i < last; ++i) {
      double x = start, t = 0.0, acc = 0.0;
      double fx = weight(x);
      bool done = false;
      while (!done) {
        const double bx = const_b ? b0 : P.b(x);
        const double sx = const_s ? s0 : P.s(x);
        double xn = x + bx * P.dt + sx * P.sqdt * normal(eng);
        if (P.reflect_zero) xn = std::abs(xn);
        if (P.reflect_lo && xn < P.lo) xn = 2.0 * P.lo - xn;
        t += P.dt;
        if (P.kill_lo && xn <= P.lo) {
          acc += P.dt * fx;
          break;
        }
        const double fn = weight(xn);
        if (!std::isfinite(xn) || !std::isfinite(fn)) {
          failure[static_cast<std::size_t>(bidx)] = "non-finite state at path " + std::to_string(i);
          return;
        }
        acc += 0.5 * P.dt * (fx + fn);
        x = xn;
        fx = fn;
        if (x >= P.cutoff) done = true;
        else if (t >= P.t_cap) {
          ++capped[static_cast<std::size_t>(bidx)];
          done = true;
        }
      }
      res.samples[static_cast<std::size_t>(i)] = acc;
      time_used[static_cast<std::size_t>(bidx)] += t;
    }
  };

  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, nb);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int b; (b = next.fetch_add(1)) < nb;) run_batch(b);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& msg : failure)
    if (!msg.empty()) throw NumericalError("mc: " + msg);

  for (long c : capped) res.capped += c;
  res.unreliable = res.capped * 100 > n;
  double sum = 0.0, tsum = 0.0;
  for (double v : res.samples) sum += v;
  for (double v : time_used) tsum += v;
  res.mean = sum / n;
  res.mean_lifetime = tsum / n;
  double ss = 0.0;
  for (double v : res.samples) ss += (v - res.mean) * (v - res.mean);
  res.std_error = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  return res;
}

double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw ConfigError("ks_distance: empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = cdf(s[i]);
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  return d;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(double(i) / x.size() - double(j) / y.size()));
  }
  return d;
}

double empirical_cdf(std::span<const double> sorted, double t) {
  if (sorted.empty()) return 0.0;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
  return double(it - sorted.begin()) / sorted.size();
}

}  // namespace perpetual::mc
