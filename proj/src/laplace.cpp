#include "perpetual/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>

namespace perpetual::laplace {

namespace {

std::string describe(Cplx z) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << z.real() << ", " << z.imag() << ")";
  return os.str();
}

Cplx checked_eval(const TransformFn& tf, Cplx lambda) {
  Cplx v;
  try {
    v = tf.eval(lambda);
  } catch (const std::exception& e) {
    throw TransformEvaluationError(lambda, e.what());
  }
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
    throw TransformEvaluationError(lambda, "non-finite transform value");
  return v;
}

}  // namespace

TransformEvaluationError::TransformEvaluationError(Cplx lambda, const std::string& what)
    : NumericalError("transform evaluation failed at lambda = " + describe(lambda) + ": " + what), lambda_(lambda) {}

void EulerParams::validate() const {
  if (!(A > 0.0)) throw ConfigError("Euler parameter A must be positive");
  if (m < 0 || m > 62) throw ConfigError("Euler parameter m must lie in [0, 62]");
  if (n < 1) throw ConfigError("Euler parameter n must be at least 1");
}

std::vector<double> binomial_weights(int m) {
  if (m < 0 || m > 62) throw ConfigError("binomial order out of range");
  std::vector<double> w(static_cast<std::size_t>(m) + 1);
  std::uint64_t c = 1;
  for (int k = 0; k <= m; ++k) {
    w[static_cast<std::size_t>(k)] = std::ldexp(static_cast<double>(c), -m);
    c = c * static_cast<std::uint64_t>(m - k) / static_cast<std::uint64_t>(k + 1);
  }
  return w;
}

Inversion euler_invert(const TransformFn& tf, double t, const EulerParams& p) {
  if (!(t > 0.0)) throw ConfigError("euler_invert requires t > 0");
  p.validate();
  const int jmax = p.n + p.m + 1;
  const double base = p.A / (2.0 * t);
  const double step = std::numbers::pi / t;
  // Partial sums s_j = e^{A/2}/t * sum_{k<=j} (-1)^k a_k.
  std::vector<double> s(static_cast<std::size_t>(jmax) + 1);
  const double pre = std::exp(0.5 * p.A) / t;
  double acc = 0.5 * checked_eval(tf, Cplx(base, 0.0)).real();
  s[0] = pre * acc;
  for (int k = 1; k <= jmax; ++k) {
    const double ak = checked_eval(tf, Cplx(base, k * step)).real();
    acc += (k % 2 ? -ak : ak);
    s[static_cast<std::size_t>(k)] = pre * acc;
  }
  const std::vector<double> w = binomial_weights(p.m);
  double e0 = 0.0, e1 = 0.0;
  for (int k = 0; k <= p.m; ++k) {
    e0 += w[static_cast<std::size_t>(k)] * s[static_cast<std::size_t>(p.n + k)];
    e1 += w[static_cast<std::size_t>(k)] * s[static_cast<std::size_t>(p.n + 1 + k)];
  }
  return {e0, std::abs(e1 - e0)};
}

TransformFn ccdf_transform(std::function<Cplx(Cplx)> lt) {
  return {[lt = std::move(lt)](Cplx lambda) {
            if (!(lambda.real() > 0.0)) throw DomainError("CCDF transform evaluated off the right half-plane");
            return (1.0 - lt(lambda)) / lambda;
          },
          TransformKind::Ccdf};
}

TransformFn density_transform(std::function<Cplx(Cplx)> lt) { return {std::move(lt), TransformKind::Density}; }

std::vector<GridPoint> invert_on_grid(const TransformFn& tf, std::span<const double> t_grid, const EulerParams& p,
                                      double flag_threshold) {
  std::vector<GridPoint> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    const Inversion r = euler_invert(tf, t, p);
    GridPoint g{t, r.value, r.value, r.err_est, r.err_est > flag_threshold};
    if (tf.kind == TransformKind::Ccdf) g.value = std::clamp(r.value, 0.0, 1.0);
    out.push_back(g);
  }
  return out;
}

std::vector<std::size_t> monotonicity_violations(const std::vector<GridPoint>& ccdf, double tol) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 1; i < ccdf.size(); ++i)
    if (ccdf[i].raw > ccdf[i - 1].raw + tol) bad.push_back(i);
  return bad;
}

}  // namespace perpetual::laplace
