#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "perpetual/laplace.hpp"

using namespace perpetual;
using namespace perpetual::laplace;

namespace {

std::vector<double> log_grid(double a, double b, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = a * std::pow(b / a, i / double(n - 1));
  return t;
}

Cplx exp1(Cplx l) { return 1.0 / (1.0 + l); }

}  // namespace

TEST_SUITE("laplace") {

TEST_CASE("exponential law: CCDF e^-t") {
  const auto tf = ccdf_transform(exp1);
  const auto ts = log_grid(0.1, 10.0, 200);
  const auto out = invert_on_grid(tf, ts);
  double worst = 0.0;
  for (const auto& g : out) worst = std::max(worst, std::abs(g.value - std::exp(-g.t)));
  CHECK(worst <= 1e-8);
  CHECK(monotonicity_violations(out).empty());
}

TEST_CASE("Gamma(2, 1) density from its transform") {
  const auto tf = density_transform([](Cplx l) { return 1.0 / ((1.0 + l) * (1.0 + l)); });
  for (double t = 0.1; t <= 10.0; t += 0.1) CHECK(std::abs(euler_invert(tf, t).value - t * std::exp(-t)) <= 1e-7);
}

TEST_CASE("Brownian first passage to level 1") {
  const auto tf = ccdf_transform([](Cplx l) { return std::exp(-std::sqrt(2.0 * l)); });
  CHECK(std::abs(tf.eval(1.0) - (1.0 - std::exp(-std::sqrt(2.0)))) < 1e-15);
  // CCDF of the hitting time is erf(1/sqrt(2t)).
  for (double t : {0.1, 0.5, 1.0, 4.0, 10.0})
    CHECK(std::abs(euler_invert(tf, t).value - std::erf(1.0 / std::sqrt(2.0 * t))) <= 1e-7);
}

TEST_CASE("H = 0 gives a zero CCDF") {
  const auto tf = ccdf_transform([](Cplx) { return Cplx(1.0); });
  for (double t : {0.05, 1.0, 50.0}) CHECK(std::abs(euler_invert(tf, t).value) < 1e-14);
}

TEST_CASE("binomial weights") {
  const auto w = binomial_weights(11);
  REQUIRE(w.size() == 12);
  double s = 0.0;
  for (double v : w) s += v;
  CHECK(s == 1.0);
  CHECK(w[0] == std::ldexp(1.0, -11));
  CHECK(w[5] == 462.0 / 2048.0);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(w[k] == w[w.size() - 1 - k]);
  CHECK(binomial_weights(0) == std::vector<double>{1.0});
  CHECK_THROWS_AS(binomial_weights(-1), ConfigError);
}

TEST_CASE("grid handling: clamping and the empty grid") {
  CHECK(invert_on_grid(ccdf_transform(exp1), std::vector<double>{}).empty());
  // A transform whose inversion overshoots: CCDF of a point mass at 1 has a jump.
  const auto tf = ccdf_transform([](Cplx l) { return std::exp(-l); });
  const auto ts = log_grid(0.05, 3.0, 80);
  for (const auto& g : invert_on_grid(tf, ts)) {
    CHECK(g.value >= 0.0);
    CHECK(g.value <= 1.0);
    if (g.raw >= 0.0 && g.raw <= 1.0) CHECK(g.value == g.raw);
  }
  const auto d = invert_on_grid(density_transform(exp1), std::vector<double>{1.0});
  CHECK(d[0].value == d[0].raw);
}

// err_est measures truncation of the alternating series only; the discretization term is not part
// of it, so the property is checked on CCDF transforms.
TEST_CASE("err_est is an upper estimate of the true error for most points") {
  const auto ts = log_grid(0.1, 10.0, 200);
  struct Case {
    TransformFn tf;
    double (*exact)(double);
  };
  const std::vector<Case> cases{
      {ccdf_transform(exp1), [](double t) { return std::exp(-t); }},
      {ccdf_transform([](Cplx l) { return std::exp(-std::sqrt(2.0 * l)); }),
       [](double t) { return std::erf(1.0 / std::sqrt(2.0 * t)); }}};
  for (const auto& c : cases) {
    const auto out = invert_on_grid(c.tf, ts);
    int covered = 0;
    for (const auto& g : out) {
      const double err = std::abs(g.raw - c.exact(g.t));
      // Errors at the rounding floor count as covered.
      if (g.err_est >= err || err < 1e-13) ++covered;
    }
    CHECK(covered >= 0.95 * static_cast<double>(out.size()));
  }
}

TEST_CASE("monotonicity check flags increases") {
  std::vector<GridPoint> g(4);
  const double raw[] = {0.9, 0.8, 0.85, 0.8000005};
  for (int i = 0; i < 4; ++i) g[static_cast<std::size_t>(i)].raw = raw[i];
  CHECK(monotonicity_violations(g) == std::vector<std::size_t>{2});
}

TEST_CASE("guards") {
  const auto tf = ccdf_transform(exp1);
  CHECK_THROWS_AS(tf.eval(Cplx(0.0, 1.0)), DomainError);
  CHECK_THROWS_AS(tf.eval(Cplx(-1.0, 0.0)), DomainError);
  CHECK_THROWS_AS(euler_invert(tf, 0.0), ConfigError);
  CHECK_THROWS_AS(euler_invert(tf, -1.0), ConfigError);
  CHECK_THROWS_AS(euler_invert(tf, 1.0, {0.0, 11, 15}), ConfigError);
  CHECK_THROWS_AS(euler_invert(tf, 1.0, {18.4, -1, 15}), ConfigError);
  CHECK_THROWS_AS(euler_invert(tf, 1.0, {18.4, 11, 0}), ConfigError);
  const TransformFn bad{[](Cplx l) -> Cplx {
                          if (l.imag() > 10.0) return {std::nan(""), 0.0};
                          return 1.0 / l;
                        },
                        TransformKind::Density};
  try {
    euler_invert(bad, 1.0);
    FAIL("expected a transform evaluation error");
  } catch (const TransformEvaluationError& e) {
    CHECK(e.lambda().imag() > 10.0);
    CHECK(e.lambda().real() == doctest::Approx(9.2));
  }
}

}  // TEST_SUITE
