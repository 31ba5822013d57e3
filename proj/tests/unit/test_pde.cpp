#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "perpetual/catalog.hpp"
#include "perpetual/laplace.hpp"
#include "perpetual/pde.hpp"

using namespace perpetual;
using namespace perpetual::pde;

namespace {

double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// First passage of B_t + mu t to level a > 0.
double ig_cdf(double t, double mu, double a) {
  const double s = std::sqrt(t);
  return Phi((mu * t - a) / s) + std::exp(2.0 * mu * a) * Phi((-mu * t - a) / s);
}

const Coefficients kDrift1{[](double) { return 1.0; }, nullptr};
const Boundaries kKillRight{BoundaryCondition::DirichletZero, BoundaryCondition::DirichletOne};

double ig_error(int N, int M, bool be_only) {
  const GridSpec g{-8.0, 1.0, N, 2.0, M, 64};
  SolveOptions opt;
  opt.keep_lattice = false;
  opt.backward_euler_only = be_only;
  const GridSolution s = solve(kDrift1, kKillRight, g, 0.0, opt);
  double e = 0.0;
  for (double t : {0.25, 0.5, 1.0, 2.0}) e = std::max(e, std::abs(cdf_at(s, t) - ig_cdf(t, 1.0, 1.0)));
  return e;
}

}  // namespace

TEST_SUITE("pde") {

TEST_CASE("stencil coefficients for the heat equation") {
  const Coefficients heat{[](double) { return 0.0; }, nullptr};
  const GridSpec g{0.0, 1.0, 10, 0.01, 1, 1};  // dt = dx^2
  const Stepper s = assemble_cn(heat, g, kKillRight);
  for (int n = 1; n < 10; ++n) {
    CHECK(s.A(n) == doctest::Approx(-0.25));
    CHECK(s.B(n) == doctest::Approx(1.5));
    CHECK(s.C(n) == doctest::Approx(0.25));
    CHECK(s.D(n) == doctest::Approx(0.5));
  }
  const Stepper be = assemble_be(heat, g, kKillRight, 0.01);
  CHECK(be.B(5) == doctest::Approx(2.0));
}

TEST_CASE("I1 node coefficients") {
  const double mu = 0.5;
  const auto hp = catalog::zspec(catalog::Id::I1, {{"mu", mu}});
  const double pi = std::numbers::pi;
  const GridSpec g{0.0, pi, 200, 1.0, 100, 8};
  const Stepper s = assemble_cn(hp, g);
  const double dx = pi / 200, dt = 0.01;
  const double r1 = dt / (2 * dx), r2 = dt / (2 * dx * dx);
  CHECK(s.A(100) == doctest::Approx(0.5 * (mu * r1 - r2)).epsilon(1e-12));
  CHECK(s.C(100) == doctest::Approx(0.5 * (mu * r1 + r2)).epsilon(1e-12));
  CHECK(s.B(100) == doctest::Approx(1.0 + r2).epsilon(1e-12));
}

TEST_CASE("Dirichlet values are held exactly and the initial row is the indicator of the target") {
  const GridSpec g{-8.0, 1.0, 90, 2.0, 40, 16};
  const GridSolution s = solve(kDrift1, kKillRight, g, 0.0);
  for (int n = 0; n < 90; ++n) CHECK(s.at(0, n) == 0.0);
  CHECK(s.at(0, 90) == 1.0);
  for (int m = 0; m <= 40; ++m) {
    CHECK(s.at(m, 0) == 0.0);
    CHECK(s.at(m, 90) == 1.0);
  }
  CHECK(s.start_trace.size() == 41);
  CHECK(s.start_trace[0] == 0.0);
}

TEST_CASE("inverse Gaussian first passage") {
  const GridSpec g{-8.0, 1.0, 1998, 4.0, 2000, 64};
  const GridSolution s = solve(kDrift1, kKillRight, g, 0.0);
  for (double t : {0.25, 0.5, 1.0, 2.0}) CHECK(std::abs(cdf_at(s, t) - ig_cdf(t, 1.0, 1.0)) <= 1e-3);
  CHECK_FALSE(s.excursion_flag);
  const auto dens = extract_density(s);
  // Density of the passage time at t = 1.
  const double t1 = dens[499].t;
  const double exact = std::exp(-std::pow(1.0 - t1, 2) / (2 * t1)) / std::sqrt(2 * std::numbers::pi * t1 * t1 * t1);
  CHECK(std::abs(dens[499].value - exact) < 1e-3);
}

TEST_CASE("Crank-Nicolson is second order, backward Euler first order") {
  const double e1 = ig_error(180, 40, false), e2 = ig_error(360, 80, false), e3 = ig_error(720, 160, false);
  INFO("CN errors " << e1 << " " << e2 << " " << e3);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e2 / e3 >= 3.5);
  const double b1 = ig_error(720, 40, true), b2 = ig_error(720, 80, true), b3 = ig_error(720, 160, true);
  INFO("BE errors " << b1 << " " << b2 << " " << b3);
  CHECK(b1 / b2 >= 1.6);
  CHECK(b1 / b2 <= 2.6);
  CHECK(b2 / b3 >= 1.6);
  CHECK(b2 / b3 <= 2.6);
}

TEST_CASE("Thomas solver residual") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (std::size_t n : {5u, 50u, 2001u}) {
    Tridiagonal a(n);
    std::vector<double> x(n), b(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      a.sub[i] = i ? U(rng) : 0.0;
      a.sup[i] = i + 1 < n ? U(rng) : 0.0;
      a.diag[i] = 2.5 + U(rng);
      b[i] = U(rng);
    }
    a.factor();
    a.solve(b, x);
    a.multiply(x, r);
    double res = 0.0, xn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      res = std::max(res, std::abs(r[i] - b[i]));
      xn = std::max(xn, std::abs(x[i]));
    }
    CHECK(res <= 1e-10 * a.norm_inf() * xn);
  }
}

TEST_CASE("zero pivot reports its node") {
  Tridiagonal a(4);
  a.diag = {1.0, 1.0, 0.0, 1.0};
  try {
    a.factor();
    FAIL("expected a breakdown");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("node 2") != std::string::npos);
  }
}

TEST_CASE("non-evaluable coefficients require a node shift") {
  const Coefficients bad{[](double x) { return 1.0 / x; }, nullptr};
  const GridSpec g{-1.0, 1.0, 10, 1.0, 10, 4};
  CHECK_THROWS_AS(assemble_cn(bad, g, kKillRight), NumericalError);
  const Coefficients throwing{[](double x) -> double {
                                if (x < 0) throw DomainError("log of a negative");
                                return 0.0;
                              },
                              nullptr};
  CHECK_THROWS_AS(assemble_cn(throwing, g, kKillRight), NumericalError);
  CHECK_THROWS_AS(solve(kDrift1, kKillRight, g, 2.0), ConfigError);
  CHECK_THROWS_AS((GridSpec{1.0, 0.0, 10, 1.0, 10, 4}.validate()), ConfigError);
}

TEST_CASE("first-step damping reduces the start-up oscillation") {
  const auto hp = catalog::zspec(catalog::Id::I1, {{"mu", 0.3}});
  const GridSpec g = make_grid(hp, 400, 100, 6.0);
  SolveOptions damped, raw;
  raw.damp_first_step = false;
  const GridSolution a = solve(hp, g, damped), b = solve(hp, g, raw);
  auto osc = [](const GridSolution& s) { return std::max(-s.min_value, s.max_value - 1.0); };
  INFO("damped " << osc(a) << ", undamped " << osc(b));
  CHECK(osc(a) < osc(b));
  CHECK(osc(a) < 1e-3);
}

TEST_CASE("halving the time steps keeps the catalog lattices inside [-0.05, 1.05]") {
  for (auto id : catalog::all_ids()) {
    if (id == catalog::Id::I5) continue;  // long horizon; covered by the acceptance run
    const auto e = catalog::make_entry(id, catalog::default_params(id));
    const GridSpec g = make_grid(e.hitting, 400, 400, e.horizon);
    GridSpec half = g;
    half.M = g.M / 2;
    for (const GridSpec& gs : {g, half}) {
      SolveOptions opt;
      opt.keep_lattice = false;
      const GridSolution s = solve(e.hitting, gs, opt);
      INFO(catalog::to_string(id) << " M = " << gs.M);
      CHECK(s.min_value >= -0.05);
      CHECK(s.max_value <= 1.05);
    }
  }
}

TEST_CASE("density peak agrees with the inverted density") {
  const double mu = 0.7;
  const auto hp = catalog::zspec(catalog::Id::I1, {{"mu", mu}});
  const GridSpec g = make_grid(hp, 1000, 1000, 6.0);
  const GridSolution s = solve(hp, g);
  const auto dens = extract_density(s);
  const auto tf = laplace::density_transform([mu](special::Cplx r) { return catalog::lt_I1(r, mu); });
  std::size_t ip = 0, ii = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < dens.size(); ++i) {
    if (dens[i].value > dens[ip].value) ip = i;
    const double v = laplace::euler_invert(tf, dens[i].t).value;
    if (v > best) best = v, ii = i;
  }
  CHECK(std::abs(static_cast<long>(ip) - static_cast<long>(ii)) <= 2);
}

TEST_CASE("cdf extraction and interpolation") {
  const GridSpec g{-8.0, 1.0, 360, 2.0, 80, 16};
  const GridSolution s = solve(kDrift1, kKillRight, g, 0.0);
  const auto cdf = extract_cdf(s);
  REQUIRE(cdf.size() == 81);
  for (std::size_t m = 0; m < cdf.size(); ++m) CHECK(cdf_at(s, cdf[m].t) == doctest::Approx(cdf[m].value).epsilon(1e-12));
  CHECK_THROWS_AS(cdf_at(s, 2.5), DomainError);
  // Off-node start uses interpolation in space.
  const GridSolution off = solve(kDrift1, kKillRight, g, 0.01);
  CHECK(std::abs(cdf_at(off, 1.0) - ig_cdf(1.0, 1.0, 0.99)) < 5e-3);
}

TEST_CASE("truncation and grid placement") {
  const auto hp = catalog::zspec(catalog::Id::I2, {{"mu", 1.5}, {"sigma", 1.0}});
  const Truncation tr = truncation(hp, 10.0);
  CHECK(tr.distance > 0.0);
  const GridSpec g = make_grid(hp, 500, 100, 10.0);
  CHECK(g.x_hi == hp.target);
  const double k = (hp.start - g.x_lo) / g.dx();
  CHECK(std::abs(k - std::round(k)) < 1e-9);
  const auto h1 = catalog::zspec(catalog::Id::I1, {{"mu", 0.5}});
  const GridSpec g1 = make_grid(h1, 500, 100, 6.0);
  CHECK(g1.x_lo == h1.interval.lo);
  CHECK(g1.x_hi == h1.interval.hi);
}

TEST_CASE("Richardson estimate flags slow convergence") {
  const auto slow = catalog::zspec(catalog::Id::I1, {{"mu", 0.3}});
  const auto fast = catalog::zspec(catalog::Id::I1, {{"mu", 0.7}});
  const ConvergenceReport rs = richardson(slow, make_grid(slow, 500, 500, 6.0));
  const ConvergenceReport rf = richardson(fast, make_grid(fast, 500, 500, 6.0));
  CHECK(rs.slow);
  CHECK_FALSE(rf.slow);
  CHECK(rs.richardson_estimate > rf.richardson_estimate);
}

}  // TEST_SUITE
