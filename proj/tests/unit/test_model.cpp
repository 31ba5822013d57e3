#include <doctest.h>

#include <cmath>
#include <numbers>

#include "perpetual/model.hpp"
#include "perpetual/pde.hpp"

using namespace perpetual;
using namespace perpetual::model;

namespace {

DiffusionSpec bm(double mu, double sigma = 1.0) {
  DiffusionSpec y;
  y.params = {{"mu", mu}, {"sigma", sigma}};
  y.sigma = expr::parse("sigma", y.params);
  y.drift = expr::parse("mu", y.params);
  return y;
}

FunctionalSpec functional(const char* f, const char* g, const Params& p) {
  FunctionalSpec fs;
  fs.f = expr::parse(f, p);
  if (g) fs.g = expr::parse(g, p);
  return fs;
}

DiffusionSpec unit_diffusion(Interval iv, const char* drift, const Params& p) {
  DiffusionSpec y;
  y.interval = iv;
  y.params = p;
  y.sigma = expr::parse("1", p);
  y.drift = expr::parse(drift, p);
  y.start = std::isfinite(iv.lo) && std::isfinite(iv.hi) ? 0.5 * (iv.lo + iv.hi) : 0.0;
  return y;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("derive_g: unit integrand gives the identity") {
  const auto g = derive_g(expr::parse("1"), expr::parse("1"), {}, {-kInf, kInf}, 0.0, 0.0, Orientation::Increasing);
  for (double x = -7.0; x <= 7.0; x += 0.37) {
    const Dual2 d = g->eval(x);
    CHECK(std::abs(d.v - x) < 1e-12);
    CHECK(std::abs(d.d1 - 1.0) < 1e-12);
    CHECK(std::abs(d.d2) < 1e-12);
    CHECK(std::abs(g->inverse(x) - x) < 1e-10);
  }
  CHECK(g->diverges(Side::Left));
  CHECK(g->diverges(Side::Right));
}

TEST_CASE("derive_g: cosh^-2 reproduces 2 atan(e^x)") {
  const auto g =
      derive_g(expr::parse("1/cosh(x)^2"), expr::parse("1"), {}, {-kInf, kInf}, 0.0, std::numbers::pi / 2, Orientation::Increasing);
  for (double x = -5.0; x <= 5.0; x += 0.05) {
    CHECK(std::abs(g->eval(x).v - 2.0 * std::atan(std::exp(x))) <= 1e-8);
    CHECK(std::abs(g->eval(x).d1 - 1.0 / std::cosh(x)) <= 1e-12);
  }
  CHECK(std::abs(g->limit(Side::Right) - std::numbers::pi) < 1e-8);
  CHECK(std::abs(g->limit(Side::Left)) < 1e-8);
  for (double z = 0.2; z < 3.0; z += 0.2) CHECK(std::abs(g->eval(g->inverse(z)).v - z) < 1e-9);
}

TEST_CASE("derive_g: exp(-2x) reproduces -e^-x; a quadrature oracle confirms the antiderivative") {
  const auto g = derive_g(expr::parse("exp(-2*x)"), expr::parse("1"), {}, {-kInf, kInf}, 0.0, -1.0, Orientation::Increasing);
  for (double x = -2.0; x <= 10.0; x += 0.1) {
    // Oracle: -1 + int_0^x e^{-s} ds by composite Simpson.
    const int n = 2000;
    const double h = x / n;
    double s = 1.0 + std::exp(-x);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * std::exp(-i * h);
    const double oracle = x == 0.0 ? -1.0 : -1.0 + s * h / 3.0;
    CHECK(std::abs(g->eval(x).v - oracle) <= 1e-8);
    CHECK(std::abs(g->eval(x).v + std::exp(-x)) <= 1e-8);
  }
  CHECK(std::abs(g->limit(Side::Right)) < 1e-8);
  CHECK(g->diverges(Side::Left));
  CHECK_THROWS_AS(derive_g(expr::parse("exp(-2*x)"), expr::parse("1"), {}, {-kInf, kInf}, 0.0, -1.0,
                           Orientation::Increasing, true),
                  NonIntegrable);
}

TEST_CASE("derive_g is deterministic") {
  auto a = derive_g(expr::parse("1/(exp(x)+1)^2"), expr::parse("1"), {}, {-kInf, kInf}, 0.0, 0.0, Orientation::Increasing);
  auto b = derive_g(expr::parse("1/(exp(x)+1)^2"), expr::parse("1"), {}, {-kInf, kInf}, 0.0, 0.0, Orientation::Increasing);
  REQUIRE(a->nodes().size() == b->nodes().size());
  for (std::size_t i = 0; i < a->nodes().size(); ++i) {
    CHECK(a->nodes()[i].x == b->nodes()[i].x);
    CHECK(a->nodes()[i].g == b->nodes()[i].g);
    CHECK(a->nodes()[i].dg == b->nodes()[i].dg);
  }
}

TEST_CASE("reduce: I1 case") {
  const double mu = 0.5;
  const DiffusionSpec y = bm(mu);
  const auto fs = functional("1/cosh(x)^2", "2*atan(exp(x))", y.params);
  const HittingProblem hp = reduce(y, fs);
  CHECK(hp.interval.lo == doctest::Approx(0.0));
  CHECK(hp.interval.hi == doctest::Approx(std::numbers::pi));
  CHECK(hp.start == doctest::Approx(std::numbers::pi / 2));
  CHECK(hp.target == hp.interval.hi);
  CHECK(hp.drift(std::numbers::pi / 2) == doctest::Approx(mu).epsilon(1e-15));
  for (double z = 0.1; z < 3.1; z += 0.1)
    CHECK(hp.drift(z) == doctest::Approx(0.5 / std::tan(z) + mu / std::sin(z)).epsilon(1e-10));
  for (double mu2 : {0.1, 0.3, 0.7, 1.9}) {
    const DiffusionSpec y2 = bm(mu2);
    const HittingProblem hp2 = reduce(y2, functional("1/cosh(x)^2", "2*atan(exp(x))", y2.params));
    CHECK(hp2.drift(std::numbers::pi / 2) == doctest::Approx(mu2).epsilon(1e-15));
  }
}

TEST_CASE("reduce: I2 case is a Bessel process of dimension 2 - 2 mu / sigma^2 in w = -z") {
  for (double mu : {0.3, 1.5}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      const DiffusionSpec y = bm(mu, sigma);
      const HittingProblem hp = reduce(y, functional("exp(-2*x)", "-exp(-x)/sigma", y.params));
      CHECK(hp.start == doctest::Approx(-1.0 / sigma));
      CHECK(std::abs(hp.target) < 1e-12);
      CHECK(std::isinf(hp.interval.lo));
      const double delta = 2.0 - 2.0 * mu / (sigma * sigma);
      for (double w = 0.05; w < 5.0; w *= 1.7) {
        // Bessel drift (delta - 1)/(2w) in w = -z, so G(z) = -(delta - 1)/(2w).
        CHECK(hp.drift(-w) == doctest::Approx(-(delta - 1.0) / (2.0 * w)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("reduce: I3 case") {
  const double mu = 0.75;
  const DiffusionSpec y = bm(mu);
  const HittingProblem hp = reduce(y, functional("1/(1+exp(x))^2", "-log(1+exp(-x))", y.params));
  CHECK(hp.start == doctest::Approx(-std::log(2.0)));
  for (double z = -6.0; z < -0.01; z += 0.2)
    CHECK(hp.drift(z) == doctest::Approx(mu + (mu - 0.5) * std::exp(z) / (1 - std::exp(z))).epsilon(1e-10));
}

TEST_CASE("reduce_one_sided: I4 case, reflected at g(0)") {
  const double mu = 0.4, sigma = 0.5;
  const DiffusionSpec y = bm(mu, sigma);
  auto fs = functional("exp(-2*x)", "-exp(-x)/sigma", y.params);
  fs.one_sided = true;
  const HittingProblem hp = reduce_one_sided(y, fs);
  CHECK(hp.interval.lo == doctest::Approx(-1.0 / sigma));
  REQUIRE(hp.reflect_at.has_value());
  CHECK(*hp.reflect_at == hp.interval.lo);
  CHECK(hp.start == hp.interval.lo);
  CHECK(std::abs(hp.target) < 1e-12);
  // In r = -z the drift is -(nu - 1)/(2r) with nu = 2 mu / sigma^2.
  const double nu = 2.0 * mu / (sigma * sigma);
  for (double r = 0.1; r < 1.0 / sigma; r += 0.1)
    CHECK(hp.drift(-r) == doctest::Approx((nu - 1.0) / (2.0 * r)).epsilon(1e-10));
}

TEST_CASE("reduce_one_sided: I5 case") {
  const double mu = 0.04, sigma = 0.2;
  const DiffusionSpec y = bm(mu, sigma);
  auto fs = functional("1/(1+exp(x))^2", "-log(1+exp(-x))/sigma", y.params);
  fs.one_sided = true;
  const HittingProblem hp = reduce_one_sided(y, fs);
  CHECK(hp.interval.lo == doctest::Approx(-std::log(2.0) / sigma));
  CHECK(hp.target == hp.interval.hi);
  CHECK(std::abs(hp.target) < 1e-12);
  CHECK(hp.left_kind == BoundaryKind::RegularReflecting);
  CHECK(hp.right_kind == BoundaryKind::RegularKilling);
  for (double z = -3.4; z < -0.01; z += 0.1)
    CHECK(hp.drift(z) ==
          doctest::Approx(0.5 * sigma + (mu - 0.5 * sigma * sigma) / (sigma * (1 - std::exp(sigma * z)))).epsilon(1e-10));
}

TEST_CASE("reduce_one_sided: unit integrand returns the reflected process itself") {
  const double mu = 0.6;
  const DiffusionSpec y = bm(mu);
  auto fs = functional("1", nullptr, y.params);
  fs.one_sided = true;
  const HittingProblem hp = reduce_one_sided(y, fs);
  CHECK(hp.interval.lo == 0.0);
  CHECK(*hp.reflect_at == 0.0);
  CHECK(std::isinf(hp.target));
  for (double z = 0.1; z < 20; z += 1.3) {
    CHECK(hp.drift(z) == doctest::Approx(mu).epsilon(1e-12));
    CHECK(hp.transform->eval(z).v == doctest::Approx(z).epsilon(1e-12));
  }
  // A start below 0 enters the reflected problem at g(0).
  DiffusionSpec y2 = y;
  y2.start = -1.0;
  CHECK(reduce_one_sided(y2, fs).start == 0.0);
}

TEST_CASE("reduction round-trip: (g' sigma)^2 reproduces f") {
  const DiffusionSpec y = bm(0.3, 0.7);
  for (const char* f : {"1/cosh(x)^2", "exp(-2*x)", "1/(1+exp(x))^2", "1 + x^2/(1+x^2)"}) {
    const HittingProblem hp = reduce(y, functional(f, nullptr, y.params));
    for (double x = -4.0; x <= 4.0; x += 0.25) {
      const double gp = hp.transform->eval(x).d1;
      const double fv = expr::parse(f).eval(x, {});
      CHECK(std::abs(gp * 0.7 * gp * 0.7 - fv) <= 1e-8 * fv);
    }
  }
}

TEST_CASE("reduce rejections") {
  const DiffusionSpec y = bm(0.5);
  CHECK_THROWS_AS(reduce(y, functional("sin(x)", nullptr, y.params)), ConfigError);
  CHECK_THROWS_AS(reduce(y, functional("1/cosh(x)^2", "atan(exp(x))", y.params)), ConfigError);
  CHECK_THROWS_AS(reduce(y, functional("1", nullptr, y.params), Target::at(0.0)), ConfigError);
  auto one = functional("1", nullptr, y.params);
  one.one_sided = true;
  CHECK_THROWS_AS(reduce(y, one), ConfigError);
  DiffusionSpec pos = y;
  pos.interval = {1.0, kInf};
  pos.start = 2.0;
  CHECK_THROWS_AS(reduce_one_sided(pos, one), ConfigError);
  DiffusionSpec bad = y;
  bad.start = 5.0;
  bad.interval = {-1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  DiffusionSpec neg = y;
  neg.sigma = expr::parse("x");
  CHECK_THROWS_AS(neg.validate(), ConfigError);
}

TEST_CASE("orientation mirror: the decreasing branch gives the same hitting law") {
  const DiffusionSpec y = bm(1.0);
  const auto fs = functional("1/(1+exp(x))^2", nullptr, y.params);
  const HittingProblem inc = reduce(y, fs, Target::right(), Orientation::Increasing);
  const HittingProblem dec = reduce(y, fs, Target::right(), Orientation::Decreasing);
  CHECK(dec.target == dec.interval.lo);
  CHECK(dec.start == doctest::Approx(-inc.start).epsilon(1e-12));
  CHECK(dec.target == doctest::Approx(-inc.target).epsilon(1e-12));
  for (double w = -0.5; w > -6.0; w -= 0.5) {
    const double z = inc.target + w;
    CHECK(dec.drift(-z) == doctest::Approx(-inc.drift(z)).epsilon(1e-9));
  }
  const auto ga = pde::make_grid(inc, 800, 400, 4.0);
  const auto gb = pde::make_grid(dec, 800, 400, 4.0);
  pde::SolveOptions opt;
  opt.keep_lattice = false;
  const auto a = pde::solve(inc, ga, opt);
  const auto b = pde::solve(dec, gb, opt);
  for (double t = 0.25; t <= 4.0; t += 0.25) CHECK(std::abs(pde::cdf_at(a, t) - pde::cdf_at(b, t)) < 1e-10);
}

TEST_CASE("classification: Brownian motion and Bessel processes") {
  const DiffusionSpec y = bm(0.0);
  CHECK(classify_boundary(y, Side::Left) == BoundaryKind::Natural);
  CHECK(classify_boundary(y, Side::Right) == BoundaryKind::Natural);
  const DiffusionSpec ym = bm(1.0);
  CHECK(classify_boundary(ym, Side::Right) == BoundaryKind::Natural);
  for (double delta : {0.5, 1.0, 1.5}) {
    DiffusionSpec b = unit_diffusion({0.0, kInf}, "(delta-1)/(2*x)", {{"delta", delta}});
    b.start = 1.0;
    CHECK(classify_boundary(b, Side::Left) == BoundaryKind::RegularReflecting);
    b.left_boundary = BoundaryKind::RegularKilling;
    CHECK(classify_boundary(b, Side::Left) == BoundaryKind::RegularKilling);
  }
  for (double delta : {2.0, 2.5, 3.0, 5.0}) {
    DiffusionSpec b = unit_diffusion({0.0, kInf}, "(delta-1)/(2*x)", {{"delta", delta}});
    b.start = 1.0;
    CHECK(classify_boundary(b, Side::Left) == BoundaryKind::EntranceNotExit);
    CHECK(classify_boundary(b, Side::Right) == BoundaryKind::Natural);
  }
  // Negative-dimension Bessel: 0 is exit-not-entrance.
  DiffusionSpec b = unit_diffusion({0.0, kInf}, "(delta-1)/(2*x)", {{"delta", -1.0}});
  b.start = 1.0;
  CHECK(classify_boundary(b, Side::Left) == BoundaryKind::ExitNotEntrance);
}

TEST_CASE("classification: the I6 diffusions, from the Feller integrals") {
  for (double delta : {2.5, 3.0, 3.5}) {
    const Params p{{"delta", delta}};
    DiffusionSpec z = unit_diffusion({0.0, 1.0}, "1/(2*x)*(1 + (delta-1)/log(x))", p);
    z.left_boundary = BoundaryKind::RegularKilling;
    z.right_boundary = BoundaryKind::EntranceNotExit;
    // s(z) = 1/(z |log z|^(delta-1)) and the speed density are both integrable at 0.
    CHECK(classify_boundary(z, Side::Left) == BoundaryKind::RegularKilling);
    CHECK(classify_boundary(z, Side::Right) == BoundaryKind::EntranceNotExit);
    DiffusionSpec up = unit_diffusion({0.0, 1.0}, "1/(2*x)*(1 + (3-delta)/log(x))", p);
    up.left_boundary = BoundaryKind::EntranceNotExit;
    up.right_boundary = BoundaryKind::RegularKilling;
    CHECK(classify_boundary(up, Side::Left) == BoundaryKind::EntranceNotExit);
    CHECK(classify_boundary(up, Side::Right) == BoundaryKind::RegularKilling);
  }
  // For delta >= 4 the scale density (1-x)^(delta-3) integrates at 1 while the speed density does not.
  DiffusionSpec up = unit_diffusion({0.0, 1.0}, "1/(2*x)*(1 + (3-delta)/log(x))", {{"delta", 4.5}});
  CHECK(classify_boundary(up, Side::Right) == BoundaryKind::ExitNotEntrance);
}

TEST_CASE("Feller report exposes partial integrals") {
  const auto rep = feller_tests([](double) { return 0.0; }, [](double) { return 1.0; }, {-kInf, kInf}, Side::Right);
  CHECK(rep.exit_test == FellerReport::Verdict::Divergent);
  CHECK(rep.entrance_test == FellerReport::Verdict::Divergent);
  CHECK_FALSE(rep.exit_partials.empty());
}

}  // TEST_SUITE
