#include <doctest.h>

#include <cmath>
#include <numbers>

#include "perpetual/catalog.hpp"
#include "perpetual/mc.hpp"

using namespace perpetual;
using namespace perpetual::catalog;

namespace {

double rel(Cplx a, Cplx b) { return std::abs(a - b) / std::abs(b); }

// E exp(-rho / (2 sigma^2 G)), G ~ Gamma(mu / sigma^2), by Simpson in log G.
Cplx lt_I2_quadrature(Cplx rho, double mu, double sigma) {
  const double k = mu / (sigma * sigma);
  const double a = -40.0, b = 5.0;
  const int n = 40000;
  const double h = (b - a) / n;
  auto f = [&](double u) {
    const double g = std::exp(u);
    return std::exp(-rho / (2 * sigma * sigma * g)) * std::exp(k * u - g - std::lgamma(k));
  };
  Cplx s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_SUITE("catalog") {

TEST_CASE("names and parameters") {
  CHECK(parse_id("dufresne") == Id::I2);
  CHECK(parse_id("i6") == Id::I6);
  CHECK(parse_id("onesided-translated") == Id::I5);
  CHECK_FALSE(parse_id("I7").has_value());
  for (Id id : all_ids()) {
    CHECK(parse_id(cli_name(id)) == id);
    CHECK(parse_id(to_string(id)) == id);
  }
  CHECK(complete_params(Id::I2, {{"mu", 2.0}}).at("sigma") == 1.0);
  CHECK_THROWS_AS(complete_params(Id::I1, {{"mu", 0.0}}), ConfigError);
  CHECK_THROWS_AS(complete_params(Id::I2, {{"sigma", -1.0}}), ConfigError);
  CHECK_THROWS_AS(complete_params(Id::I6, {{"delta", 2.0}}), ConfigError);
  CHECK_THROWS_AS(complete_params(Id::I1, {{"delta", 3.0}}), ConfigError);
}

TEST_CASE("transforms against frozen reference values") {
  CHECK(rel(lt_I1(0.1, 0.5), 0.75308523755248842) < 1e-12);
  CHECK(rel(lt_I1({1, 2}, 0.3), {-0.016063640794316064, -0.043688159471643748}) < 1e-10);
  CHECK(rel(lt_I1({50, 300}, 0.7), {5.2209111534951346e-13, 1.2063271210680216e-13}) < 1e-8);
  CHECK(rel(lt_I2(1, 1.5, 1), 0.58693571751093799) < 1e-12);
  CHECK(rel(lt_I2({2, 7}, 0.75, 0.5), {-0.088096197857885999, 0.01299668735647094}) < 1e-10);
  CHECK(rel(lt_I3(1, 0.5), 0.5) < 1e-12);
  CHECK(rel(lt_I3({2, 5}, 0.75), {0.14728642459205836, -0.29353444334634516}) < 1e-10);
  CHECK(rel(lt_I3({40, 900}, 0.25), {-2.1072107702926388e-11, -1.8801255998278724e-10}) < 1e-7);
  CHECK(rel(lt_I4(1, 0.04, 0.2), 0.0055536690802520159) < 1e-10);
  CHECK(rel(lt_I4({0.5, 1}, 1.5, 1), {0.79544590323912035, -0.25564125157158695}) < 1e-10);
  CHECK(rel(lt_I4({3, -2}, 0.5, 1), {0.10961916079446712, 0.10678808033064563}) < 1e-10);
  CHECK(rel(lt_I6_delta3({2, 3}), {0.20380042562901202, -0.30490971629461015}) < 1e-10);
}

TEST_CASE("transforms are normalized, real on the real axis and conjugate-symmetric") {
  const std::vector<std::function<Cplx(Cplx)>> lts{
      [](Cplx r) { return lt_I1(r, 0.3); },       [](Cplx r) { return lt_I1(r, 1.2); },
      [](Cplx r) { return lt_I2(r, 1.5, 1.0); },  [](Cplx r) { return lt_I2(r, 0.2, 0.6); },
      [](Cplx r) { return lt_I3(r, 0.25); },      [](Cplx r) { return lt_I3(r, 0.9); },
      [](Cplx r) { return lt_I4(r, 1.0, 1.0); },  [](Cplx r) { return lt_I4(r, 0.04, 0.2); },
      [](Cplx r) { return lt_I6_delta3(r); }};
  for (const auto& lt : lts) {
    CHECK(std::abs(lt(1e-12) - 1.0) <= 1e-5);
    for (double r : {0.01, 0.7, 5.0, 60.0}) CHECK(std::abs(lt(r).imag()) <= 1e-12);
    for (Cplx r : {Cplx(0.3, 2.0), Cplx(9.2, 40.0), Cplx(1.0, -7.0)})
      CHECK(std::abs(lt(std::conj(r)) - std::conj(lt(r))) <= 1e-12 * std::max(1.0, std::abs(lt(r))));
    // A Laplace transform of a positive variable decreases on the real axis.
    CHECK(lt(0.5).real() > lt(1.0).real());
  }
}

TEST_CASE("I2: exact law") {
  CHECK(exact_cdf_I2(1.0, 1.5, 1.0) == doctest::Approx(0.8012519569).epsilon(1e-10));
  CHECK(1.0 - exact_cdf_I2(1.0, 1.5, 1.0) == doctest::Approx(0.1987480431).epsilon(1e-9));
  CHECK(exact_cdf_I2(1e-4, 1.5, 1.0) < 1e-100);
  CHECK(exact_cdf_I2(1e8, 1.5, 1.0) > 1.0 - 1e-10);
  for (double t = 0.1; t < 20; t *= 1.5) CHECK(exact_cdf_I2(t, 1.5, 1.0) < exact_cdf_I2(t * 1.5, 1.5, 1.0));
}

TEST_CASE("I2 transform against a quadrature over the gamma law") {
  for (auto [mu, sigma] : {std::pair{1.5, 1.0}, std::pair{0.75, 0.5}, std::pair{0.3, 1.3}})
    for (Cplx r : {Cplx(0.2, 0.0), Cplx(1.0, 3.0), Cplx(4.0, -10.0)})
      CHECK(std::abs(lt_I2(r, mu, sigma) - lt_I2_quadrature(r, mu, sigma)) < 1e-9);
}

TEST_CASE("Brownian scaling: I(mu, sigma) = I(mu / sigma^2, 1) / sigma^2") {
  for (double sigma : {0.2, 0.5, 2.0})
    for (Cplx r : {Cplx(0.5, 0.0), Cplx(2.0, 3.0)}) {
      const double s2 = sigma * sigma;
      CHECK(rel(lt_I2(r, 0.3, sigma), lt_I2(r / s2, 0.3 / s2, 1.0)) < 1e-10);
      CHECK(rel(lt_I4(r, 0.3, sigma), lt_I4(r / s2, 0.3 / s2, 1.0)) < 1e-10);
    }
}

TEST_CASE("the one-sided Dufresne functional at mu = sigma = 1 matches the Bessel-3 functional") {
  for (Cplx r : {Cplx(0.1, 0.0), Cplx(1.0, 0.0), Cplx(2.0, 3.0), Cplx(9.2, 30.0)})
    CHECK(rel(lt_I4(r, 1.0, 1.0), lt_I6_delta3(r)) < 1e-11);
}

TEST_CASE("mean of I1 from the transform and by simulation") {
  const double mu = 0.7, h = 1e-5;
  const double slope = (lt_I1(h, mu) - lt_I1(3 * h, mu)).real() / (2 * h);
  CHECK(slope == doctest::Approx(2.11580027113613).epsilon(1e-4));
  mc::SimConfig cfg;
  cfg.paths = 20000;
  cfg.dt = 0.01;
  cfg.seed = 11;
  const Params p{{"mu", mu}};
  const mc::SimResult r = mc::simulate_functional(diffusion_spec(Id::I1, p), functional_spec(Id::I1, p), cfg);
  INFO("MC mean " << r.mean << " +- " << r.std_error);
  CHECK(std::abs(r.mean - 2.11580027113613) <= 3.0 * r.std_error);
}

TEST_CASE("reduced hitting problems") {
  const auto h1 = zspec(Id::I1, {{"mu", 0.5}});
  CHECK(h1.drift(std::numbers::pi / 2) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(h1.target == doctest::Approx(std::numbers::pi));

  const auto h5 = zspec(Id::I5, {{"mu", 0.04}, {"sigma", 0.2}});
  CHECK(h5.interval.lo == doctest::Approx(-std::log(2.0) / 0.2));
  CHECK(std::abs(h5.interval.hi) < 1e-12);
  REQUIRE(h5.reflect_at.has_value());

  const auto h6 = zspec(Id::I6, {{"delta", 2.5}});
  CHECK(std::abs(h6.interval.lo) < 1e-12);
  CHECK(h6.interval.hi == doctest::Approx(1.0));
  CHECK(h6.target == h6.interval.lo);
  CHECK(h6.start == doctest::Approx(1.0));
  for (double z : {0.1, 0.4, 0.8})
    CHECK(h6.drift(z) == doctest::Approx(1 / (2 * z) * (1 + 1.5 / std::log(z))).epsilon(1e-10));
}

TEST_CASE("h-transformed I6 problem") {
  const auto up = htransform_I6(3.0);
  CHECK(up.interval.lo == 0.0);
  CHECK(up.interval.hi == 1.0);
  CHECK(up.start == 0.0);
  CHECK(up.target == 1.0);
  for (double z : {0.05, 0.5, 0.95}) CHECK(up.drift(z) == doctest::Approx(1 / (2 * z)).epsilon(1e-14));
  CHECK(htransform_I6(2.5).drift(0.5) == doctest::Approx(1.0 * (1 + 0.5 / std::log(0.5))).epsilon(1e-14));
  CHECK_THROWS_AS(htransform_I6(2.0), ConfigError);
  CHECK_THROWS_AS(htransform_I6(1.0), ConfigError);
}

TEST_CASE("entries") {
  for (Id id : all_ids()) {
    const Entry e = make_entry(id, default_params(id));
    CHECK(e.horizon > 0.0);
    CHECK_NOTHROW(e.hitting.validate());
    CHECK(e.lt.has_value() == (id != Id::I5 && (id != Id::I6 || e.params.at("delta") == 3.0)));
    CHECK(e.exact_cdf.has_value() == (id == Id::I2));
  }
  CHECK_FALSE(make_entry(Id::I6, {{"delta", 3.5}}).lt.has_value());
  const Entry z = make_entry(Id::I6, {{"delta", 3.0}}, true);
  CHECK(std::abs(z.hitting.target) < 1e-12);
  CHECK(presets(Id::I4).empty());
  for (Id id : {Id::I1, Id::I2, Id::I3, Id::I5, Id::I6}) CHECK(presets(id).size() == 3);
}

}  // TEST_SUITE
