#include "perpetual/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "perpetual/special.hpp"

namespace perpetual::catalog {

using model::BoundaryKind;
using model::DiffusionSpec;
using model::FunctionalSpec;
using model::HittingProblem;
using model::Interval;
using model::kInf;
using special::lgamma_c;

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double get(const Params& p, const char* name) {
  auto it = p.find(name);
  if (it == p.end()) throw ConfigError(std::string("missing parameter ") + name);
  return it->second;
}

expr::Expr parse_with(std::string_view src, const Params& p) { return expr::parse(src, p); }

void check_rho(Cplx rho, bool allow_zero) {
  if (!(rho.real() > 0.0 || (allow_zero && rho.real() >= 0.0)))
    throw DomainError("Laplace variable must have positive real part");
}

}  // namespace

std::string_view to_string(Id id) {
  switch (id) {
    case Id::I1: return "I1";
    case Id::I2: return "I2";
    case Id::I3: return "I3";
    case Id::I4: return "I4";
    case Id::I5: return "I5";
    case Id::I6: return "I6";
  }
  return "?";
}

std::string_view cli_name(Id id) {
  switch (id) {
    case Id::I1: return "cosh";
    case Id::I2: return "dufresne";
    case Id::I3: return "translated";
    case Id::I4: return "onesided";
    case Id::I5: return "onesided-translated";
    case Id::I6: return "bessel";
  }
  return "?";
}

std::vector<Id> all_ids() { return {Id::I1, Id::I2, Id::I3, Id::I4, Id::I5, Id::I6}; }

std::optional<Id> parse_id(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Id id : all_ids()) {
    std::string s(to_string(id));
    s[0] = 'i';
    if (lower == s || lower == cli_name(id)) return id;
  }
  return std::nullopt;
}

std::vector<std::string> parameter_names(Id id) {
  switch (id) {
    case Id::I1:
    case Id::I3: return {"mu"};
    case Id::I2:
    case Id::I4:
    case Id::I5: return {"mu", "sigma"};
    case Id::I6: return {"delta"};
  }
  return {};
}

Params default_params(Id id) {
  switch (id) {
    case Id::I1: return {{"mu", 0.5}};
    case Id::I2: return {{"mu", 1.5}, {"sigma", 1.0}};
    case Id::I3: return {{"mu", 0.5}};
    case Id::I4: return {{"mu", 1.0}, {"sigma", 1.0}};
    case Id::I5: return {{"mu", 0.04}, {"sigma", 0.2}};
    case Id::I6: return {{"delta", 3.0}};
  }
  return {};
}

Params complete_params(Id id, const Params& given) {
  const auto names = parameter_names(id);
  for (const auto& [k, v] : given)
    if (std::find(names.begin(), names.end(), k) == names.end())
      throw ConfigError("parameter '" + k + "' does not apply to " + std::string(cli_name(id)));
  Params p = default_params(id);
  for (const auto& [k, v] : given) p[k] = v;
  for (const auto& [k, v] : p)
    if (!std::isfinite(v)) throw ConfigError("parameter " + k + " must be finite");
  if (p.count("mu") && !(p["mu"] > 0.0)) throw ConfigError("mu must be positive");
  if (p.count("sigma") && !(p["sigma"] > 0.0)) throw ConfigError("sigma must be positive");
  if (p.count("delta") && !(p["delta"] > 2.0)) throw ConfigError("delta must exceed 2");
  return p;
}

// K 2F1(alpha, beta, 1 + mu; 1/2) with alpha + beta = 1; the 2F1 is summed in closed form
// (Bailey), since the power series loses all digits for large |rho|.
Cplx lt_I1(Cplx rho, double mu) {
  check_rho(rho, true);
  if (!(mu > 0.0)) throw DomainError("lt_I1 requires mu > 0");
  const Cplx r = std::sqrt(Cplx(1.0) - 8.0 * rho);
  const Cplx alpha = 0.5 + 0.5 * r, beta = 0.5 - 0.5 * r;
  const double c = 1.0 + mu;
  const Cplx logK = lgamma_c(mu + alpha) + lgamma_c(mu + beta) - lgamma_c(mu) - lgamma_c(mu + 1.0);
  const Cplx logF = (1.0 - c) * std::log(2.0) + lgamma_c(c) + 0.5 * std::log(std::numbers::pi) -
                    lgamma_c((alpha + c) / 2.0) - lgamma_c((beta + c) / 2.0);
  return std::exp(logK + logF);
}

Cplx lt_I2(Cplx rho, double mu, double sigma) {
  check_rho(rho, false);
  if (!(mu > 0.0) || !(sigma > 0.0)) throw DomainError("lt_I2 requires mu, sigma > 0");
  const double nu = -mu / (sigma * sigma);
  const Cplx w = std::sqrt(2.0 * rho) / sigma;
  // phi(1/sigma) = sigma^nu K_nu(w); phi(0) = 2^{-(nu+2)/2} Gamma(-nu) rho^{nu/2}.
  const Cplx log_num = nu * std::log(sigma) + std::log(special::bessel_k_scaled(-nu, w)) - w;
  const Cplx log_den = -(nu + 2.0) / 2.0 * std::log(2.0) + lgamma_c(-nu) + nu / 2.0 * std::log(rho);
  return std::exp(log_num - log_den);
}

Cplx lt_I3(Cplx rho, double mu) {
  check_rho(rho, true);
  if (!(mu > 0.0)) throw DomainError("lt_I3 requires mu > 0");
  const Cplx s = std::sqrt(mu * mu + 2.0 * rho);
  const Cplx q = std::sqrt(0.25 + 2.0 * rho);
  const Cplx alpha = 0.5 - mu + s + q, beta = 0.5 - mu + s - q;
  const Cplx c = alpha + beta + 2.0 * mu;
  const Cplx logK = lgamma_c(2.0 * mu + alpha) + lgamma_c(2.0 * mu + beta) - lgamma_c(2.0 * mu + alpha + beta) -
                    lgamma_c(Cplx(2.0 * mu));
  return std::exp(logK + (mu - s) * std::log(2.0)) * special::hyp2f1_c(alpha, beta, c, 0.5);
}

Cplx lt_I4(Cplx rho, double mu, double sigma) {
  check_rho(rho, false);
  if (!(mu > 0.0) || !(sigma > 0.0)) throw DomainError("lt_I4 requires mu, sigma > 0");
  const double nu = mu / (sigma * sigma) - 1.0;
  const Cplx w = std::sqrt(2.0 * rho) / sigma;
  // psi(0) / psi(1/sigma) = (w/2)^nu / (Gamma(nu+1) I_nu(w)).
  const Cplx log_i = std::log(special::bessel_i_scaled(nu, w)) + w;
  return std::exp(nu * std::log(w / 2.0) - lgamma_c(Cplx(nu + 1.0)) - log_i);
}

Cplx lt_I6_delta3(Cplx rho) {
  check_rho(rho, true);
  const Cplx w = std::sqrt(2.0 * rho);
  return std::exp(-w) / special::bessel_i_scaled(0.0, w);
}

double exact_cdf_I2(double t, double mu, double sigma) {
  if (!(t > 0.0)) throw DomainError("exact_cdf_I2 requires t > 0");
  return special::reg_inc_gamma(mu / (sigma * sigma), 1.0 / (2.0 * sigma * sigma * t)).upper;
}

DiffusionSpec diffusion_spec(Id id, const Params& given) {
  const Params p = complete_params(id, given);
  DiffusionSpec y;
  y.params = p;
  y.start = 0.0;
  switch (id) {
    case Id::I1:
    case Id::I3:
      y.sigma = parse_with("1", p);
      y.drift = parse_with("mu", p);
      break;
    case Id::I2:
    case Id::I4:
    case Id::I5:
      y.sigma = parse_with("sigma", p);
      y.drift = parse_with("mu", p);
      break;
    case Id::I6:
      y.interval = {0.0, kInf};
      y.sigma = parse_with("1", p);
      y.drift = parse_with("(delta - 1)/(2*x)", p);
      y.left_boundary = BoundaryKind::EntranceNotExit;
      break;
  }
  return y;
}

FunctionalSpec functional_spec(Id id, const Params& given) {
  const Params p = complete_params(id, given);
  FunctionalSpec fs;
  switch (id) {
    case Id::I1:
      fs.f = parse_with("1/cosh(x)^2", p);
      fs.g = parse_with("2*atan(exp(x))", p);
      break;
    case Id::I2:
    case Id::I4:
      fs.f = parse_with("exp(-2*x)", p);
      fs.g = parse_with("-exp(-x)/sigma", p);
      fs.one_sided = id == Id::I4;
      break;
    case Id::I3:
      fs.f = parse_with("1/(exp(x) + 1)^2", p);
      fs.g = parse_with("-log(1 + exp(-x))", p);
      break;
    case Id::I5:
      fs.f = parse_with("1/(exp(x) + 1)^2", p);
      fs.g = parse_with("-log(1 + exp(-x))/sigma", p);
      fs.one_sided = true;
      break;
    case Id::I6:
      fs.f = parse_with("exp(-2*x)", p);
      fs.g = parse_with("exp(-x)", p);
      break;
  }
  return fs;
}

std::function<double(double)> closed_form_drift(Id id, const Params& given) {
  const Params p = complete_params(id, given);
  switch (id) {
    case Id::I1: {
      const double mu = get(p, "mu");
      return [mu](double z) { return 0.5 / std::tan(z) + mu / std::sin(z); };
    }
    case Id::I2:
    case Id::I4: {
      const double k = 0.5 - get(p, "mu") / (get(p, "sigma") * get(p, "sigma"));
      return [k](double z) { return k / z; };
    }
    case Id::I3: {
      const double mu = get(p, "mu");
      return [mu](double z) { return mu + (mu - 0.5) * std::exp(z) / (1.0 - std::exp(z)); };
    }
    case Id::I5: {
      const double mu = get(p, "mu"), s = get(p, "sigma");
      return [mu, s](double z) { return 0.5 * s + (mu - 0.5 * s * s) / (s * (1.0 - std::exp(s * z))); };
    }
    case Id::I6: {
      const double d = get(p, "delta");
      return [d](double z) { return 0.5 / z * (1.0 + (d - 1.0) / std::log(z)); };
    }
  }
  return {};
}

HittingProblem zspec(Id id, const Params& given) {
  const Params p = complete_params(id, given);
  const DiffusionSpec y = diffusion_spec(id, p);
  const FunctionalSpec fs = functional_spec(id, p);
  HittingProblem hp = fs.one_sided ? model::reduce_one_sided(y, fs) : model::reduce(y, fs, model::Target::right());
  hp.label = std::string(to_string(id));

  // Reduction vs closed form on the images of a grid in Y.
  const auto closed = closed_form_drift(id, p);
  const double x_lo = fs.one_sided || id == Id::I6 ? 0.05 : -6.0;
  for (int i = 0; i <= 40; ++i) {
    const double x = x_lo + (6.0 - x_lo) * i / 40.0;
    const double z = hp.transform->eval(x).v;
    const double a = hp.drift(z), b = closed(z);
    if (!(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b))))
      throw CatalogInconsistency(std::string(to_string(id)) + ": reduced drift " + num(a) + " differs from " +
                                 num(b) + " at z = " + num(z));
  }
  return hp;
}

HittingProblem htransform_I6(double delta) {
  if (!(delta > 2.0)) throw ConfigError("the h-transform of I6 requires delta > 2");
  HittingProblem hp;
  hp.interval = {0.0, 1.0};
  hp.drift = [delta](double x) { return 0.5 / x * (1.0 + (3.0 - delta) / std::log(x)); };
  hp.start = 0.0;
  hp.target = 1.0;
  hp.left_kind = BoundaryKind::EntranceNotExit;
  hp.right_kind = BoundaryKind::RegularKilling;
  hp.label = "I6-up";
  return hp;
}

Entry make_entry(Id id, const Params& given, bool untransformed) {
  Entry e;
  e.id = id;
  e.params = complete_params(id, given);
  const Params& p = e.params;
  e.diffusion = diffusion_spec(id, p);
  e.functional = functional_spec(id, p);
  switch (id) {
    case Id::I1: {
      const double mu = get(p, "mu");
      e.lt = [mu](Cplx r) { return lt_I1(r, mu); };
      e.horizon = 6.0;
      break;
    }
    case Id::I2: {
      const double mu = get(p, "mu"), s = get(p, "sigma");
      e.lt = [mu, s](Cplx r) { return lt_I2(r, mu, s); };
      e.exact_cdf = [mu, s](double t) { return exact_cdf_I2(t, mu, s); };
      e.horizon = 10.0;
      break;
    }
    case Id::I3: {
      const double mu = get(p, "mu");
      e.lt = [mu](Cplx r) { return lt_I3(r, mu); };
      e.horizon = 10.0;
      break;
    }
    case Id::I4: {
      const double mu = get(p, "mu"), s = get(p, "sigma");
      e.lt = [mu, s](Cplx r) { return lt_I4(r, mu, s); };
      e.horizon = 10.0;
      break;
    }
    case Id::I5:
      e.horizon = 60.0;
      break;
    case Id::I6:
      if (get(p, "delta") == 3.0) e.lt = [](Cplx r) { return lt_I6_delta3(r); };
      e.horizon = 5.0;
      break;
  }
  e.hitting = (id == Id::I6 && !untransformed) ? htransform_I6(get(p, "delta")) : zspec(id, p);
  return e;
}

std::vector<Params> presets(Id id) {
  switch (id) {
    case Id::I1: return {{{"mu", 0.3}}, {{"mu", 0.5}}, {{"mu", 0.7}}};
    case Id::I2: return {{{"mu", 0.75}, {"sigma", 1.0}}, {{"mu", 1.5}, {"sigma", 1.0}}, {{"mu", 2.5}, {"sigma", 1.0}}};
    case Id::I3: return {{{"mu", 0.25}}, {{"mu", 0.5}}, {{"mu", 0.75}}};
    case Id::I4: return {};
    case Id::I5:
      return {{{"mu", 0.03}, {"sigma", 0.2}}, {{"mu", 0.04}, {"sigma", 0.2}}, {{"mu", 0.05}, {"sigma", 0.2}}};
    case Id::I6: return {{{"delta", 2.5}}, {{"delta", 3.0}}, {{"delta", 3.5}}};
  }
  return {};
}

}  // namespace perpetual::catalog
