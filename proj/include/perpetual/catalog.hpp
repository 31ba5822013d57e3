#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "perpetual/laplace.hpp"
#include "perpetual/model.hpp"

namespace perpetual::catalog {

using special::Cplx;
using model::Params;

// I1: int cosh^-2(B^(mu)).   I2: int exp(-2 B^(mu,sigma)).   I3: int (exp(B^(mu)) + 1)^-2.
// I4, I5: one-sided versions of I2 and I3.   I6: int exp(-2 R^(delta)), R_0 = 0.
enum class Id { I1, I2, I3, I4, I5, I6 };

std::string_view to_string(Id id);
// CLI alias: cosh, dufresne, translated, onesided, onesided-translated, bessel.
std::string_view cli_name(Id id);
// Accepts "I1".."I6" (any case) and the CLI aliases.
std::optional<Id> parse_id(std::string_view name);
std::vector<Id> all_ids();

// Parameter names used by an entry (mu, sigma, delta).
std::vector<std::string> parameter_names(Id id);
Params default_params(Id id);
// Fills missing names from the defaults and checks ranges; throws ConfigError.
Params complete_params(Id id, const Params& given);

Cplx lt_I1(Cplx rho, double mu);
Cplx lt_I2(Cplx rho, double mu, double sigma);
Cplx lt_I3(Cplx rho, double mu);
Cplx lt_I4(Cplx rho, double mu, double sigma);
Cplx lt_I6_delta3(Cplx rho);

// P(I2 <= t).
double exact_cdf_I2(double t, double mu, double sigma);

// The underlying diffusion Y and functional for an entry.
model::DiffusionSpec diffusion_spec(Id id, const Params& params);
model::FunctionalSpec functional_spec(Id id, const Params& params);

// Closed-form drift of Z for an entry (I6: the untransformed Z).
std::function<double(double)> closed_form_drift(Id id, const Params& params);

class CatalogInconsistency : public Error {
 public:
  using Error::Error;
};

// Hitting problem produced by model::reduce / reduce_one_sided, checked against the closed-form drift.
model::HittingProblem zspec(Id id, const Params& params);

// Z-up for I6: drift 1/(2x) (1 + (3 - delta)/log x) on (0, 1), entered from 0, killed at 1.
model::HittingProblem htransform_I6(double delta);

struct Entry {
  Id id = Id::I1;
  Params params;
  std::optional<std::function<Cplx(Cplx)>> lt;  // E exp(-rho I)
  model::HittingProblem hitting;                // default PDE route
  std::optional<std::function<double(double)>> exact_cdf;
  model::DiffusionSpec diffusion;
  model::FunctionalSpec functional;
  double horizon = 10.0;  // default PDE time horizon
};

// For I6 the default PDE route is Z-up; `untransformed` selects Z instead.
Entry make_entry(Id id, const Params& params, bool untransformed = false);

// Figure parameter triples, ordered from the lowest to the highest CDF curve.
std::vector<Params> presets(Id id);

}  // namespace perpetual::catalog
