#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "perpetual/errors.hpp"
#include "perpetual/special.hpp"

namespace perpetual::laplace {

using special::Cplx;

enum class TransformKind { Density, Ccdf };

// Laplace transform of a density or of a complementary distribution function.
struct TransformFn {
  std::function<Cplx(Cplx)> eval;
  TransformKind kind = TransformKind::Ccdf;
};

struct EulerParams {
  double A = 18.4;
  int m = 11;
  int n = 15;
  void validate() const;
};

struct Inversion {
  double value = 0.0;
  double err_est = 0.0;  // |E(m, n+1, t) - E(m, n, t)|
};

class TransformEvaluationError : public NumericalError {
 public:
  TransformEvaluationError(Cplx lambda, const std::string& what);
  Cplx lambda() const noexcept { return lambda_; }

 private:
  Cplx lambda_;
};

// C(m, k) / 2^m, k = 0..m.
std::vector<double> binomial_weights(int m);

// Abate-Whitt Euler algorithm at a single t > 0.
Inversion euler_invert(const TransformFn& tf, double t, const EulerParams& p = {});

// (1 - E[exp(-lambda H)]) / lambda from the transform of the hitting time.
TransformFn ccdf_transform(std::function<Cplx(Cplx)> lt);
// The hitting-time transform itself, read as the transform of its density.
TransformFn density_transform(std::function<Cplx(Cplx)> lt);

struct GridPoint {
  double t = 0.0;
  double value = 0.0;  // CCDF values clamped to [0, 1]
  double raw = 0.0;
  double err_est = 0.0;
  bool flagged = false;  // err_est above the flag threshold
};

std::vector<GridPoint> invert_on_grid(const TransformFn& tf, std::span<const double> t_grid, const EulerParams& p = {},
                                      double flag_threshold = 1e-6);

// Indices i where a CCDF grid increases: raw[i] > raw[i-1] + tol.
std::vector<std::size_t> monotonicity_violations(const std::vector<GridPoint>& ccdf, double tol = 1e-6);

}  // namespace perpetual::laplace
