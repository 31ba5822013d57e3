#pragma once

#include <complex>

namespace perpetual::special {

using Cplx = std::complex<double>;

// Lanczos (g = 7, 9 terms) with reflection for Re z < 0.5. Throws DomainError at poles.
Cplx gamma_c(Cplx z);
// A logarithm of Gamma(z); the imaginary part is only determined modulo 2*pi.
Cplx lgamma_c(Cplx z);
// 1/Gamma(z), zero at the poles.
Cplx rgamma_c(Cplx z);

// Modified Bessel functions of real order, principal branch, Re z > 0.
// Power series / integral representation for |z| <= 25, asymptotic expansions beyond.
Cplx bessel_i_c(double nu, Cplx z);
Cplx bessel_k_c(double nu, Cplx z);
// exp(-z) I_nu(z) and exp(z) K_nu(z); these never overflow.
Cplx bessel_i_scaled(double nu, Cplx z);
Cplx bessel_k_scaled(double nu, Cplx z);

// Gauss series sum_k (a)_k (b)_k / (c)_k x^k / k!, |x| < 1.
Cplx hyp2f1_c(Cplx a, Cplx b, Cplx c, double x);

struct IncGamma {
  double lower;  // P(s, x)
  double upper;  // Q(s, x)
};

// Regularized incomplete gamma functions; s > 0, x >= 0.
IncGamma reg_inc_gamma(double s, double x);

inline constexpr double kSeriesAsymptoticSwitch = 25.0;

}  // namespace perpetual::special
