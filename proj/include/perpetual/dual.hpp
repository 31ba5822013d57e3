#pragma once

#include <cmath>

namespace perpetual {

// Second-order forward-mode dual number: value and first two derivatives.
struct Dual2 {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  static Dual2 constant(double c) { return {c, 0.0, 0.0}; }
  static Dual2 variable(double x) { return {x, 1.0, 0.0}; }
};

// h(u) given h(u.v), h'(u.v), h''(u.v).
inline Dual2 chain(const Dual2& u, double h0, double h1, double h2) {
  return {h0, h1 * u.d1, h2 * u.d1 * u.d1 + h1 * u.d2};
}

inline Dual2 operator-(const Dual2& a) { return {-a.v, -a.d1, -a.d2}; }
inline Dual2 operator+(const Dual2& a, const Dual2& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
inline Dual2 operator-(const Dual2& a, const Dual2& b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
inline Dual2 operator*(const Dual2& a, const Dual2& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
// Caller guarantees b.v != 0.
inline Dual2 operator/(const Dual2& a, const Dual2& b) {
  const double inv = 1.0 / b.v;
  const double q = a.v * inv;
  const double q1 = (a.d1 - q * b.d1) * inv;
  const double q2 = (a.d2 - 2.0 * q1 * b.d1 - q * b.d2) * inv;
  return {q, q1, q2};
}
inline Dual2 operator*(double c, const Dual2& a) { return {c * a.v, c * a.d1, c * a.d2}; }
inline Dual2 operator+(double c, const Dual2& a) { return {c + a.v, a.d1, a.d2}; }

// Caller guarantees a.v > 0.
inline Dual2 sqrt(const Dual2& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

}  // namespace perpetual
