#pragma once

#include <cmath>

namespace ctk {

// Forward-mode dual number carrying one directional derivative. Jacobians are
// assembled from one seeded pass per coordinate direction.
struct Dual {
  double value = 0.0;
  double deriv = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v) {}  // NOLINT: implicit lift of constants
  constexpr Dual(double v, double d) : value(v), deriv(d) {}
};

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value; }

inline Dual operator-(const Dual& a) { return {-a.value, -a.deriv}; }
inline Dual operator+(const Dual& a, const Dual& b) {
  return {a.value + b.value, a.deriv + b.deriv};
}
inline Dual operator-(const Dual& a, const Dual& b) {
  return {a.value - b.value, a.deriv - b.deriv};
}
inline Dual operator*(const Dual& a, const Dual& b) {
  return {a.value * b.value, a.deriv * b.value + a.value * b.deriv};
}
inline Dual operator/(const Dual& a, const Dual& b) {
  const double q = a.value / b.value;
  return {q, (a.deriv - q * b.deriv) / b.value};
}

inline Dual sin(const Dual& a) {
  return {std::sin(a.value), std::cos(a.value) * a.deriv};
}
inline Dual cos(const Dual& a) {
  return {std::cos(a.value), -std::sin(a.value) * a.deriv};
}
inline Dual tan(const Dual& a) {
  const double t = std::tan(a.value);
  return {t, (1.0 + t * t) * a.deriv};
}
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value);
  return {e, e * a.deriv};
}
inline Dual log(const Dual& a) {
  return {std::log(a.value), a.deriv / a.value};
}
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.value);
  return {s, a.deriv / (2.0 * s)};
}
inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.value);
  return {t, (1.0 - t * t) * a.deriv};
}
inline Dual sinh(const Dual& a) {
  return {std::sinh(a.value), std::cosh(a.value) * a.deriv};
}
inline Dual cosh(const Dual& a) {
  return {std::cosh(a.value), std::sinh(a.value) * a.deriv};
}
inline Dual atan(const Dual& a) {
  return {std::atan(a.value), a.deriv / (1.0 + a.value * a.value)};
}

// a^k for a non-negative integer k; valid for any sign of a.
inline double pow_int(double a, unsigned k) {
  double result = 1.0;
  double base = a;
  while (k > 0) {
    if (k & 1u) result *= base;
    base *= base;
    k >>= 1u;
  }
  return result;
}
inline Dual pow_int(const Dual& a, unsigned k) {
  if (k == 0) return {1.0, 0.0};
  const double lower = pow_int(a.value, k - 1);
  return {lower * a.value, static_cast<double>(k) * lower * a.deriv};
}

// a^b for a > 0.
inline double pow_pos(double a, double b) { return std::pow(a, b); }
inline Dual pow_pos(const Dual& a, const Dual& b) {
  const double v = std::pow(a.value, b.value);
  return {v, v * (b.deriv * std::log(a.value) + b.value * a.deriv / a.value)};
}

}  // namespace ctk
