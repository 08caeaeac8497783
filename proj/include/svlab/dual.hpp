// svlab - forward-mode dual numbers
//
// Scalar type carrying one directional derivative. Every evaluator in the
// library is templated on the scalar, so seeding the coordinates of a phase
// point with a tangent vector turns any weight or vector-field component into
// its exact directional derivative (no finite-difference truncation).
#pragma once

#include <cmath>
#include <iosfwd>

namespace svlab {

struct Dual {
  double v = 0.0;  // value
  double d = 0.0;  // derivative along the seeded direction

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value), d(0.0) {}
  constexpr Dual(double value, double deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) { d = (d - v / o.v * o.d) / o.v; v /= o.v; return *this; }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator+(const Dual& a) { return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
inline bool operator==(const Dual& a, const Dual& b) { return a.v == b.v; }
inline bool operator!=(const Dual& a, const Dual& b) { return a.v != b.v; }

inline Dual sqrt(const Dual& x) {
  double s = std::sqrt(x.v);
  return {s, x.d / (2.0 * s)};
}
inline Dual exp(const Dual& x) {
  double e = std::exp(x.v);
  return {e, e * x.d};
}
inline Dual log(const Dual& x) { return {std::log(x.v), x.d / x.v}; }
inline Dual sin(const Dual& x) { return {std::sin(x.v), std::cos(x.v) * x.d}; }
inline Dual cos(const Dual& x) { return {std::cos(x.v), -std::sin(x.v) * x.d}; }
inline Dual tan(const Dual& x) {
  double t = std::tan(x.v);
  return {t, (1.0 + t * t) * x.d};
}
// |x| is smooth away from 0; evaluators only call it where the argument has a
// definite sign (samplers exclude the zero loci).
inline Dual abs(const Dual& x) { return x.v < 0.0 ? Dual{-x.v, -x.d} : Dual{x.v, x.d}; }
inline Dual pow(const Dual& x, double e) {
  double p = std::pow(x.v, e);
  return {p, e * std::pow(x.v, e - 1.0) * x.d};
}
inline Dual atan(const Dual& x) { return {std::atan(x.v), x.d / (1.0 + x.v * x.v)}; }

inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }
inline double deriv(double) { return 0.0; }
inline double deriv(const Dual& x) { return x.d; }

std::ostream& operator<<(std::ostream& os, const Dual& x);

}  // namespace svlab
