#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>

#include "fpbound/interval.hpp"

namespace fpbound {

// Double-endpoint interval. Each operation computes the round-to-nearest
// result and steps one ulp outward when that result was inexact.
struct Ival {
  double lo = 0, hi = 0;

  Ival() = default;
  explicit Ival(double p) : lo(p), hi(p) {}
  Ival(double l, double h) : lo(l), hi(h) {}
  static Ival of(const Rational& q) { return Ival(to_double_down(q), to_double_up(q)); }
  static Ival of(const RationalInterval& q) {
    return Ival(to_double_down(q.lo()), to_double_up(q.hi()));
  }

  bool contains_zero() const { return lo <= 0 && hi >= 0; }
  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool is_point() const { return lo == hi; }
};

// Adjacent doubles by stepping the bit pattern; zero and non-finite values
// go through nextafter.
inline double up(double x) {
  if (x == 0 || !std::isfinite(x)) return std::nextafter(x, INFINITY);
  auto b = std::bit_cast<std::uint64_t>(x);
  return std::bit_cast<double>(x > 0 ? b + 1 : b - 1);
}
inline double down(double x) {
  if (x == 0 || !std::isfinite(x)) return std::nextafter(x, -INFINITY);
  auto b = std::bit_cast<std::uint64_t>(x);
  return std::bit_cast<double>(x > 0 ? b - 1 : b + 1);
}

// Directed results from the round-to-nearest value and its exact residual
// (TwoSum / fma); the ulp step is taken only when the result was inexact.
inline double add_down(double a, double b) {
  double s = a + b;
  if (!std::isfinite(s)) return s;
  double bb = s - a;
  double err = (a - (s - bb)) + (b - bb);
  return err < 0 ? down(s) : s;
}
inline double add_up(double a, double b) {
  double s = a + b;
  if (!std::isfinite(s)) return s;
  double bb = s - a;
  double err = (a - (s - bb)) + (b - bb);
  return err > 0 ? up(s) : s;
}
inline double mul_down(double a, double b) {
  double p = a * b;
  if (!std::isfinite(p)) return p;
  // a tiny product may underflow, where fma's residual is not exact
  if (p != 0 && std::fabs(p) < 0x1p-900) return down(p);
  if (p == 0 && a != 0 && b != 0) return (a < 0) != (b < 0) ? down(0.0) : 0.0;
  return std::fma(a, b, -p) < 0 ? down(p) : p;
}
inline double mul_up(double a, double b) {
  double p = a * b;
  if (!std::isfinite(p)) return p;
  if (p != 0 && std::fabs(p) < 0x1p-900) return up(p);
  if (p == 0 && a != 0 && b != 0) return (a < 0) != (b < 0) ? 0.0 : up(0.0);
  return std::fma(a, b, -p) > 0 ? up(p) : p;
}
inline double div_down(double a, double b) {
  double q = a / b;
  if (!std::isfinite(q)) return q;
  if (a == 0) return q;
  if (std::fabs(q) < 0x1p-900 || std::fabs(a) < 0x1p-900) return down(q);
  double r = std::fma(-q, b, a);  // a - q*b, exact
  return (r != 0 && (r < 0) != (b < 0)) ? down(q) : q;
}
inline double div_up(double a, double b) {
  double q = a / b;
  if (!std::isfinite(q)) return q;
  if (a == 0) return q;
  if (std::fabs(q) < 0x1p-900 || std::fabs(a) < 0x1p-900) return up(q);
  double r = std::fma(-q, b, a);
  return (r != 0 && (r < 0) == (b < 0)) ? up(q) : q;
}

inline Ival operator+(Ival a, Ival b) { return Ival(add_down(a.lo, b.lo), add_up(a.hi, b.hi)); }
inline Ival operator-(Ival a) { return Ival(-a.hi, -a.lo); }
inline Ival operator-(Ival a, Ival b) { return a + (-b); }

inline Ival operator*(Ival a, Ival b) {
  double l = std::min(std::min(mul_down(a.lo, b.lo), mul_down(a.lo, b.hi)),
                      std::min(mul_down(a.hi, b.lo), mul_down(a.hi, b.hi)));
  double h = std::max(std::max(mul_up(a.lo, b.lo), mul_up(a.lo, b.hi)), std::max(mul_up(a.hi, b.lo), mul_up(a.hi, b.hi)));
  return Ival(l, h);
}

inline Ival operator/(Ival a, Ival b) {
  if (b.contains_zero()) throw DivisionByIntervalContainingZero();
  double l = std::min(std::min(div_down(a.lo, b.lo), div_down(a.lo, b.hi)),
                      std::min(div_down(a.hi, b.lo), div_down(a.hi, b.hi)));
  double h = std::max(std::max(div_up(a.lo, b.lo), div_up(a.lo, b.hi)), std::max(div_up(a.hi, b.lo), div_up(a.hi, b.hi)));
  return Ival(l, h);
}

inline double sqrt_down(double a) {
  double s = std::sqrt(a);
  if (s == 0 || !std::isfinite(s)) return s;
  if (a < 0x1p-900) return down(s);
  return std::fma(-s, s, a) < 0 ? down(s) : s;
}
inline double sqrt_up(double a) {
  double s = std::sqrt(a);
  if (!std::isfinite(s)) return s;
  if (s == 0) return a == 0 ? 0.0 : up(0.0);
  if (a < 0x1p-900) return up(s);
  return std::fma(-s, s, a) > 0 ? up(s) : s;
}

inline Ival isqrt_iv(Ival a) {
  if (a.lo < 0) throw SqrtOfPossiblyNegative();
  return Ival(sqrt_down(a.lo), sqrt_up(a.hi));
}

inline Ival ipow_iv(Ival a, int k) {
  if (k == 0) return Ival(1.0);
  Ival r = a;
  for (int i = 1; i < k; ++i) r = r * a;
  if (k % 2 == 0) {
    // even power of an interval straddling zero
    if (a.contains_zero()) {
      double m = std::max(-a.lo, a.hi);
      Ival s(m);
      for (int i = 1; i < k; ++i) s = s * Ival(m);
      return Ival(0.0, s.hi);
    }
    r.lo = std::max(r.lo, 0.0);
  }
  return r;
}

inline Ival hull(Ival a, Ival b) { return Ival(std::min(a.lo, b.lo), std::max(a.hi, b.hi)); }

}  // namespace fpbound
