#pragma once

#include <stdexcept>
#include <string>

#include "fpbound/rational.hpp"

namespace fpbound {

struct DivisionByIntervalContainingZero : std::runtime_error {
  DivisionByIntervalContainingZero() : std::runtime_error("division by interval containing zero") {}
};
struct SqrtOfPossiblyNegative : std::runtime_error {
  SqrtOfPossiblyNegative() : std::runtime_error("sqrt of possibly negative interval") {}
};

// Closed interval with rational endpoints. Every operation returns an
// enclosure of the exact image; endpoints are rounded outward to
// denominators <= 2^cap_bits when they grow past that.
class RationalInterval {
 public:
  RationalInterval() : lo_(0), hi_(0) {}
  RationalInterval(const Rational& p) : lo_(p), hi_(p) {}  // NOLINT
  RationalInterval(const Rational& lo, const Rational& hi);

  const Rational& lo() const { return lo_; }
  const Rational& hi() const { return hi_; }
  Rational width() const { return hi_ - lo_; }
  Rational mid() const { return (lo_ + hi_) / 2; }
  bool is_point() const { return lo_ == hi_; }
  bool contains(const Rational& q) const { return lo_ <= q && q <= hi_; }
  bool contains_zero() const { return sgn(lo_) <= 0 && sgn(hi_) >= 0; }
  bool subset_of(const RationalInterval& o) const { return o.lo_ <= lo_ && hi_ <= o.hi_; }
  Rational mag() const;

  static unsigned long cap_bits;

  RationalInterval operator-() const { return RationalInterval(-hi_, -lo_); }
  friend RationalInterval operator+(const RationalInterval& a, const RationalInterval& b);
  friend RationalInterval operator-(const RationalInterval& a, const RationalInterval& b);
  friend RationalInterval operator*(const RationalInterval& a, const RationalInterval& b);
  friend RationalInterval operator/(const RationalInterval& a, const RationalInterval& b);
  friend bool operator==(const RationalInterval& a, const RationalInterval& b) {
    return a.lo_ == b.lo_ && a.hi_ == b.hi_;
  }

  RationalInterval pow(int k) const;
  // Enclosure of sqrt with relative width <= 2^-sqrt_bits.
  RationalInterval sqrt(int sqrt_bits) const;
  RationalInterval hull(const RationalInterval& o) const;
  RationalInterval intersect(const RationalInterval& o) const;

  std::string str() const;

 private:
  void tidy();
  Rational lo_, hi_;
};

Rational sqrt_lower(const Rational& q, int sqrt_bits);
Rational sqrt_upper(const Rational& q, int sqrt_bits);

}  // namespace fpbound
