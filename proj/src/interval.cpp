#include "fpbound/interval.hpp"

#include <algorithm>

namespace fpbound {

unsigned long RationalInterval::cap_bits = 256;

RationalInterval::RationalInterval(const Rational& lo, const Rational& hi) : lo_(lo), hi_(hi) {
  if (lo_ > hi_) throw std::invalid_argument("RationalInterval: lo > hi");
  tidy();
}

void RationalInterval::tidy() {
  lo_ = round_down(lo_, cap_bits);
  hi_ = round_up(hi_, cap_bits);
}

Rational RationalInterval::mag() const { return std::max(abs(lo_), abs(hi_)); }

RationalInterval operator+(const RationalInterval& a, const RationalInterval& b) {
  return RationalInterval(a.lo_ + b.lo_, a.hi_ + b.hi_);
}

RationalInterval operator-(const RationalInterval& a, const RationalInterval& b) {
  return RationalInterval(a.lo_ - b.hi_, a.hi_ - b.lo_);
}

RationalInterval operator*(const RationalInterval& a, const RationalInterval& b) {
  if (a.is_point() && b.is_point()) return RationalInterval(a.lo_ * b.lo_);
  Rational p[4] = {a.lo_ * b.lo_, a.lo_ * b.hi_, a.hi_ * b.lo_, a.hi_ * b.hi_};
  return RationalInterval(*std::min_element(p, p + 4), *std::max_element(p, p + 4));
}

RationalInterval operator/(const RationalInterval& a, const RationalInterval& b) {
  if (b.contains_zero()) throw DivisionByIntervalContainingZero();
  if (b.is_point()) {
    Rational r = 1 / b.lo_;
    return a * RationalInterval(r);
  }
  Rational inv_lo = 1 / b.hi_, inv_hi = 1 / b.lo_;
  return a * RationalInterval(round_down(inv_lo, RationalInterval::cap_bits),
                              round_up(inv_hi, RationalInterval::cap_bits));
}

RationalInterval RationalInterval::pow(int k) const {
  if (k < 0) throw std::invalid_argument("negative power");
  if (k == 0) return RationalInterval(Rational(1));
  Rational a, b;
  auto ipow = [](const Rational& x, int e) {
    Rational r;
    mpz_pow_ui(r.get_num_mpz_t(), x.get_num_mpz_t(), static_cast<unsigned long>(e));
    mpz_pow_ui(r.get_den_mpz_t(), x.get_den_mpz_t(), static_cast<unsigned long>(e));
    return r;
  };
  a = ipow(lo_, k);
  b = ipow(hi_, k);
  if (k % 2 == 1 || sgn(lo_) >= 0) return RationalInterval(std::min(a, b), std::max(a, b));
  if (sgn(hi_) <= 0) return RationalInterval(std::min(a, b), std::max(a, b));
  return RationalInterval(Rational(0), std::max(a, b));
}

Rational sqrt_lower(const Rational& q, int sqrt_bits) {
  if (sgn(q) == 0) return Rational(0);
  Rational r;
  if (exact_sqrt(q, r)) return r;
  // q*4^m has at least 2*(sqrt_bits+2) integer bits, so isqrt carries
  // sqrt_bits+2 significant bits.
  long m = sqrt_bits + 3 - floor_log2(q) / 2;
  if (m < 0) m = 0;
  BigInt scaled = floor_q(q * pow2(2 * m));
  Rational out(isqrt(scaled), pow2z(static_cast<unsigned long>(m)));
  out.canonicalize();
  return out;
}

Rational sqrt_upper(const Rational& q, int sqrt_bits) {
  if (sgn(q) == 0) return Rational(0);
  Rational r;
  if (exact_sqrt(q, r)) return r;
  long m = sqrt_bits + 3 - floor_log2(q) / 2;
  if (m < 0) m = 0;
  BigInt scaled = ceil_q(q * pow2(2 * m));
  BigInt s = isqrt(scaled);
  if (s * s < scaled) s += 1;
  Rational out(s, pow2z(static_cast<unsigned long>(m)));
  out.canonicalize();
  return out;
}

RationalInterval RationalInterval::sqrt(int sqrt_bits) const {
  if (sgn(lo_) < 0) throw SqrtOfPossiblyNegative();
  return RationalInterval(sqrt_lower(lo_, sqrt_bits), sqrt_upper(hi_, sqrt_bits));
}

RationalInterval RationalInterval::hull(const RationalInterval& o) const {
  return RationalInterval(std::min(lo_, o.lo_), std::max(hi_, o.hi_));
}

RationalInterval RationalInterval::intersect(const RationalInterval& o) const {
  Rational l = std::max(lo_, o.lo_), h = std::min(hi_, o.hi_);
  if (l > h) throw std::invalid_argument("empty intersection");
  return RationalInterval(l, h);
}

std::string RationalInterval::str() const { return "[" + lo_.get_str() + ", " + hi_.get_str() + "]"; }

}  // namespace fpbound
