#include "fpbound/rational.hpp"

#include <cmath>
#include <stdexcept>

namespace fpbound {

BigInt pow2z(unsigned long k) {
  BigInt r;
  mpz_ui_pow_ui(r.get_mpz_t(), 2, k);
  return r;
}

Rational pow2(long k) {
  Rational r;
  if (k >= 0) {
    r = Rational(pow2z(static_cast<unsigned long>(k)));
  } else {
    r = Rational(BigInt(1), pow2z(static_cast<unsigned long>(-k)));
  }
  return r;
}

long floor_log2(const Rational& q) {
  if (sgn(q) == 0) throw std::domain_error("floor_log2 of zero");
  BigInt n = abs(q.get_num());
  const BigInt& d = q.get_den();
  long e = static_cast<long>(mpz_sizeinbase(n.get_mpz_t(), 2)) -
           static_cast<long>(mpz_sizeinbase(d.get_mpz_t(), 2));
  // 2^e is within a factor 2 of |q|; correct by one step.
  Rational a = abs(q);
  if (a < pow2(e)) --e;
  else if (a >= pow2(e + 1)) ++e;
  return e;
}

bool is_pow2(const Rational& q) {
  if (sgn(q) <= 0) return false;
  return mpz_popcount(q.get_num_mpz_t()) == 1 && mpz_popcount(q.get_den_mpz_t()) == 1;
}

BigInt floor_q(const Rational& q) {
  BigInt r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

BigInt ceil_q(const Rational& q) {
  BigInt r;
  mpz_cdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

Rational round_down(const Rational& q, unsigned long bits) {
  if (mpz_sizeinbase(q.get_den_mpz_t(), 2) <= bits) return q;
  BigInt scaled = q.get_num() << bits;
  BigInt f;
  mpz_fdiv_q(f.get_mpz_t(), scaled.get_mpz_t(), q.get_den_mpz_t());
  Rational r(f, pow2z(bits));
  r.canonicalize();
  return r;
}

Rational round_up(const Rational& q, unsigned long bits) {
  if (mpz_sizeinbase(q.get_den_mpz_t(), 2) <= bits) return q;
  BigInt scaled = q.get_num() << bits;
  BigInt c;
  mpz_cdiv_q(c.get_mpz_t(), scaled.get_mpz_t(), q.get_den_mpz_t());
  Rational r(c, pow2z(bits));
  r.canonicalize();
  return r;
}

BigInt isqrt(const BigInt& n) {
  if (sgn(n) < 0) throw std::domain_error("isqrt of negative");
  BigInt r;
  mpz_sqrt(r.get_mpz_t(), n.get_mpz_t());
  return r;
}

bool exact_sqrt(const Rational& q, Rational& root) {
  if (sgn(q) < 0) return false;
  if (!mpz_perfect_square_p(q.get_num_mpz_t()) || !mpz_perfect_square_p(q.get_den_mpz_t()))
    return false;
  root = Rational(isqrt(q.get_num()), isqrt(q.get_den()));
  root.canonicalize();
  return true;
}

Rational parse_rational(const std::string& s) {
  Rational r;
  if (r.set_str(s, 10) != 0) throw std::invalid_argument("bad rational: " + s);
  r.canonicalize();
  return r;
}

Rational parse_decimal(const std::string& s) {
  std::string t = s;
  bool neg = !t.empty() && t[0] == '-';
  if (neg || (!t.empty() && t[0] == '+')) t = t.substr(1);
  auto dot = t.find('.');
  std::string digits = dot == std::string::npos ? t : t.substr(0, dot) + t.substr(dot + 1);
  std::size_t frac = dot == std::string::npos ? 0 : t.size() - dot - 1;
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("bad decimal: " + s);
  BigInt n(digits, 10), scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(frac));
  Rational r(n, scale);
  r.canonicalize();
  return neg ? Rational(-r) : r;
}

std::string to_string(const Rational& q) { return q.get_str(); }

std::string to_decimal(const Rational& q, int digits) {
  // Truncated fixed-point rendering; sign handled separately.
  BigInt scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(digits));
  Rational a = abs(q) * Rational(scale);
  BigInt v = floor_q(a);
  std::string s = v.get_str();
  if (static_cast<int>(s.size()) <= digits) s = std::string(digits + 1 - s.size(), '0') + s;
  std::string out = (sgn(q) < 0 ? "-" : "") + s.substr(0, s.size() - digits);
  if (digits > 0) out += "." + s.substr(s.size() - digits);
  return out;
}

double to_double_down(const Rational& q) {
  double d = q.get_d();  // truncates toward zero
  if (!std::isfinite(d)) return d;
  if (Rational(d) > q) d = std::nextafter(d, -INFINITY);
  return d;
}

double to_double_up(const Rational& q) {
  double d = q.get_d();
  if (!std::isfinite(d)) return d;
  if (Rational(d) < q) d = std::nextafter(d, INFINITY);
  return d;
}

}  // namespace fpbound
