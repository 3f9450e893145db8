#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>

namespace fpbound {

// mpq_class keeps numerator/denominator in lowest terms with a positive
// denominator, so equality is canonical.
using Rational = mpq_class;
using BigInt = mpz_class;

Rational pow2(long k);
BigInt pow2z(unsigned long k);

// floor(log2|q|) for q != 0.
long floor_log2(const Rational& q);
bool is_pow2(const Rational& q);

BigInt floor_q(const Rational& q);
BigInt ceil_q(const Rational& q);

// Outward rounding to a dyadic with denominator 2^bits.
Rational round_down(const Rational& q, unsigned long bits);
Rational round_up(const Rational& q, unsigned long bits);

// Integer square root and exactness test.
BigInt isqrt(const BigInt& n);
bool exact_sqrt(const Rational& q, Rational& root);

Rational parse_rational(const std::string& s);
// Exact value of a decimal literal such as "-2.4999" (no exponent).
Rational parse_decimal(const std::string& s);
std::string to_string(const Rational& q);
std::string to_decimal(const Rational& q, int digits);

// Largest double <= q and smallest double >= q.
double to_double_down(const Rational& q);
double to_double_up(const Rational& q);

}  // namespace fpbound
