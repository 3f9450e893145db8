#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fpbound/interval.hpp"
#include "fpbound/rational.hpp"

namespace fpbound {

struct OverflowRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnderflowRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotRepresentable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary format with precision p. Exponents are unbounded in practice unless
// a preset with IEEE limits is requested.
struct FPFormat {
  int p = 53;
  long e_min = -(1L << 30);
  long e_max = 1L << 30;

  static FPFormat precision(int p);
  static FPFormat binary32();
  static FPFormat binary64();
  static FPFormat binary128();
  // binary64 with its IEEE exponent range (normal numbers only).
  static FPFormat binary64_ieee();
  Rational u() const { return pow2(-p); }
  std::string name() const;
  bool operator==(const FPFormat&) const = default;
};

// Value M * 2^(e - p + 1) with M = 0 or 2^(p-1) <= |M| < 2^p.
struct FPNum {
  mpz_class M;
  long e = 0;
  FPFormat fmt;

  Rational value() const;
  bool is_zero() const { return sgn(M) == 0; }
  int sign() const { return sgn(M); }
  std::string str() const;  // "M*2^k" with k = e - p + 1
};

FPNum fp_zero(const FPFormat& f);
// Correctly rounded, ties to even. Throws OverflowRange / UnderflowRange.
FPNum rn(const Rational& x, const FPFormat& f);
// Throws NotRepresentable unless x is exactly a format number.
FPNum fp_exact(const Rational& x, const FPFormat& f);

FPNum fp_add(const FPNum& a, const FPNum& b);
FPNum fp_sub(const FPNum& a, const FPNum& b);
FPNum fp_mul(const FPNum& a, const FPNum& b);
FPNum fp_div(const FPNum& a, const FPNum& b);
FPNum fp_fma(const FPNum& a, const FPNum& b, const FPNum& c);  // rn(a*b + c)
FPNum fp_sqrt(const FPNum& a);
FPNum fp_neg(const FPNum& a);
FPNum fp_abs(const FPNum& a);
// Exact scaling by 2^k.
FPNum fp_scale(const FPNum& a, long k);
bool fp_less(const FPNum& a, const FPNum& b);

// (rn(a+b), a+b-rn(a+b)); needs |a| >= |b| or e(a) >= e(b).
std::pair<FPNum, FPNum> fast_two_sum(const FPNum& a, const FPNum& b);
// (rn(ab), ab-rn(ab)) with the low part from an fma.
std::pair<FPNum, FPNum> fast_two_mult(const FPNum& a, const FPNum& b);

enum class HypotAlgo { Naive = 1, Scaled = 2, Beebe = 3, Borges = 4, Kahan = 5 };
HypotAlgo hypot_algo_from_string(const std::string& s);
std::string to_string(HypotAlgo a);

struct Transcript {
  std::vector<std::pair<std::string, FPNum>> steps;
  void add(const std::string& name, const FPNum& v) { steps.emplace_back(name, v); }
};

FPNum hypot_naive(const FPNum& x, const FPNum& y, Transcript* t = nullptr);
FPNum hypot_scaled(const FPNum& x, const FPNum& y, Transcript* t = nullptr);
FPNum hypot_beebe(const FPNum& x, const FPNum& y, Transcript* t = nullptr);
FPNum hypot_borges(const FPNum& x, const FPNum& y, Transcript* t = nullptr);
FPNum hypot_kahan(const FPNum& x, const FPNum& y, Transcript* t = nullptr);
FPNum run_hypot(HypotAlgo a, const FPNum& x, const FPNum& y, Transcript* t = nullptr);

struct ErrorMeasurement {
  RationalInterval rel_error_over_u;
  FPNum x, y, rho;
  Transcript transcript;
};

// Enclosure of |rho/sqrt(x^2+y^2) - 1| / u of width <= 2^-(p+20).
RationalInterval rel_error_over_u(const FPNum& rho, const FPNum& x, const FPNum& y);
ErrorMeasurement measure(HypotAlgo a, const FPNum& x, const FPNum& y);

}  // namespace fpbound
