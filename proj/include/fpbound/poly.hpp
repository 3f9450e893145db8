#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpbound/eval.hpp"
#include "fpbound/expr.hpp"
#include "fpbound/rational.hpp"

namespace fpbound {

struct ZeroPolynomial : std::invalid_argument {
  ZeroPolynomial() : std::invalid_argument("zero polynomial has infinitely many roots") {}
};
struct NotSmoothAtZero : std::domain_error {
  explicit NotSmoothAtZero(const std::string& what) : std::domain_error(what) {}
};

// Dense univariate polynomial over Q, c[i] is the coefficient of t^i.
// The coefficient vector never has trailing zeros.
class UPoly {
 public:
  UPoly() = default;
  explicit UPoly(std::vector<Rational> c);
  static UPoly monomial(const Rational& a, int k);

  int degree() const { return static_cast<int>(c_.size()) - 1; }  // -1 for zero
  bool is_zero() const { return c_.empty(); }
  const std::vector<Rational>& coeffs() const { return c_; }
  Rational coeff(int i) const { return i < static_cast<int>(c_.size()) ? c_[static_cast<std::size_t>(i)] : Rational(0); }
  Rational lead() const { return c_.back(); }

  Rational operator()(const Rational& t) const;
  RationalInterval operator()(const RationalInterval& t) const;
  UPoly derivative() const;

  friend UPoly operator+(const UPoly& a, const UPoly& b);
  friend UPoly operator-(const UPoly& a, const UPoly& b);
  friend UPoly operator*(const UPoly& a, const UPoly& b);
  friend bool operator==(const UPoly& a, const UPoly& b) { return a.c_ == b.c_; }
  // Euclidean division; throws on division by zero.
  static void divmod(const UPoly& a, const UPoly& b, UPoly& q, UPoly& r);
  static UPoly gcd(const UPoly& a, const UPoly& b);

  std::string str(const std::string& var = "t") const;

 private:
  void trim();
  std::vector<Rational> c_;
};

// Polynomial form of e in `var` when e is a polynomial with rational
// coefficients (other free variables are rejected).
std::optional<UPoly> to_upoly(const Expr& e, const std::string& var);

// Number of distinct real roots in (lo, hi]. Raises ZeroPolynomial.
int sturm_root_count(const UPoly& p, const Rational& lo, const Rational& hi);

enum class Sign { Positive, Negative, Unknown };
const char* to_string(Sign s);

struct SignOptions {
  std::size_t max_boxes = 200000;
  // Per-variable scale for choosing the bisection direction; variables not
  // listed use their initial width.
  std::map<std::string, Rational> scale;
};

// Positive (resp. Negative) means e > 0 (resp. < 0) on every point of the
// box, proven by interval evaluation over a bisection; Unknown otherwise.
Sign sign_on_box(const Expr& e, const Box& box, const SignOptions& opt = {});

// A Taylor coefficient: exact when rational, else an enclosure.
struct SeriesCoeff {
  bool exact = true;
  Rational value;
  RationalInterval enclosure;
  double approx() const;
};

// Taylor coefficients c_0..c_order of e at var = 0 (one-sided from the right
// when e involves sqrt of a function vanishing to even order). Other free
// variables are not allowed. Enclosures have width <= 2^-60.
std::vector<SeriesCoeff> series_at_zero(const Expr& e, const std::string& var, int order);

}  // namespace fpbound
