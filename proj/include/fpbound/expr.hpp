#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fpbound/interval.hpp"
#include "fpbound/rational.hpp"

namespace fpbound {

enum class Op : std::uint8_t { Const, Var, Sum, Prod, Quot, Sqrt, Pow };

struct Node {
  Op op;
  int k = 0;  // Pow exponent
  std::uint32_t id = 0;
  std::size_t hash = 0;
  Rational c;        // Const value
  int var = -1;      // Var index into the global name table
  std::vector<const Node*> kids;
  std::vector<int> free;  // sorted free-variable indices
};

// Immutable handle on a hash-consed node. Structurally equal expressions
// share one node, so equality is pointer equality. Constructors normalize:
// sums are flattened with like terms merged and common factors pulled out;
// products and quotients are kept as coef * prod(base^e) / prod(base^e)
// with half-integer exponents so that sqrt(b)*sqrt(b) and b/sqrt(b) reduce.
class Expr {
 public:
  Expr();
  explicit Expr(const Node* n) : n_(n) {}

  static Expr constant(const Rational& c);
  static Expr constant(long c) { return constant(Rational(c)); }
  static Expr var(const std::string& name);
  static Expr sum(const std::vector<Expr>& terms);
  static Expr prod(const std::vector<Expr>& factors);
  static Expr quot(const Expr& num, const Expr& den);
  static Expr sqrt(const Expr& a);
  static Expr pow(const Expr& a, int k);

  const Node* node() const { return n_; }
  Op op() const { return n_->op; }
  bool is_const() const { return n_->op == Op::Const; }
  bool is_const(long v) const { return is_const() && n_->c == v; }
  const Rational& value() const { return n_->c; }
  const std::string& name() const;
  std::size_t nkids() const { return n_->kids.size(); }
  Expr kid(std::size_t i) const { return Expr(n_->kids[i]); }
  int exponent() const { return n_->k; }
  std::uint32_t id() const { return n_->id; }

  std::vector<std::string> free_vars() const;
  bool depends_on(const std::string& v) const;
  bool depends_on_index(int v) const;

  std::string str() const;

  friend bool operator==(const Expr& a, const Expr& b) { return a.n_ == b.n_; }
  friend bool operator!=(const Expr& a, const Expr& b) { return a.n_ != b.n_; }
  friend bool operator<(const Expr& a, const Expr& b) { return a.n_->id < b.n_->id; }

 private:
  const Node* n_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
inline Expr operator+(const Expr& a, long b) { return a + Expr::constant(b); }
inline Expr operator+(long a, const Expr& b) { return Expr::constant(a) + b; }
inline Expr operator-(const Expr& a, long b) { return a - Expr::constant(b); }
inline Expr operator-(long a, const Expr& b) { return Expr::constant(a) - b; }
inline Expr operator*(const Expr& a, long b) { return a * Expr::constant(b); }
inline Expr operator*(long a, const Expr& b) { return Expr::constant(a) * b; }
inline Expr operator/(const Expr& a, long b) { return a / Expr::constant(b); }
inline Expr operator/(long a, const Expr& b) { return Expr::constant(a) / b; }

int var_index(const std::string& name);
const std::string& var_name(int index);
std::size_t node_count();

// Number of distinct nodes reachable from e.
std::size_t dag_size(const Expr& e);

Expr substitute(const Expr& e, const std::map<std::string, Expr>& sub);

// Symbolic partial derivative. `seed` overrides the derivative of selected
// nodes; it is used to strip a known positive factor from d/d(eps).
Expr differentiate(const Expr& e, const std::string& v,
                   const std::unordered_map<const Node*, Expr>& seed = {});

// Degree of positive homogeneity in the given variables (all scaled by the
// same lambda > 0), or nullopt when e is not homogeneous.
std::optional<Rational> homogeneity_degree(const Expr& e, const std::vector<std::string>& vars);

// Distribute products and positive integer powers of sums over the sum
// terms (square-root arguments and denominators are left as they are) so
// that error-free differences such as t - (sqrt(t) + e)^2 cancel. Returns e
// unchanged when the expansion would exceed max_terms terms.
Expr expand(const Expr& e, std::size_t max_terms = 4096);

// Bring a sum over a common denominator and expand the numerator, so that
// x^2/(x^2+y^2) + y^2/(x^2+y^2) becomes 1. Returns e unchanged when the
// numerator would exceed max_terms terms.
Expr together(const Expr& e, std::size_t max_terms = 4096);

// Context-dependent rewriting: sqrt(a*b) -> sqrt(a)*sqrt(b) and
// sqrt(b^2) -> b when the factors are nonnegative over `domain`.
Expr simplify(const Expr& e, const std::map<std::string, RationalInterval>& domain);

}  // namespace fpbound
