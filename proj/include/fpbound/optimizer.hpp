#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpbound/errormodel.hpp"

namespace fpbound {

struct BudgetExhausted : std::runtime_error {
  RationalInterval enclosure;  // sound upper end, loose lower end
  explicit BudgetExhausted(const RationalInterval& e)
      : std::runtime_error("branch-and-bound budget exhausted"), enclosure(e) {}
};

struct CounterexampleFound : std::runtime_error {
  Box point;
  Rational value, bound;
  CounterexampleFound(Box p, Rational v, Rational b);
};

enum class Direction { Max, Min };

// Which end of its range each error variable (or input) is fixed to when
// maximizing (Max) or minimizing (Min) the objective.
struct PinningAssignment {
  enum State { PinnedLo, PinnedHi, Branched };
  Direction direction = Direction::Max;
  std::map<std::string, State> vars;
  std::vector<std::string> trace;

  std::vector<std::string> branched() const;
  // Restrict box to the pinned ends.
  Box apply(const Box& box) const;
};

// Pins error variables by the sign of the partial derivative of the
// objective over the remaining box, iterated until nothing changes.
// Inputs the objective does not depend on are pinned to lo.
PinningAssignment pin_by_monotonicity(const AnalysisSystem& sys, Direction d);

struct OptimizerOptions {
  Rational alpha_tol = pow2(-46);
  Rational beta_tol = pow2(-20);
  std::size_t budget = 1000000;
  bool linear_only = false;
};

// Enclosure of the sup over the box of direction*objective, with u
// restricted to u_range (a sub-interval of [0, u_max]). Throws
// BudgetExhausted when tol is not reached within budget boxes.
RationalInterval branch_and_bound_max(const AnalysisSystem& sys, const PinningAssignment& pins,
                                      const RationalInterval& u_range, const Rational& tol, std::size_t budget);
// sup |objective| with u in u_range.
RationalInterval sup_abs_objective(const AnalysisSystem& sys, const RationalInterval& u_range, const Rational& tol,
                                   std::size_t budget);

struct LinearResult {
  RationalInterval alpha;
  bool exhausted = false;
  std::size_t boxes = 0;
  std::vector<std::string> trace;
};
// alpha = sup over the inputs of sum_i |B_i'(0) * dR/de_i at e = 0|.
LinearResult linear_bound(const AnalysisSystem& sys, const OptimizerOptions& opt = {});

struct QuadraticResult {
  RationalInterval beta;
  bool tight = false;
  bool exhausted = false;
  std::size_t boxes = 0;
  std::vector<std::string> trace;
};
// beta = sup over u in (0, u_max] and the box of (|R| - alpha_hi*u)/u^2.
QuadraticResult quadratic_bound(const AnalysisSystem& sys, const Rational& alpha_hi, const OptimizerOptions& opt = {});

// When both pinnings fix every variable, the objective reduces to functions
// S(u) and alpha is exactly the larger of their slopes at 0.
std::optional<Rational> pinned_alpha(const AnalysisSystem& sys);

struct BoundResult {
  RationalInterval alpha;
  std::optional<RationalInterval> beta;
  Rational u_max;
  bool tight = false;
  bool exhausted = false;
  std::vector<std::string> trace;
  std::string json() const;
};

BoundResult compute_bound(const AnalysisSystem& sys, const OptimizerOptions& opt = {});

struct CertifyReport {
  std::size_t samples = 0;
  std::size_t skipped = 0;  // points where the objective is undefined
  double max_ratio = 0;     // max |objective| / bound
  Box worst;
};
// Samples admissible points and checks |objective| <= alpha.hi*u + beta.hi*u^2.
// Throws CounterexampleFound on a violation.
CertifyReport certify(const AnalysisSystem& sys, const BoundResult& r, std::size_t n_samples, unsigned long seed = 1);

}  // namespace fpbound
