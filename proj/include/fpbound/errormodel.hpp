#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpbound/program.hpp"

namespace fpbound {

enum class ModelKind { Exact, Absolute, RelativeDK, RelativeDiv, RelativeSqrt, CustomAbsolute, CustomRelative };
const char* to_string(ModelKind k);

// The rounding error of a step, written with a normalized error variable
// eta in [-1, 1]:
//   relative kinds  v = rhs * (1 + B(u)*eta)
//   absolute kinds  v = rhs + B(u)*eta
// B(u) >= 0 on [0, u_max].
struct ErrorModel {
  ModelKind kind = ModelKind::Exact;
  int ell = 0;  // binade exponent for Absolute
  Expr bound;   // B(u)
  bool relative() const {
    return kind == ModelKind::RelativeDK || kind == ModelKind::RelativeDiv || kind == ModelKind::RelativeSqrt ||
           kind == ModelKind::CustomRelative;
  }
  std::string describe() const;
};

struct AnnotatedStep {
  Step step;
  ErrorModel model;
  std::string eps;             // normalized error variable (empty for Exact)
  std::string raw;             // raw error variable e = B(u)*eps
  std::string note;            // why this model was chosen
  RationalInterval rhs_range;  // enclosure of the rounded argument
  Expr value_raw;              // computed value over inputs and raw error variables
  Expr value;                  // computed value over inputs, u and eps variables
  RationalInterval range;      // enclosure of the computed value
  bool range_known = true;     // false when an operand range contains a pole
};

struct AnalysisOptions {
  bool strict_paper_absolute = false;  // 2^(l+1) instead of 2^l in the absolute model
  std::optional<Rational> u_max;       // overrides the program's umax
};

struct AnalysisSystem {
  Program program;
  Rational u_max;
  Box inputs;                        // free inputs
  std::vector<AnnotatedStep> steps;
  std::vector<std::string> eps;      // error variables, in step order
  std::map<std::string, Expr> eps_bound;  // eps name -> B(u)
  std::map<std::string, RationalInterval> eps_slope;  // B'(0)
  std::vector<std::string> scale_inputs;
  // Objective R = result/target - 1 in the raw error variables e_i (where
  // e_i = B_i(u)*eta_i), and with the substitution applied.
  Expr objective_raw;
  Expr objective;
  std::vector<std::string> raw_vars;  // raw error variable per eps, same order

  // Box over inputs, u in [0, u_max] and every eps in [-1, 1].
  Box full_box() const;
  const AnnotatedStep& step(const std::string& lhs) const;
};

inline const char* kRawPrefix = "e_";
inline const char* kEpsPrefix = "eps_";

// B(u) for the square-root model: 1 - 1/sqrt(1+2u) written without
// cancellation at u = 0.
Expr sqrt_rel_bound();
// b(u) with u*b(u) = 1 - 1/sqrt(1+2u), the positive root of
// u(1+2u)b^2 - 2(1+2u)b + 2 = 0.
Expr sqrt_bound_fn();

AnalysisSystem analyze_steps(const Program& p, const AnalysisOptions& opt = {});

struct SplitSuggestion {
  std::string step;
  Rational boundary;                 // power of two inside the step's range
  std::optional<std::string> input;  // input whose split realizes the boundary
  std::optional<Rational> point;
  std::string text() const;
};

std::vector<SplitSuggestion> suggest_splits(const AnalysisSystem& sys);

// Machine-readable dump of the annotated system.
std::string system_json(const AnalysisSystem& sys);

// True when e >= 0 is proven over the box by interval bisection.
bool proven_nonnegative(const Expr& e, const Box& box, std::size_t max_boxes = 4000);

}  // namespace fpbound
