#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpbound/eval.hpp"
#include "fpbound/expr.hpp"

namespace fpbound {

struct DslError : std::runtime_error {
  int line, column;
  DslError(const std::string& kind, const std::string& msg, int line_, int col_)
      : std::runtime_error(kind + " at " + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg),
        line(line_),
        column(col_) {}
};
struct SyntaxError : DslError {
  SyntaxError(const std::string& m, int l, int c) : DslError("SyntaxError", m, l, c) {}
};
struct UndefinedVariable : DslError {
  UndefinedVariable(const std::string& m, int l, int c) : DslError("UndefinedVariable", m, l, c) {}
};
struct NonTriangularProgram : DslError {
  NonTriangularProgram(const std::string& m, int l, int c) : DslError("NonTriangularProgram", m, l, c) {}
};
struct EmptyRange : DslError {
  EmptyRange(const std::string& m, int l, int c) : DslError("EmptyRange", m, l, c) {}
};

enum class Annotation { Default, Exact, ForceAbsolute, CustomAbsolute, CustomRelative };
const char* to_string(Annotation a);

struct InputDecl {
  std::string name;
  RationalInterval range;
  // Error-free defining relation over earlier inputs (e.g. y = alpha*x).
  std::optional<Expr> exact_relation;
  int line = 0;
};

struct Step {
  std::string lhs;
  Expr rhs;
  Annotation annotation = Annotation::Default;
  std::optional<Expr> bound;  // in the variable u, for the custom annotations
  bool rounded = true;        // false for `name = expr exact`
  int line = 0;
};

struct Program {
  std::string name;
  std::vector<InputDecl> inputs;
  Rational u_max{1, 64};
  std::vector<Step> steps;
  Expr target;

  const std::string& result() const { return steps.back().lhs; }
  // Box over the free inputs (those without an exact relation).
  Box input_box() const;
  // Substitute exact relations so that e depends on free inputs only.
  Expr resolve_relations(const Expr& e) const;
  // Exact (error-free) value of every step over the free inputs.
  std::map<std::string, Expr> exact_values() const;
};

// Reserved name of the unit round-off in bound expressions and analyses.
inline const char* kUnitVar = "u";

Program parse_program(const std::string& text, const std::string& name = "");
Program load_program(const std::string& path);
std::string print_program(const Program& p);

// Instruction shapes a*b + c, a/b and sqrt(a). Constant-only right-hand
// sides (rounding a known real) are a fourth shape.
struct Shape {
  enum Kind { Fma, Div, Sqrt, Const } kind = Fma;
  Expr a, b, c;  // Fma: a*b + c; Div: a/b; Sqrt: sqrt(a)
};
std::optional<Shape> match_shape(const Expr& rhs);

struct Diagnostic {
  enum Level { Warning, Error } level = Warning;
  int line = 0;
  std::string step;
  std::string message;
};

// Inputs with nonnegative ranges in which the target is jointly positively
// homogeneous; binade position of quantities that scale with them is
// arbitrary, so only scale-free steps get binade diagnostics.
std::vector<std::string> scale_inputs(const Program& p);

std::vector<Diagnostic> validate(const Program& p);

}  // namespace fpbound
