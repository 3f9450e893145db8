#pragma once

#include <map>
#include <string>
#include <vector>

#include "fpbound/expr.hpp"
#include "fpbound/interval.hpp"
#include "fpbound/ival.hpp"

namespace fpbound {

using Box = std::map<std::string, RationalInterval>;

// Straight-line program for a set of expressions sharing subterms.
// Slots are in topological order; variables are bound by position.
class Tape {
 public:
  struct Ins {
    Op op;
    int k = 0;
    int var = -1;  // position in vars() for Op::Var
    Rational c;
    Ival cv;  // outward double enclosure of c
    std::vector<int> args;
  };

  Tape() = default;
  Tape(const std::vector<Expr>& outputs, const std::vector<std::string>& vars);

  const std::vector<std::string>& vars() const { return vars_; }
  std::size_t size() const { return ins_.size(); }
  std::size_t outputs() const { return out_.size(); }
  const std::vector<Ins>& instructions() const { return ins_; }
  const std::vector<int>& output_slots() const { return out_; }

  // Enclosures of all outputs. RationalInterval sqrt enclosures have relative
  // width <= 2^-sqrt_bits.
  std::vector<RationalInterval> eval(const std::vector<RationalInterval>& x, int sqrt_bits = 64) const;
  std::vector<Ival> eval(const std::vector<Ival>& x) const;
  // Same as eval but reuses a caller-owned slot buffer.
  void eval_into(const std::vector<Ival>& x, std::vector<Ival>& slots, std::vector<Ival>& out) const;

 private:
  std::vector<Ins> ins_;
  std::vector<int> out_;
  std::vector<std::string> vars_;
};

// Enclosure of e over the box. Raises DivisionByIntervalContainingZero or
// SqrtOfPossiblyNegative when the natural extension is undefined.
RationalInterval interval_eval(const Expr& e, const Box& box, int sqrt_bits = 64);
Ival ival_eval(const Expr& e, const Box& box);

// Exact value of a closed-form constant with no square roots of non-squares;
// throws std::domain_error otherwise.
Rational exact_value(const Expr& e);

}  // namespace fpbound
