#include "fpbound/eval.hpp"

#include <stdexcept>
#include <unordered_map>

namespace fpbound {

Tape::Tape(const std::vector<Expr>& outputs, const std::vector<std::string>& vars) : vars_(vars) {
  std::unordered_map<int, int> var_pos;
  for (std::size_t i = 0; i < vars.size(); ++i) var_pos[var_index(vars[i])] = static_cast<int>(i);
  std::unordered_map<const Node*, int> slot;
  std::vector<std::pair<const Node*, bool>> stack;
  for (const Expr& o : outputs) {
    stack.push_back({o.node(), false});
    while (!stack.empty()) {
      auto [n, expanded] = stack.back();
      stack.pop_back();
      if (slot.count(n)) continue;
      if (!expanded) {
        stack.push_back({n, true});
        for (const Node* k : n->kids)
          if (!slot.count(k)) stack.push_back({k, false});
        continue;
      }
      Ins in;
      in.op = n->op;
      in.k = n->k;
      if (n->op == Op::Const) {
        in.c = n->c;
        in.cv = Ival::of(n->c);
      } else if (n->op == Op::Var) {
        auto it = var_pos.find(n->var);
        if (it == var_pos.end()) throw std::out_of_range("unbound variable " + var_name(n->var));
        in.var = it->second;
      }
      for (const Node* k : n->kids) in.args.push_back(slot.at(k));
      slot[n] = static_cast<int>(ins_.size());
      ins_.push_back(std::move(in));
    }
    out_.push_back(slot.at(o.node()));
  }
}

std::vector<RationalInterval> Tape::eval(const std::vector<RationalInterval>& x, int sqrt_bits) const {
  std::vector<RationalInterval> s(ins_.size());
  for (std::size_t i = 0; i < ins_.size(); ++i) {
    const Ins& in = ins_[i];
    switch (in.op) {
      case Op::Const:
        s[i] = RationalInterval(in.c);
        break;
      case Op::Var:
        s[i] = x.at(static_cast<std::size_t>(in.var));
        break;
      case Op::Sum: {
        RationalInterval r = s[in.args[0]];
        for (std::size_t j = 1; j < in.args.size(); ++j) r = r + s[in.args[j]];
        s[i] = r;
        break;
      }
      case Op::Prod: {
        RationalInterval r = s[in.args[0]];
        for (std::size_t j = 1; j < in.args.size(); ++j) r = r * s[in.args[j]];
        s[i] = r;
        break;
      }
      case Op::Quot:
        s[i] = s[in.args[0]] / s[in.args[1]];
        break;
      case Op::Sqrt:
        s[i] = s[in.args[0]].sqrt(sqrt_bits);
        break;
      case Op::Pow:
        s[i] = s[in.args[0]].pow(in.k);
        break;
    }
  }
  std::vector<RationalInterval> out;
  for (int o : out_) out.push_back(s[static_cast<std::size_t>(o)]);
  return out;
}

void Tape::eval_into(const std::vector<Ival>& x, std::vector<Ival>& s, std::vector<Ival>& out) const {
  s.resize(ins_.size());
  for (std::size_t i = 0; i < ins_.size(); ++i) {
    const Ins& in = ins_[i];
    switch (in.op) {
      case Op::Const:
        s[i] = in.cv;
        break;
      case Op::Var:
        s[i] = x[static_cast<std::size_t>(in.var)];
        break;
      case Op::Sum: {
        Ival r = s[in.args[0]];
        for (std::size_t j = 1; j < in.args.size(); ++j) r = r + s[in.args[j]];
        s[i] = r;
        break;
      }
      case Op::Prod: {
        Ival r = s[in.args[0]];
        for (std::size_t j = 1; j < in.args.size(); ++j) r = r * s[in.args[j]];
        s[i] = r;
        break;
      }
      case Op::Quot:
        s[i] = s[in.args[0]] / s[in.args[1]];
        break;
      case Op::Sqrt:
        s[i] = isqrt_iv(s[in.args[0]]);
        break;
      case Op::Pow:
        s[i] = ipow_iv(s[in.args[0]], in.k);
        break;
    }
  }
  out.resize(out_.size());
  for (std::size_t j = 0; j < out_.size(); ++j) out[j] = s[static_cast<std::size_t>(out_[j])];
}

std::vector<Ival> Tape::eval(const std::vector<Ival>& x) const {
  std::vector<Ival> s, out;
  eval_into(x, s, out);
  return out;
}

namespace {

std::vector<std::string> box_vars(const Expr& e, const Box& box) {
  std::vector<std::string> vs = e.free_vars();
  for (const auto& v : vs)
    if (!box.count(v)) throw std::out_of_range("interval_eval: no range for " + v);
  return vs;
}

}  // namespace

RationalInterval interval_eval(const Expr& e, const Box& box, int sqrt_bits) {
  std::vector<std::string> vs = box_vars(e, box);
  Tape t({e}, vs);
  std::vector<RationalInterval> x;
  for (const auto& v : vs) x.push_back(box.at(v));
  return t.eval(x, sqrt_bits)[0];
}

Ival ival_eval(const Expr& e, const Box& box) {
  std::vector<std::string> vs = box_vars(e, box);
  Tape t({e}, vs);
  std::vector<Ival> x;
  for (const auto& v : vs) x.push_back(Ival::of(box.at(v)));
  return t.eval(x)[0];
}

Rational exact_value(const Expr& e) {
  if (!e.free_vars().empty()) throw std::domain_error("exact_value: expression has free variables");
  RationalInterval r = interval_eval(e, {}, 64);
  if (!r.is_point()) throw std::domain_error("exact_value: irrational constant " + e.str());
  return r.lo();
}

}  // namespace fpbound
