#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "fpbound/eval.hpp"

namespace fpbound {

// Truncated Taylor series c_0 + c_1 t + ... + c_K t^K with interval
// coefficients. Evaluated with interval inputs, coefficient k encloses
// f^(k)(x)/k! at every point x of the input box.
constexpr std::size_t kMaxJetOrder = 4;

template <class I>
struct Jet {
  std::array<I, kMaxJetOrder + 1> c{};
  std::size_t n = 1;  // number of coefficients

  Jet() = default;
  Jet(std::size_t len, const I& fill) : n(len) {
    if (len > kMaxJetOrder + 1) throw std::length_error("jet order too large");
    for (std::size_t k = 0; k < n; ++k) c[k] = fill;
  }
  std::size_t size() const { return n; }
  I& operator[](std::size_t k) { return c[k]; }
  const I& operator[](std::size_t k) const { return c[k]; }
};

template <class I>
struct JetArith;

template <>
struct JetArith<Ival> {
  static Ival constant(const Tape::Ins& in) { return in.cv; }
  static Ival zero() { return Ival(0.0); }
  static Ival scalar(double k) { return Ival(k); }
  static Ival sqrt(const Ival& a, int) { return isqrt_iv(a); }
  static Ival pow(const Ival& a, int k) { return ipow_iv(a, k); }
};

template <>
struct JetArith<RationalInterval> {
  static RationalInterval constant(const Tape::Ins& in) { return RationalInterval(in.c); }
  static RationalInterval zero() { return RationalInterval(Rational(0)); }
  static RationalInterval scalar(double k) { return RationalInterval(Rational(k)); }
  static RationalInterval sqrt(const RationalInterval& a, int bits) { return a.sqrt(bits); }
  static RationalInterval pow(const RationalInterval& a, int k) { return a.pow(k); }
};

template <class I>
Jet<I> jet_mul(const Jet<I>& a, const Jet<I>& b) {
  std::size_t n = a.size();
  Jet<I> r(n, JetArith<I>::zero());
  for (std::size_t k = 0; k < n; ++k) {
    I s = a[0] * b[k];
    for (std::size_t i = 1; i <= k; ++i) s = s + a[i] * b[k - i];
    r[k] = s;
  }
  return r;
}

template <class I>
Jet<I> jet_div(const Jet<I>& a, const Jet<I>& b) {
  std::size_t n = a.size();
  Jet<I> q(n, JetArith<I>::zero());
  for (std::size_t k = 0; k < n; ++k) {
    I s = a[k];
    for (std::size_t i = 1; i <= k; ++i) s = s - b[i] * q[k - i];
    q[k] = s / b[0];
  }
  return q;
}

template <class I>
Jet<I> jet_sqrt(const Jet<I>& a, int bits) {
  std::size_t n = a.size();
  Jet<I> s(n, JetArith<I>::zero());
  s[0] = JetArith<I>::sqrt(a[0], bits);
  if (n == 1) return s;
  I two_s0 = s[0] + s[0];
  for (std::size_t k = 1; k < n; ++k) {
    I t = a[k];
    for (std::size_t i = 1; i < k; ++i) t = t - s[i] * s[k - i];
    s[k] = t / two_s0;
  }
  return s;
}

template <class I>
Jet<I> jet_add(const Jet<I>& a, const Jet<I>& b) {
  Jet<I> r = a;
  for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] + b[k];
  return r;
}

// Jets of every tape output. Inputs are jets of the tape variables, all of
// the same length.
template <class I>
std::vector<Jet<I>> eval_jets(const Tape& tape, const std::vector<Jet<I>>& x, int sqrt_bits = 160) {
  using A = JetArith<I>;
  std::size_t n = x.empty() ? 1 : x[0].size();
  const auto& ins = tape.instructions();
  std::vector<Jet<I>> s(ins.size());
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const Tape::Ins& in = ins[i];
    switch (in.op) {
      case Op::Const:
        s[i] = Jet<I>(n, A::zero());
        s[i][0] = A::constant(in);
        break;
      case Op::Var:
        s[i] = x.at(static_cast<std::size_t>(in.var));
        break;
      case Op::Sum: {
        Jet<I> r = s[in.args[0]];
        for (std::size_t j = 1; j < in.args.size(); ++j) r = jet_add(r, s[in.args[j]]);
        s[i] = std::move(r);
        break;
      }
      case Op::Prod: {
        Jet<I> r = s[in.args[0]];
        for (std::size_t j = 1; j < in.args.size(); ++j) r = jet_mul(r, s[in.args[j]]);
        s[i] = std::move(r);
        break;
      }
      case Op::Quot:
        s[i] = jet_div(s[in.args[0]], s[in.args[1]]);
        break;
      case Op::Sqrt:
        s[i] = jet_sqrt(s[in.args[0]], sqrt_bits);
        break;
      case Op::Pow: {
        const Jet<I>& a = s[in.args[0]];
        Jet<I> r(n, A::zero());
        r[0] = A::scalar(1);
        for (int k = 0; k < in.k; ++k) r = jet_mul(r, a);
        r[0] = A::pow(a[0], in.k);
        s[i] = std::move(r);
        break;
      }
    }
  }
  std::vector<Jet<I>> out;
  for (int o : tape.output_slots()) out.push_back(s[static_cast<std::size_t>(o)]);
  return out;
}

}  // namespace fpbound
