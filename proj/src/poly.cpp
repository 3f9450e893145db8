#include "fpbound/poly.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace fpbound {

UPoly::UPoly(std::vector<Rational> c) : c_(std::move(c)) { trim(); }

UPoly UPoly::monomial(const Rational& a, int k) {
  std::vector<Rational> c(static_cast<std::size_t>(k) + 1, Rational(0));
  c[static_cast<std::size_t>(k)] = a;
  return UPoly(std::move(c));
}

void UPoly::trim() {
  while (!c_.empty() && sgn(c_.back()) == 0) c_.pop_back();
}

Rational UPoly::operator()(const Rational& t) const {
  Rational r(0);
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * t + *it;
  return r;
}

RationalInterval UPoly::operator()(const RationalInterval& t) const {
  RationalInterval r(Rational(0));
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * t + RationalInterval(*it);
  return r;
}

UPoly UPoly::derivative() const {
  std::vector<Rational> d;
  for (std::size_t i = 1; i < c_.size(); ++i) d.push_back(c_[i] * static_cast<long>(i));
  return UPoly(std::move(d));
}

UPoly operator+(const UPoly& a, const UPoly& b) {
  std::vector<Rational> c(std::max(a.c_.size(), b.c_.size()), Rational(0));
  for (std::size_t i = 0; i < a.c_.size(); ++i) c[i] += a.c_[i];
  for (std::size_t i = 0; i < b.c_.size(); ++i) c[i] += b.c_[i];
  return UPoly(std::move(c));
}

UPoly operator-(const UPoly& a, const UPoly& b) {
  std::vector<Rational> c(std::max(a.c_.size(), b.c_.size()), Rational(0));
  for (std::size_t i = 0; i < a.c_.size(); ++i) c[i] += a.c_[i];
  for (std::size_t i = 0; i < b.c_.size(); ++i) c[i] -= b.c_[i];
  return UPoly(std::move(c));
}

UPoly operator*(const UPoly& a, const UPoly& b) {
  if (a.is_zero() || b.is_zero()) return UPoly();
  std::vector<Rational> c(a.c_.size() + b.c_.size() - 1, Rational(0));
  for (std::size_t i = 0; i < a.c_.size(); ++i)
    for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
  return UPoly(std::move(c));
}

void UPoly::divmod(const UPoly& a, const UPoly& b, UPoly& q, UPoly& r) {
  if (b.is_zero()) throw std::domain_error("polynomial division by zero");
  std::vector<Rational> rem = a.c_;
  int db = b.degree();
  std::vector<Rational> quo(rem.size() >= b.c_.size() ? rem.size() - b.c_.size() + 1 : 0, Rational(0));
  for (int i = static_cast<int>(rem.size()) - 1; i >= db; --i) {
    Rational f = rem[static_cast<std::size_t>(i)] / b.lead();
    if (sgn(f) == 0) continue;
    quo[static_cast<std::size_t>(i - db)] = f;
    for (int j = 0; j <= db; ++j) rem[static_cast<std::size_t>(i - db + j)] -= f * b.c_[static_cast<std::size_t>(j)];
  }
  q = UPoly(std::move(quo));
  r = UPoly(std::move(rem));
}

UPoly UPoly::gcd(const UPoly& a, const UPoly& b) {
  UPoly x = a, y = b;
  while (!y.is_zero()) {
    UPoly q, r;
    divmod(x, y, q, r);
    x = y;
    y = r;
  }
  if (x.is_zero()) return x;
  Rational l = x.lead();
  for (auto& c : x.c_) c /= l;
  return x;
}

std::string UPoly::str(const std::string& var) const {
  if (c_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (int i = degree(); i >= 0; --i) {
    const Rational& c = c_[static_cast<std::size_t>(i)];
    if (sgn(c) == 0) continue;
    Rational a = abs(c);
    os << (first ? (sgn(c) < 0 ? "-" : "") : (sgn(c) < 0 ? " - " : " + "));
    if (i == 0 || a != 1) os << (a.get_den() == 1 ? a.get_str() : "(" + a.get_str() + ")");
    if (i > 0) os << (i == 0 || a != 1 ? "*" : "") << var << (i > 1 ? "^" + std::to_string(i) : "");
    first = false;
  }
  return os.str();
}

std::optional<UPoly> to_upoly(const Expr& e, const std::string& var) {
  int vi = var_index(var);
  std::unordered_map<const Node*, std::optional<UPoly>> memo;
  std::function<std::optional<UPoly>(const Node*)> go = [&](const Node* n) -> std::optional<UPoly> {
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    std::optional<UPoly> r;
    switch (n->op) {
      case Op::Const:
        r = UPoly({n->c});
        break;
      case Op::Var:
        if (n->var == vi) r = UPoly::monomial(Rational(1), 1);
        break;
      case Op::Sum: {
        UPoly acc;
        bool ok = true;
        for (const Node* k : n->kids) {
          auto p = go(k);
          if (!p) {
            ok = false;
            break;
          }
          acc = acc + *p;
        }
        if (ok) r = acc;
        break;
      }
      case Op::Prod: {
        UPoly acc({Rational(1)});
        bool ok = true;
        for (const Node* k : n->kids) {
          auto p = go(k);
          if (!p) {
            ok = false;
            break;
          }
          acc = acc * *p;
        }
        if (ok) r = acc;
        break;
      }
      case Op::Quot: {
        auto a = go(n->kids[0]);
        auto b = go(n->kids[1]);
        if (a && b && b->degree() == 0) r = *a * UPoly({Rational(1) / b->lead()});
        break;
      }
      case Op::Pow: {
        auto a = go(n->kids[0]);
        if (a) {
          UPoly acc({Rational(1)});
          for (int i = 0; i < n->k; ++i) acc = acc * *a;
          r = acc;
        }
        break;
      }
      case Op::Sqrt:
        break;
    }
    memo.emplace(n, r);
    return r;
  };
  return go(e.node());
}

namespace {

int sign_changes(const std::vector<UPoly>& seq, const Rational& t) {
  int changes = 0, last = 0;
  for (const UPoly& p : seq) {
    int s = sgn(p(t));
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

UPoly deflate(const UPoly& p, const Rational& r) {
  UPoly q, rem;
  UPoly::divmod(p, UPoly({-r, Rational(1)}), q, rem);
  return q;
}

}  // namespace

int sturm_root_count(const UPoly& p, const Rational& lo, const Rational& hi) {
  if (p.is_zero()) throw ZeroPolynomial();
  if (lo >= hi || p.degree() == 0) return 0;
  UPoly g = UPoly::gcd(p, p.derivative());
  UPoly q, rem;
  UPoly::divmod(p, g, q, rem);
  // Endpoints are rational, so an endpoint root is a rational root and the
  // linear factor can be divided out exactly.
  int count = 0;
  if (sgn(q(hi)) == 0) {
    ++count;
    q = deflate(q, hi);
  }
  if (sgn(q(lo)) == 0) q = deflate(q, lo);
  if (q.degree() <= 0) return count;
  std::vector<UPoly> seq{q, q.derivative()};
  while (seq.back().degree() > 0) {
    UPoly quo, r;
    UPoly::divmod(seq[seq.size() - 2], seq.back(), quo, r);
    if (r.is_zero()) break;
    seq.push_back(UPoly() - r);
  }
  return count + sign_changes(seq, lo) - sign_changes(seq, hi);
}

const char* to_string(Sign s) {
  switch (s) {
    case Sign::Positive:
      return "Positive";
    case Sign::Negative:
      return "Negative";
    default:
      return "Unknown";
  }
}

Sign sign_on_box(const Expr& e, const Box& box, const SignOptions& opt) {
  std::vector<std::string> vs = e.free_vars();
  for (const auto& v : vs)
    if (!box.count(v)) throw std::out_of_range("sign_on_box: no range for " + v);
  Tape tape({e}, vs);
  std::vector<Rational> scale;
  for (const auto& v : vs) {
    auto it = opt.scale.find(v);
    Rational s = it != opt.scale.end() ? it->second : box.at(v).width();
    scale.push_back(sgn(s) > 0 ? s : Rational(1));
  }
  using RBox = std::vector<RationalInterval>;
  std::deque<RBox> stack;
  RBox root;
  for (const auto& v : vs) root.push_back(box.at(v));
  stack.push_back(root);
  bool pos = false, neg = false;
  std::size_t boxes = 0;
  std::vector<Ival> x(vs.size()), slots, out;
  while (!stack.empty()) {
    if (++boxes > opt.max_boxes) return Sign::Unknown;
    RBox b = std::move(stack.front());
    stack.pop_front();
    int decided = 0;  // +1 positive, -1 negative, 2 straddles, 0 undecided
    bool defined = true;
    try {
      for (std::size_t i = 0; i < vs.size(); ++i) x[i] = Ival::of(b[i]);
      tape.eval_into(x, slots, out);
      if (out[0].lo > 0) decided = 1;
      else if (out[0].hi < 0) decided = -1;
    } catch (const std::runtime_error&) {
      defined = false;
    }
    if (decided == 0) {
      try {
        RationalInterval r = tape.eval(b, 64)[0];
        if (sgn(r.lo()) > 0) decided = 1;
        else if (sgn(r.hi()) < 0) decided = -1;
        else if (r.is_point()) decided = 2;  // exactly zero
        defined = true;
      } catch (const std::runtime_error&) {
        defined = false;
      }
    }
    if (decided == 2) return Sign::Unknown;
    if (decided == 1) pos = true;
    if (decided == -1) neg = true;
    if (pos && neg) return Sign::Unknown;
    if (decided != 0) continue;
    // a sample at the box center with the opposite sign settles Unknown
    try {
      for (std::size_t i = 0; i < vs.size(); ++i) x[i] = Ival::of(b[i].mid());
      tape.eval_into(x, slots, out);
      if (out[0].lo > 0) pos = true;
      if (out[0].hi < 0) neg = true;
      if (pos && neg) return Sign::Unknown;
    } catch (const std::runtime_error&) {
    }
    // split the widest variable relative to its scale
    std::size_t best = vs.size();
    Rational bw(0);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      Rational w = b[i].width() / scale[i];
      if (w > bw) {
        bw = w;
        best = i;
      }
    }
    if (best == vs.size()) return Sign::Unknown;
    (void)defined;
    Rational m = b[best].mid();
    RBox l = b, r = b;
    l[best] = RationalInterval(b[best].lo(), m);
    r[best] = RationalInterval(m, b[best].hi());
    stack.push_back(std::move(r));
    stack.push_back(std::move(l));
  }
  if (pos) return Sign::Positive;
  if (neg) return Sign::Negative;
  return Sign::Unknown;
}

double SeriesCoeff::approx() const {
  return exact ? value.get_d() : enclosure.mid().get_d();
}

namespace {

struct Series {
  std::vector<RationalInterval> c;  // known coefficients 0..c.size()-1
  std::size_t zeros() const {
    std::size_t v = 0;
    while (v < c.size() && c[v].is_point() && sgn(c[v].lo()) == 0) ++v;
    return v;
  }
};

Series s_add(const Series& a, const Series& b) {
  Series r;
  std::size_t n = std::min(a.c.size(), b.c.size());
  for (std::size_t i = 0; i < n; ++i) r.c.push_back(a.c[i] + b.c[i]);
  return r;
}

Series s_mul(const Series& a, const Series& b) {
  std::size_t va = a.zeros(), vb = b.zeros();
  std::size_t n = std::min(a.c.size() + vb, b.c.size() + va);
  Series r;
  r.c.assign(n, RationalInterval(Rational(0)));
  for (std::size_t i = va; i < a.c.size(); ++i)
    for (std::size_t j = vb; j < b.c.size() && i + j < n; ++j) r.c[i + j] = r.c[i + j] + a.c[i] * b.c[j];
  return r;
}

Series s_shift(const Series& a, std::size_t v) {
  Series r;
  r.c.assign(a.c.begin() + static_cast<long>(std::min(v, a.c.size())), a.c.end());
  return r;
}

Series s_div(const Series& a, const Series& b) {
  std::size_t vb = b.zeros();
  if (vb >= b.c.size()) throw NotSmoothAtZero("denominator vanishes identically at 0");
  if (a.zeros() < vb) throw NotSmoothAtZero("pole at 0");
  Series num = s_shift(a, vb), den = s_shift(b, vb);
  if (den.c[0].contains_zero()) throw NotSmoothAtZero("cannot separate denominator from 0");
  std::size_t n = std::min(num.c.size(), den.c.size());
  Series q;
  for (std::size_t k = 0; k < n; ++k) {
    RationalInterval acc = num.c[k];
    for (std::size_t j = 0; j < k; ++j) acc = acc - q.c[j] * den.c[k - j];
    q.c.push_back(acc / den.c[0]);
  }
  return q;
}

Series s_sqrt(const Series& a, int bits) {
  std::size_t v = a.zeros();
  if (v >= a.c.size()) throw NotSmoothAtZero("sqrt of a series vanishing to unknown order");
  if (v % 2 == 1) throw NotSmoothAtZero("sqrt of odd-order zero");
  Series s = s_shift(a, v);
  if (sgn(s.c[0].lo()) <= 0) throw NotSmoothAtZero("sqrt of nonpositive leading term");
  Series r;
  r.c.push_back(s.c[0].sqrt(bits));
  RationalInterval two_r0 = r.c[0] + r.c[0];
  for (std::size_t k = 1; k < s.c.size(); ++k) {
    RationalInterval acc = s.c[k];
    for (std::size_t j = 1; j < k; ++j) acc = acc - r.c[j] * r.c[k - j];
    r.c.push_back(acc / two_r0);
  }
  Series out;
  out.c.assign(v / 2, RationalInterval(Rational(0)));
  out.c.insert(out.c.end(), r.c.begin(), r.c.end());
  return out;
}

std::vector<RationalInterval> series_once(const Expr& e, int vi, std::size_t len, int bits) {
  std::unordered_map<const Node*, Series> memo;
  std::function<Series(const Node*)> go = [&](const Node* n) -> Series {
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    Series r;
    switch (n->op) {
      case Op::Const:
        r.c.assign(len, RationalInterval(Rational(0)));
        r.c[0] = RationalInterval(n->c);
        break;
      case Op::Var:
        if (n->var != vi) throw std::invalid_argument("series_at_zero: extra free variable " + var_name(n->var));
        r.c.assign(len, RationalInterval(Rational(0)));
        r.c[1] = RationalInterval(Rational(1));
        break;
      case Op::Sum:
        r = go(n->kids[0]);
        for (std::size_t i = 1; i < n->kids.size(); ++i) r = s_add(r, go(n->kids[i]));
        break;
      case Op::Prod:
        r = go(n->kids[0]);
        for (std::size_t i = 1; i < n->kids.size(); ++i) r = s_mul(r, go(n->kids[i]));
        break;
      case Op::Quot:
        r = s_div(go(n->kids[0]), go(n->kids[1]));
        break;
      case Op::Sqrt:
        r = s_sqrt(go(n->kids[0]), bits);
        break;
      case Op::Pow: {
        Series b = go(n->kids[0]);
        r = b;
        for (int i = 1; i < n->k; ++i) r = s_mul(r, b);
        break;
      }
    }
    memo.emplace(n, r);
    return r;
  };
  return go(e.node()).c;
}

}  // namespace

std::vector<SeriesCoeff> series_at_zero(const Expr& e, const std::string& var, int order) {
  int vi = var_index(var);
  std::size_t want = static_cast<std::size_t>(order) + 1;
  const Rational tol = pow2(-60);
  for (std::size_t pad = 8; pad <= 128; pad *= 2) {
    for (int bits = 128; bits <= 1024; bits *= 2) {
      std::vector<RationalInterval> c = series_once(e, vi, want + pad, bits);
      if (c.size() < want) break;  // need more padding
      bool ok = true;
      for (std::size_t i = 0; i < want; ++i)
        if (!c[i].is_point() && c[i].width() > tol) ok = false;
      if (!ok) continue;
      std::vector<SeriesCoeff> out;
      for (std::size_t i = 0; i < want; ++i) {
        SeriesCoeff sc;
        sc.exact = c[i].is_point();
        sc.value = c[i].mid();
        sc.enclosure = c[i];
        out.push_back(sc);
      }
      return out;
    }
  }
  throw NotSmoothAtZero("series coefficients could not be resolved");
}

}  // namespace fpbound
