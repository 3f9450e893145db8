#include "fpbound/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <queue>
#include <random>
#include <sstream>

#include "json.hpp"

#include "fpbound/jet.hpp"
#include "fpbound/poly.hpp"

namespace fpbound {

CounterexampleFound::CounterexampleFound(Box p, Rational v, Rational b)
    : std::runtime_error("objective " + to_decimal(v, 12) + " exceeds bound " + to_decimal(b, 12)),
      point(std::move(p)),
      value(std::move(v)),
      bound(std::move(b)) {}

std::vector<std::string> PinningAssignment::branched() const {
  std::vector<std::string> r;
  for (const auto& [v, s] : vars)
    if (s == Branched) r.push_back(v);
  return r;
}

Box PinningAssignment::apply(const Box& box) const {
  Box b = box;
  for (const auto& [v, s] : vars) {
    auto it = b.find(v);
    if (it == b.end() || s == Branched) continue;
    it->second = RationalInterval(s == PinnedLo ? it->second.lo() : it->second.hi());
  }
  return b;
}

namespace {

using BoxV = std::vector<RationalInterval>;

int sign_of(Direction d) { return d == Direction::Max ? 1 : -1; }

std::vector<Ival> to_ival(const BoxV& b) {
  std::vector<Ival> r;
  r.reserve(b.size());
  for (const auto& x : b) r.push_back(Ival::of(x));
  return r;
}

std::vector<Ival> centre_ival(const BoxV& b) {
  std::vector<Ival> r;
  for (const auto& x : b) r.push_back(Ival::of(x.mid()));
  return r;
}

// Probe points of a box: the centre and the two extreme corners.
std::vector<BoxV> probe_points(const BoxV& b) {
  BoxV c, lo, hi;
  for (const auto& x : b) {
    c.push_back(RationalInterval(x.mid()));
    lo.push_back(RationalInterval(x.lo()));
    hi.push_back(RationalInterval(x.hi()));
  }
  return {c, lo, hi};
}

std::optional<Rational> best_of(const std::vector<BoxV>& pts,
                                const std::function<std::optional<Rational>(const BoxV&)>& f) {
  std::optional<Rational> best;
  for (const auto& p : pts) {
    std::optional<Rational> v;
    try {
      v = f(p);
    } catch (const std::exception&) {
    }
    if (v && (!best || *v > *best)) best = v;
  }
  return best;
}

std::optional<Rational> best_of(const BoxV& b, const std::function<std::optional<Rational>(const BoxV&)>& f) {
  return best_of(probe_points(b), f);
}

double mig(const Ival& a) { return a.lo >= 0 ? a.lo : a.hi <= 0 ? -a.hi : 0.0; }
double mag(const Ival& a) { return std::max(-a.lo, a.hi); }

BoxV from_box(const std::vector<std::string>& vars, const Box& b) {
  BoxV r;
  for (const auto& v : vars) r.push_back(b.at(v));
  return r;
}

// ---------------------------------------------------------------------------
// Best-first branch and bound for a supremum.

struct Engine {
  // Sound upper bound of the sup over the box; nullopt when no bound is
  // available (evaluation undefined on the box).
  std::function<std::optional<Rational>(const BoxV&)> upper;
  // Sound lower bound of the sup over the box, from points inside it. The
  // current best lower bound is passed so that costly refinements can be
  // skipped when they cannot improve it.
  std::function<std::optional<Rational>(const BoxV&, const std::optional<Rational>&)> probe;
  // Dimension and point to split at, given the current lower bound; nullopt
  // when the box cannot be refined.
  std::function<std::optional<std::pair<std::size_t, Rational>>(const BoxV&, const std::optional<Rational>&)> split;
};

struct Outcome {
  std::optional<Rational> lo, hi;
  std::size_t boxes = 0;
  bool exhausted = false;
  bool below_floor = false;  // some boxes were dropped against the floor
  BoxV argmax;
};

// Boxes whose upper bound is below `floor` are dropped: the caller already
// holds a value at least that large.
Outcome run_engine(const Engine& e, const std::vector<BoxV>& roots, const Rational& tol, std::size_t budget,
                   const std::optional<Rational>& floor = std::nullopt) {
  struct Item {
    BoxV box;
    std::optional<Rational> ub;  // nullopt is +infinity
  };
  auto below = [](const Item& a, const Item& b) {
    if (!b.ub) return a.ub.has_value();
    if (!a.ub) return false;
    return *a.ub < *b.ub;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(below)> q(below);
  Outcome out;
  auto consider = [&](BoxV b) {
    ++out.boxes;
    std::optional<Rational> ub;
    try {
      ub = e.upper(b);
    } catch (const std::exception&) {
    }
    if (ub && out.lo && *ub < *out.lo) return;
    std::optional<Rational> lb;
    try {
      lb = e.probe(b, out.lo);
    } catch (const std::exception&) {
    }
    if (lb && (!out.lo || *lb > *out.lo)) {
      out.lo = lb;
      out.argmax = b;
    }
    if (ub && out.lo && *ub < *out.lo) return;
    if (ub && floor && *ub < *floor) {
      out.below_floor = true;
      return;
    }
    q.push({std::move(b), std::move(ub)});
  };
  for (const auto& r : roots) consider(r);
  while (!q.empty()) {
    const Item& top = q.top();
    if (top.ub && out.lo && *top.ub - *out.lo <= tol) break;
    if (out.boxes >= budget) {
      out.exhausted = true;
      break;
    }
    auto sp = e.split(top.box, out.lo);
    if (!sp) break;
    BoxV a = top.box, b = top.box;
    q.pop();
    a[sp->first] = RationalInterval(a[sp->first].lo(), sp->second);
    b[sp->first] = RationalInterval(sp->second, b[sp->first].hi());
    consider(std::move(a));
    consider(std::move(b));
  }
  if (q.empty())
    out.hi = out.lo;
  else
    out.hi = q.top().ub;
  if (out.below_floor && (!out.hi || *out.hi < *floor)) out.hi = *floor;
  if (out.hi && out.lo && *out.lo > *out.hi) out.hi = out.lo;
  return out;
}

RationalInterval enclosure_of(const Outcome& o) {
  if (!o.hi) throw BudgetExhausted(RationalInterval(o.lo.value_or(Rational(0))));
  Rational lo = o.lo ? *o.lo : *o.hi;
  if (lo > *o.hi) lo = *o.hi;
  return RationalInterval(lo, *o.hi);
}

// Split the dimension with the largest width relative to its initial width.
std::optional<std::pair<std::size_t, Rational>> split_widest(const BoxV& b, const BoxV& init) {
  std::optional<std::size_t> best;
  Rational bw(0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i].is_point() || init[i].is_point()) continue;
    Rational w = b[i].width() / init[i].width();
    if (!best || w > bw) {
      best = i;
      bw = w;
    }
  }
  if (!best || bw < pow2(-60)) return std::nullopt;
  return std::make_pair(*best, b[*best].mid());
}

// ---------------------------------------------------------------------------
// Scale reduction: an objective of degree 0 in the scale inputs takes every
// value of the box on the union of the faces where one scale input sits at
// its upper end (scale the point up until a coordinate hits its bound).

std::vector<Box> scale_faces(const std::vector<Expr>& fs, const Box& box, const std::vector<std::string>& scale,
                             std::vector<std::string>& trace) {
  std::vector<std::string> present;
  for (const auto& s : scale) {
    bool used = false;
    for (const auto& f : fs) used = used || f.depends_on(s);
    if (used && box.count(s)) present.push_back(s);
  }
  if (present.empty()) return {box};
  for (const auto& s : present)
    if (sgn(box.at(s).lo()) < 0 || sgn(box.at(s).hi()) <= 0) return {box};
  for (const auto& f : fs) {
    auto d = homogeneity_degree(f, present);
    if (!d || *d != 0) return {box};
  }
  std::vector<Box> faces;
  std::string names;
  for (const auto& s : present) {
    Box b = box;
    b[s] = RationalInterval(box.at(s).hi());
    faces.push_back(b);
    names += (names.empty() ? "" : ", ") + s;
  }
  trace.push_back("scale reduction to the upper faces of " + names);
  return faces;
}

std::map<std::string, Expr> raw_substitution(const AnalysisSystem& sys) {
  std::map<std::string, Expr> m;
  for (std::size_t i = 0; i < sys.eps.size(); ++i)
    m[sys.raw_vars[i]] = sys.eps_bound.at(sys.eps[i]) * Expr::var(sys.eps[i]);
  return m;
}

// ---------------------------------------------------------------------------
// Generic sup of an expression over a box: natural extension and the
// mean-value form with a symbolic gradient.

struct ExprProblem {
  std::vector<std::string> vars;
  Tape value;     // f
  Tape gradient;  // f, df/dv for every branched variable
  BoxV init;

  ExprProblem(const Expr& f, const Box& box) {
    for (const auto& [v, r] : box) {
      vars.push_back(v);
      init.push_back(r);
    }
    std::vector<Expr> g{f};
    for (const auto& v : vars) g.push_back(box.at(v).is_point() ? Expr::constant(0) : differentiate(f, v));
    value = Tape({f}, vars);
    gradient = Tape(g, vars);
  }

  Engine engine() const {
    Engine e;
    e.upper = [this](const BoxV& b) -> std::optional<Rational> {
      std::vector<Ival> x = to_ival(b);
      double hi = value.eval(x)[0].hi;
      try {
        std::vector<Ival> c = centre_ival(b);
        std::vector<Ival> gv = gradient.eval(x);
        Ival m = value.eval(c)[0];
        for (std::size_t i = 0; i < vars.size(); ++i) m = m + gv[1 + i] * (x[i] - c[i]);
        hi = std::min(hi, m.hi);
      } catch (const std::exception&) {
      }
      if (!std::isfinite(hi)) return std::nullopt;
      return Rational(hi);
    };
    e.probe = [this](const BoxV& b, const std::optional<Rational>&) {
      return best_of(b, [this](const BoxV& p) -> std::optional<Rational> {
        double lo = value.eval(to_ival(p))[0].lo;
        if (!std::isfinite(lo)) return std::nullopt;
        return Rational(lo);
      });
    };
    e.split = [this](const BoxV& b, const std::optional<Rational>&) { return split_widest(b, init); };
    return e;
  }
};

// ---------------------------------------------------------------------------
// Linear coefficient: F(x) = sum_i |g_i(x)| over the inputs. On boxes where
// every g_i has a known sign, F is the single expression sum s_i g_i, brought
// over a common denominator so that exact cancellations survive.

struct LinearProblem {
  std::vector<std::string> vars;
  std::vector<Expr> g;
  Tape gt;
  BoxV init;
  Box domain;
  mutable std::map<std::vector<int>, std::shared_ptr<Tape>> patterns;

  std::shared_ptr<Tape> pattern(const std::vector<int>& s) const {
    auto it = patterns.find(s);
    if (it != patterns.end()) return it->second;
    std::vector<Expr> terms;
    for (std::size_t i = 0; i < g.size(); ++i) terms.push_back(s[i] > 0 ? g[i] : -g[i]);
    Expr f = simplify(together(Expr::sum(terms)), domain);
    std::vector<Expr> outs{f};
    for (const auto& v : vars) outs.push_back(differentiate(f, v));
    auto t = std::make_shared<Tape>(outs, vars);
    patterns[s] = t;
    return t;
  }

  Engine engine() const {
    Engine e;
    e.upper = [this](const BoxV& b) -> std::optional<Rational> {
      std::vector<Ival> x = to_ival(b);
      std::vector<Ival> gv = gt.eval(x);
      Ival natural(0.0);
      std::vector<int> s(g.size());
      bool signed_all = true;
      for (std::size_t i = 0; i < g.size(); ++i) {
        natural = natural + Ival(mag(gv[i]));
        s[i] = gv[i].lo >= 0 ? 1 : gv[i].hi <= 0 ? -1 : 0;
        signed_all = signed_all && s[i] != 0;
      }
      double hi = natural.hi;
      if (signed_all) {
        try {
          auto t = pattern(s);
          std::vector<Ival> fv = t->eval(x);
          hi = std::min(hi, fv[0].hi);
          std::vector<Ival> c = centre_ival(b);
          Ival m = t->eval(c)[0];
          for (std::size_t i = 0; i < vars.size(); ++i) m = m + fv[1 + i] * (x[i] - c[i]);
          hi = std::min(hi, m.hi);
        } catch (const std::exception&) {
        }
      }
      if (!std::isfinite(hi)) return std::nullopt;
      return Rational(hi);
    };
    e.probe = [this](const BoxV& b, const std::optional<Rational>&) {
      return best_of(b, [this](const BoxV& p) -> std::optional<Rational> {
        std::vector<Ival> gv = gt.eval(to_ival(p));
        Ival sum(0.0);
        for (const auto& v : gv) sum = sum + Ival(mig(v));
        if (!std::isfinite(sum.lo)) return std::nullopt;
        return Rational(sum.lo);
      });
    };
    e.split = [this](const BoxV& b, const std::optional<Rational>&) { return split_widest(b, init); };
    return e;
  }
};

// ---------------------------------------------------------------------------
// Quadratic coefficient: G(u, x) = (d*R(u, x) - alpha*u)/u^2 with R(0, x) = 0.
// Around u = 0, R = u R1 + u^2 R2 + u^3 R3(xi) with xi in [0, u]; since
// alpha >= sup |R1| was established by the linear stage,
//   G <= min(0, sup(d R1) - alpha)/b + sup(d R2) + max(a, b)*sup(d R3)
// on u in [a, b]. Away from 0 a second-order Taylor form centred in [a, b]
// is used as well.

template <class I>
I from_rational(const Rational& q);
template <>
Ival from_rational<Ival>(const Rational& q) {
  return Ival::of(q);
}
template <>
RationalInterval from_rational<RationalInterval>(const Rational& q) {
  return RationalInterval(q);
}
template <class I>
I from_interval(const RationalInterval& q);
template <>
Ival from_interval<Ival>(const RationalInterval& q) {
  return Ival::of(q);
}
template <>
RationalInterval from_interval<RationalInterval>(const RationalInterval& q) {
  return q;
}
Rational hi_of(const Ival& a) { return Rational(a.hi); }
Rational hi_of(const RationalInterval& a) { return a.hi(); }
Rational lo_of(const Ival& a) { return Rational(a.lo); }
Rational lo_of(const RationalInterval& a) { return a.lo(); }
bool finite(const Ival& a) { return std::isfinite(a.lo) && std::isfinite(a.hi); }
bool finite(const RationalInterval&) { return true; }

constexpr int kSqrtBits = 200;

constexpr std::size_t kTrialSplits = 2;

struct QuadProblem {
  int d = 1;
  Rational alpha;
  Rational u_max;
  Tape tape;                       // R and dR/dx for every x after u
  Tape tape0;                      // R alone
  std::vector<std::string> vars;   // u first
  BoxV init;
  bool exact = false;              // rational arithmetic instead of doubles

  // Tape inputs: u as a jet at u0, the other variables constant.
  template <class I>
  std::vector<Jet<I>> jets_at(const I& u0, const std::vector<I>& xs, int order) const {
    std::vector<Jet<I>> x;
    Jet<I> uj(static_cast<std::size_t>(order + 1), JetArith<I>::zero());
    uj[0] = u0;
    if (order >= 1) uj[1] = JetArith<I>::scalar(1);
    x.push_back(uj);
    for (const I& v : xs) {
      Jet<I> c(static_cast<std::size_t>(order + 1), JetArith<I>::zero());
      c[0] = v;
      x.push_back(c);
    }
    return x;
  }

  template <class I>
  std::vector<Jet<I>> jets(const I& u0, const std::vector<I>& xs, int order, bool grad = true) const {
    return eval_jets<I>(grad ? tape : tape0, jets_at<I>(u0, xs, order), kSqrtBits);
  }

  // Upper end of d*(coefficient k), from the natural extension over the box
  // and from the centred form in the non-u variables.
  template <class I>
  Rational coef_hi(const std::vector<Jet<I>>& at_box, const std::vector<Jet<I>>& at_c, std::size_t k,
                   const std::vector<I>& dx) const {
    I ds = JetArith<I>::scalar(d);
    I nat = ds * at_box[0][k];
    I cf = ds * at_c[0][k];
    for (std::size_t j = 0; j < dx.size(); ++j) cf = cf + ds * at_box[1 + j][k] * dx[j];
    if (!finite(nat) && !finite(cf)) throw std::domain_error("unbounded coefficient");
    if (!finite(cf)) return hi_of(nat);
    if (!finite(nat)) return hi_of(cf);
    return std::min(hi_of(nat), hi_of(cf));
  }

  template <class I>
  std::optional<Rational> upper_t(const BoxV& b) const {
    const Rational& a = b[0].lo();
    const Rational& bb = b[0].hi();
    I ds = JetArith<I>::scalar(d);
    I al = from_rational<I>(alpha);
    std::vector<I> X, C, dx;
    for (std::size_t i = 1; i < b.size(); ++i) {
      X.push_back(from_interval<I>(b[i]));
      C.push_back(from_rational<I>(b[i].mid()));
      dx.push_back(X.back() - C.back());
    }
    std::optional<Rational> best;
    try {
      I zero = JetArith<I>::zero();
      I u0b = from_interval<I>(RationalInterval(Rational(0), bb));
      auto jA = jets<I>(zero, X, 2), jB = jets<I>(zero, C, 2, false);
      auto jC = jets<I>(u0b, X, 3), jD = jets<I>(u0b, C, 3, false);
      Rational r1 = coef_hi(jA, jB, 1, dx) - alpha;
      Rational r2 = coef_hi(jA, jB, 2, dx);
      Rational r3 = coef_hi(jC, jD, 3, dx);
      Rational t1 = sgn(r1) >= 0 || sgn(bb) == 0 ? Rational(0) : Rational(r1 / bb);
      Rational t3 = sgn(r3) > 0 ? Rational(bb * r3) : Rational(a * r3);
      best = t1 + r2 + t3;
    } catch (const std::exception&) {
    }
    if (sgn(a) > 0) {
      // G(u, x) - G(c, C) = [G(u, x) - G(u, C)] + [G(u, C) - G(c, C)]: mean
      // value in x, second-order Taylor in u.
      try {
        Rational c = b[0].mid();
        Rational h = b[0].width() / 2;
        I U = from_interval<I>(b[0]);
        auto g_of = [&](const Jet<I>& r, const I& u0) {
          Jet<I> uj(r.size(), JetArith<I>::zero());
          uj[0] = u0;
          if (r.size() > 1) uj[1] = JetArith<I>::scalar(1);
          Jet<I> n = r;
          for (std::size_t k = 0; k < r.size(); ++k) n[k] = ds * r[k] - al * uj[k];
          return jet_div(n, jet_mul(uj, uj));
        };
        I cu = from_rational<I>(c);
        Jet<I> gc = g_of(jets<I>(cu, C, 1, false)[0], cu);
        Jet<I> g2 = g_of(jets<I>(U, C, 2, false)[0], U);
        I t = gc[0] + gc[1] * from_interval<I>(RationalInterval(-h, h)) +
              g2[2] * from_interval<I>(RationalInterval(Rational(0), h * h));
        if (!dx.empty()) {
          auto jx = jets<I>(U, X, 0);
          I u2 = U * U;
          for (std::size_t j = 0; j < dx.size(); ++j) t = t + (ds * jx[1 + j][0] / u2) * dx[j];
        }
        if (finite(t)) {
          Rational v = hi_of(t);
          if (!best || v < *best) best = v;
        }
      } catch (const std::exception&) {
      }
    }
    return best;
  }

  // Lower bound of G at a point (u taken from the right end of the box, where
  // G is defined).
  template <class I>
  std::optional<Rational> probe_t(const BoxV& b, const BoxV& p, bool lower) const {
    const Rational& u = b[0].hi();
    if (sgn(u) == 0) return std::nullopt;
    std::vector<I> x;
    x.push_back(from_rational<I>(u));
    for (std::size_t i = 1; i < b.size(); ++i) x.push_back(from_rational<I>(p[i].lo()));
    I uu = from_rational<I>(u);
    I ds = JetArith<I>::scalar(d);
    I g;
    if (u <= u_max * pow2(-8)) {
      // Taylor enclosure about u = 0 avoids the cancellation in R - alpha*u
      std::vector<Jet<I>> j0, j3;
      for (std::size_t i = 0; i < x.size(); ++i) {
        Jet<I> a(3, JetArith<I>::zero()), c(4, JetArith<I>::zero());
        if (i == 0) {
          a[1] = JetArith<I>::scalar(1);
          c[0] = from_interval<I>(RationalInterval(Rational(0), u));
          c[1] = JetArith<I>::scalar(1);
        } else {
          a[0] = x[i];
          c[0] = x[i];
        }
        j0.push_back(a);
        j3.push_back(c);
      }
      Jet<I> r0 = eval_jets<I>(tape0, j0, kSqrtBits)[0];
      Jet<I> r3 = eval_jets<I>(tape0, j3, kSqrtBits)[0];
      g = (ds * r0[1] - from_rational<I>(alpha)) / uu + ds * r0[2] + uu * (ds * r3[3]);
    } else {
      std::vector<Jet<I>> jx;
      for (auto& v : x) jx.push_back(Jet<I>(1, v));
      I r = eval_jets<I>(tape0, jx, kSqrtBits)[0][0];
      g = (ds * r - from_rational<I>(alpha) * uu) / (uu * uu);
    }
    if (!finite(g)) return std::nullopt;
    return lower ? lo_of(g) : hi_of(g);
  }

  // Split trials evaluate the children the engine asks for next.
  mutable std::deque<std::pair<BoxV, std::optional<Rational>>> memo;

  std::optional<Rational> upper(const BoxV& b) const {
    for (const auto& [k, v] : memo)
      if (k == b) return v;
    std::optional<Rational> v = exact ? upper_t<RationalInterval>(b) : upper_t<Ival>(b);
    memo.emplace_back(b, v);
    if (memo.size() > 24) memo.pop_front();
    return v;
  }

  std::optional<std::pair<std::size_t, Rational>> split(const BoxV& b, const std::optional<Rational>& lo) const {
    const Rational& a = b[0].lo();
    const Rational& bb = b[0].hi();
    std::vector<std::pair<std::size_t, Rational>> cand;
    if (sgn(a) == 0) {
      if (bb > u_max * pow2(-48)) cand.emplace_back(0, Rational(bb / 16));
    } else if (Rational(bb - a).get_d() / bb.get_d() >= std::ldexp(1.0, -50)) {
      Rational ratio = bb / a;
      cand.emplace_back(0, ratio >= 4 ? Rational(a * pow2(floor_log2(ratio) / 2)) : b[0].mid());
    }
    std::vector<std::pair<double, std::size_t>> xs;
    for (std::size_t i = 1; i < b.size(); ++i) {
      if (b[i].is_point() || init[i].is_point()) continue;
      double w = Rational(b[i].width() / init[i].width()).get_d();
      if (w >= std::ldexp(1.0, -50)) xs.emplace_back(w, i);
    }
    // trial splits only for the relatively widest few
    std::sort(xs.begin(), xs.end(), std::greater<>());
    if (xs.size() > kTrialSplits) xs.resize(kTrialSplits);
    for (const auto& [w, i] : xs) cand.emplace_back(i, b[i].mid());
    if (cand.size() <= 1) return cand.empty() ? std::nullopt : std::make_optional(cand[0]);
    // Pick the split whose worse half has the smallest upper bound; ties go
    // to the relatively widest dimension.
    std::optional<std::size_t> best;
    std::optional<Rational> best_ub;
    double best_w = -1;
    for (std::size_t k = 0; k < cand.size(); ++k) {
      auto [dim, at] = cand[k];
      BoxV l = b, r = b;
      l[dim] = RationalInterval(l[dim].lo(), at);
      r[dim] = RationalInterval(at, r[dim].hi());
      std::optional<Rational> ul, ur, ub;
      try {
        ul = upper(l);
        ur = upper(r);
      } catch (const std::exception&) {
      }
      if (ul && ur) ub = std::max(*ul, *ur);
      double w = dim == 0 ? (sgn(a) == 0 ? 1.0 : Rational((bb - a) / bb).get_d())
                          : Rational(b[dim].width() / init[dim].width()).get_d();
      bool better;
      if (!best)
        better = true;
      else if (ub && best_ub && *ub != *best_ub)
        better = *ub < *best_ub;
      else if (ub.has_value() != best_ub.has_value())
        better = ub.has_value();
      else
        better = w > best_w;
      if (better) {
        best = k;
        best_ub = ub;
        best_w = w;
      }
    }
    std::optional<Rational> parent;
    try {
      parent = upper(b);
    } catch (const std::exception&) {
    }
    if (best_ub && (!parent || (lo && *parent > *lo ? *parent - *best_ub > (*parent - *lo) / 64 : *best_ub < *parent)))
      return cand[*best];
    // nothing helps enough: fall back to relative widths, with [0, b] needing x
    // refined about as finely as sqrt(b)
    std::size_t pick = 0;
    double pw = -1;
    for (std::size_t k = 0; k < cand.size(); ++k) {
      std::size_t dim = cand[k].first;
      double w = dim == 0 ? (sgn(a) == 0 ? std::sqrt(Rational(bb / u_max).get_d()) : Rational((bb - a) / bb).get_d())
                          : Rational(b[dim].width() / init[dim].width()).get_d();
      if (w > pw) {
        pw = w;
        pick = k;
      }
    }
    return cand[pick];
  }

  Engine engine() const {
    Engine e;
    e.upper = [this](const BoxV& b) { return upper(b); };
    e.probe = [this](const BoxV& b, const std::optional<Rational>& current) {
      std::vector<BoxV> pts = probe_points(b);
      if (b.size() > 1 && sgn(b[0].hi()) > 0) {
        // the corner the gradient in x points to at the centre
        try {
          std::vector<Ival> c;
          for (std::size_t i = 1; i < b.size(); ++i) c.push_back(Ival::of(b[i].mid()));
          auto j = jets<Ival>(Ival::of(b[0].hi()), c, 0);
          BoxV corner = pts[0];
          for (std::size_t i = 1; i < b.size(); ++i) {
            Ival g = j[i][0];
            double m = d * (g.lo + g.hi);
            corner[i] = RationalInterval(m >= 0 ? b[i].hi() : b[i].lo());
          }
          pts.push_back(corner);
        } catch (const std::exception&) {
        }
      }
      return best_of(pts, [this, &b, &current](const BoxV& p) -> std::optional<Rational> {
        if (exact) return probe_t<RationalInterval>(b, p, true);
        // doubles lose G to cancellation at small u; redo exactly when the
        // point might beat the current lower bound
        std::optional<Rational> hi = probe_t<Ival>(b, p, false);
        if (current && hi && *hi <= *current) return std::nullopt;
        std::optional<Rational> lo = probe_t<Ival>(b, p, true);
        if (lo && hi && *hi - *lo < pow2(-36)) return lo;
        return probe_t<RationalInterval>(b, p, true);
      });
    };
    e.split = [this](const BoxV& b, const std::optional<Rational>& lo) { return split(b, lo); };
    return e;
  }
};

struct PinnedObjective {
  Direction direction;
  PinningAssignment pins;
  Expr r;  // objective with the pinned error variables substituted
  std::vector<std::string> free;  // remaining variables other than u
};

PinnedObjective pinned_objective(const AnalysisSystem& sys, Direction d) {
  PinnedObjective p;
  p.direction = d;
  p.pins = pin_by_monotonicity(sys, d);
  std::map<std::string, Expr> sub;
  for (const auto& e : sys.eps) {
    auto s = p.pins.vars.at(e);
    if (s == PinningAssignment::PinnedHi) sub[e] = Expr::constant(1);
    if (s == PinningAssignment::PinnedLo) sub[e] = Expr::constant(-1);
  }
  p.r = simplify(substitute(sys.objective, sub), sys.full_box());
  for (const auto& v : p.r.free_vars())
    if (v != kUnitVar) p.free.push_back(v);
  return p;
}

constexpr std::size_t kPinBoxes = 1500;

bool nonnegative_on_faces(const Expr& p, const Box& box, const std::vector<std::string>& scale) {
  std::vector<std::string> ignored;
  for (const Box& f : scale_faces({p}, box, scale, ignored))
    if (!proven_nonnegative(p, f, kPinBoxes)) return false;
  return true;
}

std::string dir_name(Direction d) { return d == Direction::Max ? "max" : "min"; }

}  // namespace

// ---------------------------------------------------------------------------

namespace {

std::map<std::string, Expr> eps_partials(const AnalysisSystem& sys) {
  auto rs = raw_substitution(sys);
  std::map<std::string, Expr> partial;
  for (std::size_t i = 0; i < sys.eps.size(); ++i) {
    Expr p = differentiate(sys.objective_raw, sys.raw_vars[i]);
    partial[sys.eps[i]] = simplify(substitute(p, rs), sys.full_box());
  }
  return partial;
}

// Pins error variables over `box` (narrowed in place to the pinned ends).
PinningAssignment pin_within(const AnalysisSystem& sys, Direction d, Box& box,
                             const std::map<std::string, Expr>& partial) {
  PinningAssignment pa;
  pa.direction = d;
  int s = sign_of(d);
  for (const auto& e : sys.eps) {
    const RationalInterval& r = box.at(e);
    pa.vars[e] = r.is_point() ? (sgn(r.lo()) > 0 ? PinningAssignment::PinnedHi : PinningAssignment::PinnedLo)
                              : PinningAssignment::Branched;
  }
  for (const auto& [v, r] : sys.inputs)
    pa.vars[v] = sys.objective.depends_on(v) ? PinningAssignment::Branched : PinningAssignment::PinnedLo;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& e : sys.eps) {
      if (pa.vars[e] != PinningAssignment::Branched) continue;
      Expr p = s * partial.at(e);
      std::string why;
      bool hi;
      if (p.is_const() && sgn(p.value()) == 0) {
        hi = false;
        why = "objective independent";
      } else if (nonnegative_on_faces(p, box, sys.scale_inputs)) {
        hi = true;
        why = "derivative >= 0";
      } else if (nonnegative_on_faces(-p, box, sys.scale_inputs)) {
        hi = false;
        why = "derivative <= 0";
      } else {
        continue;
      }
      const RationalInterval& r = box.at(e);
      pa.vars[e] = hi ? PinningAssignment::PinnedHi : PinningAssignment::PinnedLo;
      box[e] = RationalInterval(hi ? r.hi() : r.lo());
      pa.trace.push_back(dir_name(d) + ": " + e + " -> " + to_string(box[e].lo()) + " (" + why + ")");
      changed = true;
    }
  }
  return pa;
}

}  // namespace

PinningAssignment pin_by_monotonicity(const AnalysisSystem& sys, Direction d) {
  Box box = sys.full_box();
  return pin_within(sys, d, box, eps_partials(sys));
}

RationalInterval branch_and_bound_max(const AnalysisSystem& sys, const PinningAssignment& pins,
                                      const RationalInterval& u_range, const Rational& tol, std::size_t budget) {
  Box box = sys.full_box();
  box[kUnitVar] = u_range;
  box = pins.apply(box);
  Expr f = sign_of(pins.direction) * sys.objective;
  Box used;
  for (const auto& v : f.free_vars()) used[v] = box.at(v);
  if (used.empty()) {
    RationalInterval c = interval_eval(f, {}, kSqrtBits);
    return c;
  }
  std::map<std::string, Expr> sub;
  for (const auto& [v, r] : used)
    if (r.is_point()) sub[v] = Expr::constant(r.lo());
  f = substitute(f, sub);
  Box rest;
  for (const auto& [v, r] : used)
    if (!r.is_point()) rest[v] = r;
  if (rest.empty()) return interval_eval(f, {}, kSqrtBits);
  std::vector<std::string> trace;
  std::vector<Box> faces = scale_faces({f}, rest, sys.scale_inputs, trace);
  ExprProblem prob(f, rest);
  std::vector<BoxV> roots;
  for (const auto& fb : faces) roots.push_back(from_box(prob.vars, fb));
  Outcome o = run_engine(prob.engine(), roots, tol, budget);
  RationalInterval enc = enclosure_of(o);
  if (o.exhausted) throw BudgetExhausted(enc);
  return enc;
}

RationalInterval sup_abs_objective(const AnalysisSystem& sys, const RationalInterval& u_range, const Rational& tol,
                                   std::size_t budget) {
  RationalInterval a = branch_and_bound_max(sys, pin_by_monotonicity(sys, Direction::Max), u_range, tol, budget);
  RationalInterval b = branch_and_bound_max(sys, pin_by_monotonicity(sys, Direction::Min), u_range, tol, budget);
  return RationalInterval(std::max(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

LinearResult linear_bound(const AnalysisSystem& sys, const OptimizerOptions& opt) {
  LinearResult res;
  Box zero_e;
  std::map<std::string, Expr> at_zero;
  for (const auto& r : sys.raw_vars) at_zero[r] = Expr::constant(0);
  at_zero[kUnitVar] = Expr::constant(0);
  std::vector<Expr> g;
  for (std::size_t i = 0; i < sys.eps.size(); ++i) {
    const RationalInterval& slope = sys.eps_slope.at(sys.eps[i]);
    if (slope.is_point() && sgn(slope.lo()) == 0) continue;
    if (!slope.is_point()) res.trace.push_back("slope of " + sys.eps[i] + " is not rational; using its upper end");
    Expr p = substitute(differentiate(sys.objective_raw, sys.raw_vars[i]), at_zero);
    Expr gi = simplify(Expr::constant(slope.hi()) * p, sys.inputs);
    // cancellations interval evaluation cannot see
    try {
      Expr t = simplify(together(gi), sys.inputs);
      if (t.is_const() || dag_size(t) < dag_size(gi)) gi = t;
    } catch (const std::exception&) {
    }
    if (gi.is_const() && sgn(gi.value()) == 0) continue;
    g.push_back(gi);
  }
  if (g.empty()) {
    res.alpha = RationalInterval(Rational(0));
    return res;
  }
  LinearProblem prob;
  prob.g = g;
  prob.domain = sys.inputs;
  Box box;
  for (const auto& gi : g)
    for (const auto& v : gi.free_vars()) box[v] = sys.inputs.at(v);
  if (box.empty()) {
    RationalInterval s(Rational(0));
    for (const auto& gi : g) {
      RationalInterval v = interval_eval(gi, {}, kSqrtBits);
      s = s + (sgn(v.lo()) >= 0 ? v : -v);
    }
    res.alpha = s;
    return res;
  }
  for (const auto& [v, r] : box) {
    prob.vars.push_back(v);
    prob.init.push_back(r);
  }
  prob.gt = Tape(g, prob.vars);
  std::vector<Box> faces = scale_faces(g, box, sys.scale_inputs, res.trace);
  std::vector<BoxV> roots;
  for (const auto& f : faces) roots.push_back(from_box(prob.vars, f));
  Outcome o = run_engine(prob.engine(), roots, opt.alpha_tol, opt.budget);
  res.boxes = o.boxes;
  res.exhausted = o.exhausted;
  res.alpha = enclosure_of(o);
  std::ostringstream t;
  t << "linear: " << o.boxes << " boxes, alpha in [" << to_decimal(res.alpha.lo(), 15) << ", "
    << to_decimal(res.alpha.hi(), 15) << "]";
  if (!o.argmax.empty()) {
    t << " near";
    for (std::size_t i = 0; i < prob.vars.size(); ++i) t << " " << prob.vars[i] << "=" << o.argmax[i].mid().get_d();
  }
  res.trace.push_back(t.str());
  return res;
}

std::optional<Rational> pinned_alpha(const AnalysisSystem& sys) {
  std::optional<Rational> best;
  for (Direction d : {Direction::Max, Direction::Min}) {
    PinnedObjective p = pinned_objective(sys, d);
    if (!p.free.empty()) return std::nullopt;
    auto c = series_at_zero(sign_of(d) * p.r, kUnitVar, 1);
    if (!c[1].exact) return std::nullopt;
    if (!best || c[1].value > *best) best = c[1].value;
  }
  return best;
}

namespace {

struct CaseLeaf {
  Box box;  // pinned error variables are points
  Expr r;   // objective on the leaf
  std::vector<std::string> free;
};

constexpr int kCaseTries = 3;

void case_leaves(const AnalysisSystem& sys, Direction d, const Box& box, const PinningAssignment& pa,
                 const std::map<std::string, Expr>& partial, int depth, std::vector<CaseLeaf>& out,
                 std::vector<std::string>& trace) {
  auto pinned_count = [&](const PinningAssignment& a) {
    std::size_t n = 0;
    for (const auto& e : sys.eps) n += a.vars.at(e) != PinningAssignment::Branched;
    return n;
  };
  std::size_t here = pinned_count(pa);
  int tries = 0;
  for (const auto& e : sys.eps) {
    if (depth <= 0 || tries >= kCaseTries) break;
    const RationalInterval& r = box.at(e);
    if (pa.vars.at(e) != PinningAssignment::Branched || !(sgn(r.lo()) < 0 && sgn(r.hi()) > 0)) continue;
    ++tries;
    Box lo = box, hi = box;
    lo[e] = RationalInterval(r.lo(), Rational(0));
    hi[e] = RationalInterval(Rational(0), r.hi());
    PinningAssignment plo = pin_within(sys, d, lo, partial);
    if (pinned_count(plo) <= here) continue;
    PinningAssignment phi = pin_within(sys, d, hi, partial);
    if (pinned_count(phi) <= here) continue;
    trace.push_back(dir_name(d) + ": case split on the sign of " + e);
    for (const auto& t : plo.trace) trace.push_back(t);
    case_leaves(sys, d, lo, plo, partial, depth - 1, out, trace);
    for (const auto& t : phi.trace) trace.push_back(t);
    case_leaves(sys, d, hi, phi, partial, depth - 1, out, trace);
    return;
  }
  CaseLeaf leaf;
  std::map<std::string, Expr> sub;
  for (const auto& e : sys.eps)
    if (box.at(e).is_point()) sub[e] = Expr::constant(box.at(e).lo());
  leaf.r = simplify(substitute(sys.objective, sub), box);
  for (const auto& v : leaf.r.free_vars())
    if (v != kUnitVar) leaf.free.push_back(v);
  leaf.box = box;
  out.push_back(std::move(leaf));
}

// Pins what it can; while error variables stay branched, splits one of them
// at 0 when that lets both halves pin more.
void case_split(const AnalysisSystem& sys, Direction d, Box box, const std::map<std::string, Expr>& partial,
                int depth, std::vector<CaseLeaf>& out, std::vector<std::string>& trace) {
  PinningAssignment pa = pin_within(sys, d, box, partial);
  for (const auto& t : pa.trace) trace.push_back(t);
  case_leaves(sys, d, box, pa, partial, depth, out, trace);
}

}  // namespace

QuadraticResult quadratic_bound(const AnalysisSystem& sys, const Rational& alpha_hi, const OptimizerOptions& opt) {
  QuadraticResult res;
  std::optional<Rational> lo, hi;
  res.tight = true;
  auto partial = eps_partials(sys);
  for (Direction d : {Direction::Max, Direction::Min}) {
    std::vector<CaseLeaf> leaves;
    case_split(sys, d, sys.full_box(), partial, 2, leaves, res.trace);
    for (const CaseLeaf& p : leaves) {
      QuadProblem q;
      q.d = sign_of(d);
      q.alpha = alpha_hi;
      q.u_max = sys.u_max;
      q.vars.push_back(kUnitVar);
      Box box;
      for (const auto& v : p.free) box[v] = p.box.at(v);
      std::vector<Box> faces = scale_faces({p.r}, box, sys.scale_inputs, res.trace);
      for (const auto& [v, r] : box) q.vars.push_back(v);
      std::vector<Expr> outs{p.r};
      for (std::size_t i = 1; i < q.vars.size(); ++i) outs.push_back(differentiate(p.r, q.vars[i]));
      q.tape = Tape(outs, q.vars);
      q.tape0 = Tape({p.r}, q.vars);
      q.init.push_back(RationalInterval(Rational(0), sys.u_max));
      for (const auto& [v, r] : box) q.init.push_back(r);
      q.exact = p.free.empty();
      Rational tol = opt.beta_tol;
      if (q.exact) {
        // univariate: refine far enough to resolve beta at tiny u_max
        Rational fine = sys.u_max * pow2(-60);
        if (fine < tol) tol = fine;
      } else {
        res.tight = false;
      }
      std::vector<BoxV> roots;
      for (const auto& f : faces) {
        BoxV r{RationalInterval(Rational(0), sys.u_max)};
        for (const auto& [v, rr] : f) r.push_back(rr);
        roots.push_back(r);
      }
      Outcome o = run_engine(q.engine(), roots, tol, opt.budget, lo);
      res.boxes += o.boxes;
      res.exhausted = res.exhausted || o.exhausted;
      RationalInterval enc = enclosure_of(o);
      std::ostringstream t;
      t << "quadratic " << dir_name(d) << ": " << o.boxes << " boxes, " << (q.exact ? "univariate" : "branched")
        << ", sup in [" << to_decimal(enc.lo(), 12) << ", " << to_decimal(enc.hi(), 12) << "]";
      if (!o.argmax.empty()) t << " at u~" << o.argmax[0].hi().get_d();
      res.trace.push_back(t.str());
      lo = lo ? std::max(*lo, enc.lo()) : enc.lo();
      hi = hi ? std::max(*hi, enc.hi()) : enc.hi();
    }
  }
  res.beta = RationalInterval(*lo, *hi);
  return res;
}

BoundResult compute_bound(const AnalysisSystem& sys, const OptimizerOptions& opt) {
  BoundResult r;
  r.u_max = sys.u_max;
  LinearResult lin = linear_bound(sys, opt);
  r.trace = lin.trace;
  r.alpha = lin.alpha;
  r.exhausted = lin.exhausted;
  if (auto a = pinned_alpha(sys)) {
    if (!lin.alpha.contains(*a) && abs(*a - lin.alpha.mid()) > lin.alpha.width() + pow2(-30))
      r.trace.push_back("warning: pinned slope " + to_string(*a) + " outside the linear enclosure");
    r.alpha = RationalInterval(*a);
    r.trace.push_back("alpha = " + to_string(*a) + " from the fully pinned objective");
  }
  if (opt.linear_only) return r;
  QuadraticResult q = quadratic_bound(sys, r.alpha.hi(), opt);
  for (const auto& t : q.trace) r.trace.push_back(t);
  r.beta = q.beta;
  r.tight = q.tight;
  r.exhausted = r.exhausted || q.exhausted;
  return r;
}

std::string BoundResult::json() const {
  nlohmann::ordered_json j;
  auto iv = [](const RationalInterval& x) {
    return nlohmann::ordered_json::array({to_double_down(x.lo()), to_double_up(x.hi())});
  };
  auto ex = [](const RationalInterval& x) { return nlohmann::ordered_json::array({to_string(x.lo()), to_string(x.hi())}); };
  j["alpha"] = iv(alpha);
  j["beta"] = beta ? iv(*beta) : nlohmann::ordered_json();
  j["u_max"] = to_string(u_max);
  j["tight"] = tight;
  j["budget_exhausted"] = exhausted;
  j["alpha_exact"] = ex(alpha);
  j["beta_exact"] = beta ? ex(*beta) : nlohmann::ordered_json();
  j["trace"] = trace;
  return j.dump(2);
}

CertifyReport certify(const AnalysisSystem& sys, const BoundResult& r, std::size_t n_samples, unsigned long seed) {
  CertifyReport rep;
  std::mt19937_64 rng(seed);
  std::vector<std::string> vars;
  for (const auto& v : sys.objective.free_vars()) vars.push_back(v);
  Tape tape({sys.objective}, vars);
  Box full = sys.full_box();
  const Rational a = r.alpha.hi();
  const Rational b = r.beta ? r.beta->hi() : Rational(0);
  std::uniform_int_distribution<int> coin(0, 7);
  std::uniform_int_distribution<long> frac(0, (1L << 30));
  std::uniform_int_distribution<int> octave(0, 40);
  auto uniform_in = [&](const RationalInterval& rg) {
    int c = coin(rng);
    if (c == 0) return rg.lo();
    if (c == 1) return rg.hi();
    return Rational(rg.lo() + rg.width() * Rational(frac(rng), 1L << 30));
  };
  while (rep.samples < n_samples) {
    Box pt;
    std::vector<Ival> xi;
    std::vector<RationalInterval> xr;
    for (const auto& v : vars) {
      Rational q;
      if (v == kUnitVar)
        q = sys.u_max * pow2(-octave(rng)) * Rational((1L << 30) + frac(rng), 1L << 31);
      else
        q = uniform_in(full.at(v));
      pt[v] = RationalInterval(q);
      xi.push_back(Ival::of(q));
      xr.push_back(RationalInterval(q));
    }
    Rational u = pt.count(kUnitVar) ? pt.at(kUnitVar).lo() : sys.u_max;
    Rational bound = a * u + b * u * u;
    Ival bi = Ival::of(RationalInterval(bound));
    ++rep.samples;
    Ival v;
    try {
      v = tape.eval(xi)[0];
    } catch (const std::exception&) {
      ++rep.skipped;
      continue;
    }
    double m = mag(v);
    double ratio;
    if (std::isfinite(m) && m <= bi.lo) {
      ratio = m / bi.lo;
    } else {
      RationalInterval e;
      try {
        e = tape.eval(xr, kSqrtBits)[0];
      } catch (const std::exception&) {
        ++rep.skipped;
        continue;
      }
      Rational lo = e.contains_zero() ? Rational(0) : Rational(std::min(Rational(abs(e.lo())), Rational(abs(e.hi()))));
      if (lo > bound) throw CounterexampleFound(pt, lo, bound);
      ratio = sgn(bound) > 0 ? Rational(e.mag() / bound).get_d() : 0.0;
    }
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.worst = pt;
    }
  }
  return rep;
}

}  // namespace fpbound
