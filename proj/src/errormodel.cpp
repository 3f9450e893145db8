#include "fpbound/errormodel.hpp"

#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include "fpbound/poly.hpp"
#include "json.hpp"

namespace fpbound {

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Exact: return "Exact";
    case ModelKind::Absolute: return "Absolute";
    case ModelKind::RelativeDK: return "RelativeDK";
    case ModelKind::RelativeDiv: return "RelativeDiv";
    case ModelKind::RelativeSqrt: return "RelativeSqrt";
    case ModelKind::CustomAbsolute: return "CustomAbsolute";
    case ModelKind::CustomRelative: return "CustomRelative";
  }
  return "?";
}

std::string ErrorModel::describe() const {
  std::string s = to_string(kind);
  if (kind == ModelKind::Absolute) s += "(" + std::to_string(ell) + ")";
  if (kind != ModelKind::Exact) s += " |err| <= " + bound.str() + (relative() ? " (relative)" : " (absolute)");
  return s;
}

Expr sqrt_rel_bound() {
  Expr u = Expr::var(kUnitVar);
  Expr w = Expr::sqrt(1 + 2 * u);
  return 2 * u / (1 + 2 * u + w);
}

Expr sqrt_bound_fn() {
  Expr u = Expr::var(kUnitVar);
  return Expr::constant(2) / (1 + 2 * u + Expr::sqrt(1 + 2 * u));
}

Box AnalysisSystem::full_box() const {
  Box b = inputs;
  b[kUnitVar] = RationalInterval(Rational(0), u_max);
  for (const auto& e : eps) b[e] = RationalInterval(Rational(-1), Rational(1));
  return b;
}

const AnnotatedStep& AnalysisSystem::step(const std::string& lhs) const {
  for (const auto& s : steps)
    if (s.step.lhs == lhs) return s;
  throw std::out_of_range("no step " + lhs);
}

bool proven_nonnegative(const Expr& e, const Box& box, std::size_t max_boxes) {
  std::vector<std::string> vs = e.free_vars();
  for (const auto& v : vs)
    if (!box.count(v)) throw std::out_of_range("no range for " + v);
  Tape tape({e}, vs);
  // Boxes are bisected in doubles; the root is rounded outward, so a proof on
  // it covers the rational box. Rational fallbacks clip back to the box.
  using DBox = std::vector<Ival>;
  std::vector<double> scale;
  DBox root;
  std::vector<RationalInterval> orig;
  for (const auto& v : vs) {
    root.push_back(Ival::of(box.at(v)));
    orig.push_back(box.at(v));
    double w = root.back().hi - root.back().lo;
    scale.push_back(w > 0 ? w : 1.0);
  }
  std::deque<DBox> queue{root};
  std::vector<Ival> x(vs.size()), slots, out;
  std::size_t boxes = 0;
  while (!queue.empty()) {
    if (++boxes > max_boxes) return false;
    DBox b = std::move(queue.front());
    queue.pop_front();
    bool near_zero = true;
    try {
      tape.eval_into(b, slots, out);
      if (out[0].lo >= 0) continue;
      if (out[0].hi < 0) return false;
      near_zero = out[0].lo > -1e-12 * std::max(1.0, std::fabs(out[0].hi));
      for (std::size_t i = 0; i < vs.size(); ++i) {
        double m = 0.5 * b[i].lo + 0.5 * b[i].hi;
        x[i] = Ival(m, m);
      }
      tape.eval_into(x, slots, out);
      if (out[0].hi < 0) return false;
    } catch (const std::runtime_error&) {
    }
    // doubles only lose to cancellation; rationals settle boxes just short
    if (near_zero) {
      try {
        std::vector<RationalInterval> rb;
        for (std::size_t i = 0; i < vs.size(); ++i)
          rb.push_back(RationalInterval(Rational(b[i].lo), Rational(b[i].hi)).intersect(orig[i]));
        RationalInterval r = tape.eval(rb, 64)[0];
        if (sgn(r.lo()) >= 0) continue;
        if (sgn(r.hi()) < 0) return false;
      } catch (const std::exception&) {
      }
    }
    std::size_t best = vs.size();
    double bw = 0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      double w = (b[i].hi - b[i].lo) / scale[i];
      if (w > bw) {
        bw = w;
        best = i;
      }
    }
    if (best == vs.size()) return false;
    double m = 0.5 * b[best].lo + 0.5 * b[best].hi;
    if (!(m > b[best].lo && m < b[best].hi)) return false;
    DBox l = b, r = b;
    l[best].hi = m;
    r[best].lo = m;
    queue.push_back(std::move(l));
    queue.push_back(std::move(r));
  }
  return true;
}

namespace {

// Smallest power-of-two hull [lo', hi'] of r; RN is monotone and powers of
// two are representable, so RN maps r into this hull.
RationalInterval pow2_hull(const RationalInterval& r) {
  auto down = [](const Rational& q) -> Rational {
    if (sgn(q) == 0) return q;
    if (sgn(q) > 0) return pow2(floor_log2(q));
    Rational a = -q;
    return is_pow2(a) ? q : Rational(-pow2(floor_log2(a) + 1));
  };
  auto upv = [&](const Rational& q) -> Rational { return -down(Rational(-q)); };
  return RationalInterval(down(r.lo()), upv(r.hi()));
}

// Closed binade [2^l, 2^(l+1)] containing |r|, if any.
std::optional<int> closed_binade(const RationalInterval& r) {
  if (r.contains_zero()) return std::nullopt;
  Rational lo = abs(r.lo()), hi = abs(r.hi());
  if (lo > hi) std::swap(lo, hi);
  long l = floor_log2(lo);
  if (hi <= pow2(l + 1)) return static_cast<int>(l);
  return std::nullopt;
}

std::optional<RationalInterval> try_eval(const Expr& e, const Box& b) {
  try {
    return interval_eval(e, b, 64);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

RationalInterval slope_at_zero(const Expr& bound) {
  auto s = series_at_zero(bound, kUnitVar, 1);
  return s[1].exact ? RationalInterval(s[1].value) : s[1].enclosure;
}

// a single variable times a constant; returns (coef, var)
std::optional<std::pair<Rational, Expr>> scaled_var(const Expr& e) {
  if (e.op() == Op::Var) return std::make_pair(Rational(1), e);
  if (e.op() == Op::Quot && e.kid(0).op() == Op::Var && e.kid(1).is_const())
    return std::make_pair(Rational(1 / e.kid(1).value()), e.kid(0));
  if (e.op() != Op::Prod) return std::nullopt;
  Rational c(1);
  std::optional<Expr> v;
  for (std::size_t i = 0; i < e.nkids(); ++i) {
    Expr k = e.kid(i);
    if (k.is_const()) c *= k.value();
    else if (k.op() == Op::Var && !v) v = k;
    else return std::nullopt;
  }
  if (!v) return std::nullopt;
  return std::make_pair(c, *v);
}

}  // namespace

AnalysisSystem analyze_steps(const Program& p, const AnalysisOptions& opt) {
  AnalysisSystem sys;
  sys.program = p;
  sys.u_max = opt.u_max ? *opt.u_max : p.u_max;
  if (sgn(sys.u_max) <= 0 || sys.u_max > Rational(1, 4)) throw std::invalid_argument("u_max must lie in (0, 1/4]");
  sys.inputs = p.input_box();
  sys.scale_inputs = scale_inputs(p);
  Expr u = Expr::var(kUnitVar);
  RationalInterval urange(Rational(0), sys.u_max);

  // substitution map from program names to raw-variable expressions
  std::map<std::string, Expr> flat;
  std::map<std::string, RationalInterval> known;  // ranges of inputs and computed values
  Box raw_box = sys.inputs;
  for (const auto& in : p.inputs) {
    known[in.name] = in.range;
    if (in.exact_relation) flat[in.name] = p.resolve_relations(*in.exact_relation);
  }
  std::set<std::string> names;
  for (const auto& in : p.inputs) names.insert(in.name);
  for (const auto& st : p.steps) names.insert(st.lhs);

  for (const Step& st : p.steps) {
    AnnotatedStep a;
    a.step = st;
    Expr rhs_flat = substitute(st.rhs, flat);
    // error-free differences only cancel after distribution
    if (st.rounded && st.annotation == Annotation::Exact) rhs_flat = expand(rhs_flat);
    auto r1 = try_eval(st.rhs, known);
    auto r2 = try_eval(rhs_flat, raw_box);
    // Without a range only the relative models apply; they need none.
    a.range_known = r1 || r2;
    RationalInterval rr = r1 && r2 ? r1->intersect(*r2) : (r1 ? *r1 : r2 ? *r2 : RationalInterval());
    a.rhs_range = rr;
    if (!a.range_known && st.annotation == Annotation::ForceAbsolute)
      throw std::runtime_error("step " + st.lhs + " (line " + std::to_string(st.line) +
                               "): absolute model requested but the value range could not be bounded");

    ErrorModel& m = a.model;
    auto sh = match_shape(st.rhs);
    if (!st.rounded || st.annotation == Annotation::Exact) {
      m.kind = ModelKind::Exact;
      a.note = st.rounded ? "annotated exact" : "error-free definition";
    } else if (st.annotation == Annotation::CustomAbsolute || st.annotation == Annotation::CustomRelative) {
      m.kind = st.annotation == Annotation::CustomAbsolute ? ModelKind::CustomAbsolute : ModelKind::CustomRelative;
      m.bound = *st.bound;
      RationalInterval bv = interval_eval(m.bound, {{kUnitVar, urange}});
      if (sgn(bv.lo()) < 0) throw std::runtime_error("step " + st.lhs + ": error bound may be negative on [0, u_max]");
      a.note = "user bound";
    } else if (st.annotation == Annotation::ForceAbsolute) {
      Rational hi = std::max(Rational(abs(rr.lo())), Rational(abs(rr.hi())));
      if (sgn(hi) == 0) {
        m.kind = ModelKind::Exact;
        a.note = "value is zero";
      } else {
        long l = floor_log2(hi);
        if (is_pow2(hi)) --l;
        m.kind = ModelKind::Absolute;
        m.ell = static_cast<int>(l);
        a.note = "annotated absolute, |value| <= 2^" + std::to_string(l + 1);
      }
    } else {
      bool decided = false;
      if (sh && sh->kind == Shape::Const) {
        try {
          Rational c = exact_value(st.rhs);
          if (sgn(c) == 0 || is_pow2(abs(c))) {
            m.kind = ModelKind::Exact;
            a.note = "representable constant";
            decided = true;
          }
        } catch (const std::domain_error&) {
        }
      }
      // power of two times a computed value
      if (!decided) {
        if (auto sv = scaled_var(st.rhs); sv && sgn(sv->first) != 0 && is_pow2(abs(sv->first))) {
          m.kind = ModelKind::Exact;
          a.note = "power-of-two scaling";
          decided = true;
        }
      }
      // Sterbenz: b - a with a/2 <= b <= 2a
      if (!decided && st.rhs.op() == Op::Sum && st.rhs.nkids() == 2) {
        auto s0 = scaled_var(st.rhs.kid(0)), s1 = scaled_var(st.rhs.kid(1));
        if (s0 && s1 && abs(s0->first) == 1 && abs(s1->first) == 1 && sgn(s0->first) != sgn(s1->first)) {
          Expr pa = substitute(s0->second, flat), pb = substitute(s1->second, flat);
          Box bb = raw_box;
          if (proven_nonnegative(2 * pa - pb, bb) && proven_nonnegative(2 * pb - pa, bb)) {
            m.kind = ModelKind::Exact;
            a.note = "Sterbenz: operands within a factor 2";
            decided = true;
          }
        }
      }
      if (!decided) {
        std::optional<int> l;
        if (a.range_known) l = closed_binade(rr);
        if (l) {
          m.kind = ModelKind::Absolute;
          m.ell = *l;
          a.note = "range " + rr.str() + " inside binade [2^" + std::to_string(*l) + ", 2^" + std::to_string(*l + 1) + "]";
        } else if (sh && sh->kind == Shape::Div) {
          m.kind = ModelKind::RelativeDiv;
          a.note = "division";
        } else if (sh && sh->kind == Shape::Sqrt) {
          m.kind = ModelKind::RelativeSqrt;
          a.note = "square root";
        } else {
          m.kind = ModelKind::RelativeDK;
          a.note = a.range_known ? "range spans binades" : "range unbounded";
        }
      }
    }
    switch (m.kind) {
      case ModelKind::Absolute:
        m.bound = Expr::constant(pow2(m.ell + (opt.strict_paper_absolute ? 1 : 0))) * u;
        break;
      case ModelKind::RelativeDK: m.bound = u / (1 + u); break;
      case ModelKind::RelativeDiv: m.bound = u * (1 - 2 * u); break;
      case ModelKind::RelativeSqrt: m.bound = sqrt_rel_bound(); break;
      default: break;
    }

    if (m.kind == ModelKind::Exact) {
      a.value_raw = rhs_flat;
      a.range = rr;
    } else {
      a.eps = kEpsPrefix + st.lhs;
      a.raw = kRawPrefix + st.lhs;
      for (const std::string& n : {a.eps, a.raw})
        if (names.count(n)) throw std::runtime_error("error variable " + n + " collides with a program name");
      Expr e = Expr::var(a.raw);
      RationalInterval bmax = interval_eval(m.bound, {{kUnitVar, RationalInterval(sys.u_max)}});
      Rational b = bmax.hi();
      // B is increasing in u for the built-in models; custom ones are enclosed over [0, u_max]
      if (m.kind == ModelKind::CustomAbsolute || m.kind == ModelKind::CustomRelative)
        b = interval_eval(m.bound, {{kUnitVar, urange}}).hi();
      RationalInterval eb(Rational(-b), b);
      raw_box[a.raw] = eb;
      if (m.relative()) {
        a.value_raw = rhs_flat * (1 + e);
        a.range = rr * (RationalInterval(Rational(1)) + eb);
      } else {
        a.value_raw = rhs_flat + e;
        a.range = rr + eb;
      }
      if (a.range_known) {
        RationalInterval hull = pow2_hull(rr);
        a.range = RationalInterval(std::max(a.range.lo(), hull.lo()), std::min(a.range.hi(), hull.hi()));
      }
      sys.eps.push_back(a.eps);
      sys.raw_vars.push_back(a.raw);
      sys.eps_bound[a.eps] = m.bound;
      sys.eps_slope[a.eps] = slope_at_zero(m.bound);
    }
    flat[st.lhs] = a.value_raw;
    if (a.range_known) known[st.lhs] = a.range;
    sys.steps.push_back(std::move(a));
  }

  std::map<std::string, Expr> esub;
  for (std::size_t i = 0; i < sys.eps.size(); ++i)
    esub[sys.raw_vars[i]] = sys.eps_bound[sys.eps[i]] * Expr::var(sys.eps[i]);
  Box fb = sys.full_box();
  Expr target = simplify(p.resolve_relations(p.target), fb);
  sys.objective_raw = simplify(flat.at(p.result()) / target - 1, raw_box);
  sys.objective = simplify(substitute(sys.objective_raw, esub), fb);
  for (auto& a : sys.steps) a.value = substitute(a.value_raw, esub);
  return sys;
}

namespace {

// Simplest rational in [a, b] (smallest denominator), a <= b.
Rational simplest_between(const Rational& a, const Rational& b) {
  if (sgn(a) <= 0 && sgn(b) >= 0) return Rational(0);
  if (sgn(b) < 0) return -simplest_between(Rational(-b), Rational(-a));
  BigInt fl = floor_q(a);
  if (Rational(fl) == a) return a;
  if (Rational(fl + 1) <= b) return Rational(fl + 1);
  Rational f(fl);
  return f + 1 / simplest_between(1 / (b - f), 1 / (a - f));
}

int sign_at(const Expr& f, const std::string& v, const Rational& x) {
  RationalInterval r = interval_eval(f, {{v, RationalInterval(x)}}, 128);
  if (sgn(r.lo()) > 0) return 1;
  if (sgn(r.hi()) < 0) return -1;
  return 0;
}

bool exact_zero(const Expr& f, const std::string& v, const Rational& x) {
  try {
    return sgn(exact_value(substitute(f, {{v, Expr::constant(x)}}))) == 0;
  } catch (const std::exception&) {
    return false;
  }
}

// Rational root of f (a function of v only) in [lo, hi], if one exists and
// can be certified exactly.
std::optional<Rational> rational_root(const Expr& f, const std::string& v, const Rational& lo, const Rational& hi) {
  const int n = 256;
  int prev = 0;  // sign at the previous grid point, 0 when unknown
  Rational px;
  for (int i = 0; i <= n; ++i) {
    Rational x = lo + (hi - lo) * i / n;
    int s;
    try {
      s = sign_at(f, v, x);
    } catch (const std::runtime_error&) {
      prev = 0;
      continue;
    }
    if (s == 0) {
      if (exact_zero(f, v, x)) return x;
      continue;
    }
    if (prev != 0 && prev != s) {
      Rational a = px, b = x;
      int sa = prev;
      for (int k = 0; k < 90; ++k) {
        Rational m = (a + b) / 2;
        int sm;
        try {
          sm = sign_at(f, v, m);
        } catch (const std::runtime_error&) {
          break;
        }
        if (sm == 0) {
          if (exact_zero(f, v, m)) return m;
          break;
        }
        if (sm == sa) a = m;
        else b = m;
      }
      Rational q = simplest_between(a, b);
      if (exact_zero(f, v, q)) return q;
    }
    prev = s;
    px = x;
  }
  return std::nullopt;
}

}  // namespace

std::string SplitSuggestion::text() const {
  std::string s = "step " + step + " crosses " + to_string(boundary);
  if (input && point) s += "; split " + *input + " at " + to_string(*point);
  else s += "; split on the intermediate value " + step + " = " + to_string(boundary);
  return s;
}

std::vector<SplitSuggestion> suggest_splits(const AnalysisSystem& sys) {
  std::vector<SplitSuggestion> out;
  const Program& p = sys.program;
  auto exact = p.exact_values();
  for (const auto& a : sys.steps) {
    const Step& st = a.step;
    if (!st.rounded || st.annotation != Annotation::Default) continue;
    if (a.model.kind == ModelKind::Exact || a.model.kind == ModelKind::Absolute) continue;
    const Expr& v = exact.at(st.lhs);
    if (!sys.scale_inputs.empty()) {
      auto d = homogeneity_degree(v, sys.scale_inputs);
      if (!d || sgn(*d) != 0) continue;
    }
    auto r = try_eval(v, sys.inputs);
    if (!r || r->is_point()) continue;
    Rational lo = r->lo(), hi = r->hi();
    if (sgn(hi) <= 0) continue;  // negative ranges: mirror not needed for the corpus
    Rational b = pow2(floor_log2(hi));
    if (b == hi) b /= 2;
    if (b <= lo) continue;
    SplitSuggestion s;
    s.step = st.lhs;
    s.boundary = b;
    std::vector<std::string> fv = v.free_vars();
    if (fv.size() == 1 && sys.inputs.count(fv[0])) {
      const RationalInterval& ir = sys.inputs.at(fv[0]);
      if (auto q = rational_root(v - Expr::constant(b), fv[0], ir.lo(), ir.hi())) {
        s.input = fv[0];
        s.point = *q;
      }
    }
    out.push_back(s);
  }
  return out;
}

std::string system_json(const AnalysisSystem& sys) {
  using nlohmann::ordered_json;
  auto iv = [](const RationalInterval& r) {
    return ordered_json{{"lo", to_string(r.lo())}, {"hi", to_string(r.hi())},
                        {"approx", {to_double_down(r.lo()), to_double_up(r.hi())}}};
  };
  ordered_json j;
  j["program"] = sys.program.name;
  j["u_max"] = to_string(sys.u_max);
  ordered_json ins = ordered_json::object();
  for (const auto& [n, r] : sys.inputs) ins[n] = iv(r);
  j["inputs"] = ins;
  j["scale_inputs"] = sys.scale_inputs;
  ordered_json steps = ordered_json::array();
  for (const auto& a : sys.steps) {
    ordered_json s;
    s["lhs"] = a.step.lhs;
    s["rhs"] = a.step.rhs.str();
    s["model"] = to_string(a.model.kind);
    if (a.model.kind == ModelKind::Absolute) s["ell"] = a.model.ell;
    if (!a.eps.empty()) {
      s["eps"] = a.eps;
      s["bound"] = a.model.bound.str();
    }
    s["note"] = a.note;
    if (a.range_known) s["range"] = iv(a.range);
    steps.push_back(s);
  }
  j["steps"] = steps;
  j["objective"] = sys.objective.str();
  j["objective_nodes"] = dag_size(sys.objective);
  return j.dump(2);
}

}  // namespace fpbound
