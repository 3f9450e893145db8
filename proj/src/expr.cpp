#include "fpbound/expr.hpp"

#include <algorithm>
#include <deque>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "fpbound/ival.hpp"

namespace fpbound {
namespace {

struct NodeHash {
  std::size_t operator()(const Node* n) const { return n->hash; }
};
struct NodeEq {
  bool operator()(const Node* a, const Node* b) const {
    return a->op == b->op && a->k == b->k && a->var == b->var && a->kids == b->kids &&
           (a->op != Op::Const || a->c == b->c);
  }
};

struct Store {
  std::recursive_mutex mu;
  std::deque<Node> nodes;
  std::unordered_set<const Node*, NodeHash, NodeEq> table;
  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
};

Store& store() {
  static Store* s = new Store();
  return *s;
}

std::size_t mix(std::size_t h, std::size_t v) {
  return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

std::size_t hash_rational(const Rational& q) {
  std::size_t h = static_cast<std::size_t>(mpz_getlimbn(q.get_num_mpz_t(), 0));
  h = mix(h, static_cast<std::size_t>(mpz_size(q.get_num_mpz_t())));
  h = mix(h, static_cast<std::size_t>(sgn(q) + 2));
  return mix(h, static_cast<std::size_t>(mpz_getlimbn(q.get_den_mpz_t(), 0)));
}

const Node* intern(Node proto) {
  std::size_t h = static_cast<std::size_t>(proto.op);
  h = mix(h, static_cast<std::size_t>(proto.k));
  h = mix(h, static_cast<std::size_t>(proto.var + 1));
  for (const Node* k : proto.kids) h = mix(h, k->id);
  if (proto.op == Op::Const) h = mix(h, hash_rational(proto.c));
  proto.hash = h;
  Store& s = store();
  std::lock_guard<std::recursive_mutex> lock(s.mu);
  auto it = s.table.find(&proto);
  if (it != s.table.end()) return *it;
  if (proto.op == Op::Var) {
    proto.free = {proto.var};
  } else {
    for (const Node* k : proto.kids) {
      std::vector<int> merged;
      std::set_union(proto.free.begin(), proto.free.end(), k->free.begin(), k->free.end(),
                     std::back_inserter(merged));
      proto.free.swap(merged);
    }
  }
  proto.id = static_cast<std::uint32_t>(s.nodes.size());
  s.nodes.push_back(std::move(proto));
  const Node* n = &s.nodes.back();
  s.table.insert(n);
  return n;
}

struct ById {
  bool operator()(const Node* a, const Node* b) const { return a->id < b->id; }
};

const Node* raw(Op op, std::vector<const Node*> kids, int k = 0) {
  Node p;
  p.op = op;
  p.k = k;
  if (op == Op::Sum || op == Op::Prod) std::sort(kids.begin(), kids.end(), ById());
  p.kids = std::move(kids);
  return intern(std::move(p));
}

const Node* raw_const(const Rational& c) {
  Node p;
  p.op = Op::Const;
  p.c = c;
  return intern(std::move(p));
}

// coef * prod(base^exp); exponents are nonzero multiples of 1/2.
struct Mono {
  Rational coef{1};
  std::map<const Node*, Rational, ById> f;
};

bool is_half_integer(const Rational& e) { return e.get_den() == 1 || e.get_den() == 2; }

Rational rat_pow(const Rational& b, long e) {
  Rational r(1);
  Rational base = e >= 0 ? b : Rational(1) / b;
  for (long i = 0; i < std::labs(e); ++i) r *= base;
  return r;
}

Mono mono_of(const Node* n);
void normalize(Mono& m);

void mul_into(Mono& m, const Mono& o, const Rational& power) {
  if (power.get_den() != 1) throw std::logic_error("mul_into: fractional power of coef");
  m.coef *= rat_pow(o.coef, power.get_num().get_si());
  for (auto& [b, e] : o.f) m.f[b] += e * power;
}

void normalize(Mono& m) {
  bool again = true;
  while (again) {
    again = false;
    for (auto it = m.f.begin(); it != m.f.end();) {
      const Node* b = it->first;
      Rational e = it->second;
      if (sgn(e) == 0) {
        it = m.f.erase(it);
        continue;
      }
      if (b->op == Op::Const && (b->c == 1 || sgn(b->c) == 0)) {
        if (sgn(b->c) == 0) m.coef = 0;
        it = m.f.erase(it);
        continue;
      }
      if (b->op == Op::Const) {
        // integer part of the exponent goes into the coefficient
        BigInt q = floor_q(e);
        if (q != 0) {
          m.coef *= rat_pow(b->c, q.get_si());
          e -= Rational(q);
          if (sgn(e) == 0) {
            it = m.f.erase(it);
            continue;
          }
          it->second = e;
        }
        // sqrt(p/q) = sqrt(p*q)/q, then pull out small square factors
        BigInt p = b->c.get_num() * b->c.get_den();
        BigInt outside = b->c.get_den();
        BigInt root(1);
        for (unsigned long d = 2; d <= 1000 && d * d <= p; ++d) {
          while (mpz_divisible_ui_p(p.get_mpz_t(), d * d)) {
            p /= d * d;
            root *= d;
          }
        }
        if (outside != 1 || root != 1) {
          m.coef *= Rational(root) / Rational(outside);
          it = m.f.erase(it);
          if (p != 1) m.f[raw_const(Rational(p))] += Rational(1, 2);
          again = true;
          break;
        }
      } else if (b->op == Op::Sqrt) {
        // opaque sqrt(P): pairs of factors collapse to P
        BigInt q;
        mpz_tdiv_q_ui(q.get_mpz_t(), e.get_num_mpz_t(), 2);
        if (q != 0) {
          Mono inner = mono_of(b->kids[0]);
          it->second = e - Rational(2 * q);
          mul_into(m, inner, Rational(q));
          again = true;
          break;
        }
      }
      ++it;
    }
  }
  for (auto it = m.f.begin(); it != m.f.end();) {
    if (sgn(it->second) == 0) it = m.f.erase(it);
    else ++it;
  }
}

Mono mono_of(const Node* n) {
  Mono m;
  switch (n->op) {
    case Op::Const:
      m.coef = n->c;
      return m;
    case Op::Var:
    case Op::Sum:
      m.f[n] = 1;
      return m;
    case Op::Pow: {
      Mono b = mono_of(n->kids[0]);
      Mono r;
      mul_into(r, b, Rational(n->k));
      normalize(r);
      return r;
    }
    case Op::Sqrt: {
      const Node* a = n->kids[0];
      if (a->op == Op::Const || a->op == Op::Var || a->op == Op::Sum) {
        m.f[a] = Rational(1, 2);
      } else {
        m.f[n] = 1;
      }
      return m;
    }
    case Op::Prod: {
      for (const Node* k : n->kids) mul_into(m, mono_of(k), Rational(1));
      normalize(m);
      return m;
    }
    case Op::Quot: {
      mul_into(m, mono_of(n->kids[0]), Rational(1));
      mul_into(m, mono_of(n->kids[1]), Rational(-1));
      normalize(m);
      return m;
    }
  }
  return m;
}

void power_nodes(const Node* b, const Rational& e, std::vector<const Node*>& out) {
  BigInt n = floor_q(e);
  Rational h = e - Rational(n);
  if (n > 0) out.push_back(n == 1 ? b : raw(Op::Pow, {b}, static_cast<int>(n.get_si())));
  if (sgn(h) != 0) out.push_back(raw(Op::Sqrt, {b}));
}

Expr build(const Mono& m) {
  if (sgn(m.coef) == 0) return Expr(raw_const(Rational(0)));
  std::vector<const Node*> num, den;
  for (auto& [b, e] : m.f) {
    if (!is_half_integer(e)) throw std::logic_error("build: exponent not a half-integer");
    if (sgn(e) > 0) power_nodes(b, e, num);
    else power_nodes(b, -e, den);
  }
  if (m.coef != 1 || num.empty()) num.push_back(raw_const(m.coef));
  const Node* nn = num.size() == 1 ? num[0] : raw(Op::Prod, num);
  if (den.empty()) return Expr(nn);
  const Node* dd = den.size() == 1 ? den[0] : raw(Op::Prod, den);
  return Expr(raw(Op::Quot, {nn, dd}));
}

Mono divide(const Mono& a, const Mono& b) {
  Mono r = a;
  mul_into(r, b, Rational(-1));
  normalize(r);
  return r;
}

}  // namespace

Expr::Expr() : n_(raw_const(Rational(0))) {}

Expr Expr::constant(const Rational& c) { return Expr(raw_const(c)); }

int var_index(const std::string& name) {
  Store& s = store();
  std::lock_guard<std::recursive_mutex> lock(s.mu);
  auto it = s.ids.find(name);
  if (it != s.ids.end()) return it->second;
  int id = static_cast<int>(s.names.size());
  s.names.push_back(name);
  s.ids[name] = id;
  return id;
}

const std::string& var_name(int index) {
  Store& s = store();
  std::lock_guard<std::recursive_mutex> lock(s.mu);
  return s.names.at(static_cast<std::size_t>(index));
}

std::size_t node_count() {
  Store& s = store();
  std::lock_guard<std::recursive_mutex> lock(s.mu);
  return s.nodes.size();
}

Expr Expr::var(const std::string& name) {
  Node p;
  p.op = Op::Var;
  p.var = var_index(name);
  return Expr(intern(std::move(p)));
}

const std::string& Expr::name() const { return var_name(n_->var); }

Expr Expr::sum(const std::vector<Expr>& terms) {
  std::map<const Node*, Rational, ById> acc;
  Rational cst(0);
  std::function<void(const Node*, const Rational&)> add = [&](const Node* n, const Rational& s) {
    if (n->op == Op::Const) {
      cst += s * n->c;
      return;
    }
    if (n->op == Op::Sum) {
      for (const Node* k : n->kids) add(k, s);
      return;
    }
    Mono m = mono_of(n);
    if (m.f.size() == 1 && m.f.begin()->first->op == Op::Sum && m.f.begin()->second == 1) {
      add(m.f.begin()->first, s * m.coef);
      return;
    }
    Rational c = m.coef;
    m.coef = 1;
    acc[build(m).node()] += s * c;
  };
  for (const Expr& t : terms) add(t.node(), Rational(1));
  for (auto it = acc.begin(); it != acc.end();) {
    if (sgn(it->second) == 0) it = acc.erase(it);
    else ++it;
  }
  if (acc.empty()) return Expr::constant(cst);
  if (sgn(cst) == 0 && acc.size() == 1) {
    Mono m = mono_of(acc.begin()->first);
    m.coef *= acc.begin()->second;
    return build(m);
  }
  if (sgn(cst) == 0) {
    std::vector<Mono> monos;
    for (auto& [rest, c] : acc) monos.push_back(mono_of(rest));
    std::map<const Node*, Rational, ById> common = monos[0].f;
    for (std::size_t i = 1; i < monos.size() && !common.empty(); ++i) {
      for (auto it = common.begin(); it != common.end();) {
        auto jt = monos[i].f.find(it->first);
        if (jt == monos[i].f.end() || sgn(jt->second) != sgn(it->second)) {
          it = common.erase(it);
          continue;
        }
        it->second = sgn(it->second) > 0 ? std::min(it->second, jt->second)
                                         : std::max(it->second, jt->second);
        ++it;
      }
    }
    if (!common.empty()) {
      Mono cm;
      cm.f = common;
      std::vector<Expr> reduced;
      std::size_t i = 0;
      for (auto& [rest, c] : acc) {
        Mono r = divide(monos[i++], cm);
        r.coef *= c;
        reduced.push_back(build(r));
      }
      return prod({build(cm), sum(reduced)});
    }
  }
  Rational lead = sgn(cst) != 0 ? cst : acc.begin()->second;
  Rational sg = sgn(lead) < 0 ? Rational(-1) : Rational(1);
  std::vector<const Node*> kids;
  if (sgn(cst) != 0) kids.push_back(raw_const(cst * sg));
  for (auto& [rest, c] : acc) {
    Mono m = mono_of(rest);
    m.coef *= c * sg;
    kids.push_back(build(m).node());
  }
  const Node* s = raw(Op::Sum, kids);
  if (sg < 0) return Expr(raw(Op::Prod, {raw_const(Rational(-1)), s}));
  return Expr(s);
}

Expr Expr::prod(const std::vector<Expr>& factors) {
  Mono m;
  for (const Expr& f : factors) mul_into(m, mono_of(f.node()), Rational(1));
  normalize(m);
  return build(m);
}

Expr Expr::quot(const Expr& num, const Expr& den) {
  if (den.is_const(0)) throw std::domain_error("division by the zero expression");
  Mono m = mono_of(num.node());
  mul_into(m, mono_of(den.node()), Rational(-1));
  normalize(m);
  return build(m);
}

Expr Expr::pow(const Expr& a, int k) {
  if (k < 0) throw std::invalid_argument("Expr::pow: negative exponent");
  if (k == 0) return constant(1);
  if (k == 1) return a;
  Mono m;
  mul_into(m, mono_of(a.node()), Rational(k));
  normalize(m);
  return build(m);
}

Expr Expr::sqrt(const Expr& a) {
  if (a.is_const()) {
    Rational r;
    if (exact_sqrt(a.value(), r)) return constant(r);
    if (sgn(a.value()) < 0) return Expr(raw(Op::Sqrt, {a.node()}));
    Mono m;
    m.f[a.node()] = Rational(1, 2);
    normalize(m);
    return build(m);
  }
  Mono m = mono_of(a.node());
  if (sgn(m.coef) > 0 && m.f.size() == 1) {
    Mono r;
    bool ok = true;
    Rational root;
    if (exact_sqrt(m.coef, root)) {
      r.coef = root;
    } else {
      r.f[raw_const(m.coef)] = Rational(1, 2);
    }
    for (auto& [b, e] : m.f) {
      // with a single factor, sqrt(c*b^e) = sqrt(c)*b^(e/2) wherever the left
      // side is defined when e is odd; even powers need a sign fact about b.
      if (e.get_den() != 1 || mpz_even_p(e.get_num_mpz_t()) || b->op == Op::Sqrt) {
        ok = false;
        break;
      }
      r.f[b] = e / 2;
    }
    if (ok) {
      normalize(r);
      return build(r);
    }
  }
  return Expr(raw(Op::Sqrt, {a.node()}));
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::sum({a, Expr::prod({Expr::constant(-1), b})}); }
Expr operator-(const Expr& a) { return Expr::prod({Expr::constant(-1), a}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::prod({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::quot(a, b); }

std::vector<std::string> Expr::free_vars() const {
  std::vector<std::string> out;
  for (int v : n_->free) out.push_back(var_name(v));
  std::sort(out.begin(), out.end());
  return out;
}

bool Expr::depends_on_index(int v) const {
  return std::binary_search(n_->free.begin(), n_->free.end(), v);
}

bool Expr::depends_on(const std::string& v) const { return depends_on_index(var_index(v)); }

std::size_t dag_size(const Expr& e) {
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{e.node()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    for (const Node* k : n->kids) stack.push_back(k);
  }
  return seen.size();
}

namespace {

enum Prec { kSum = 1, kProd = 2, kAtom = 3 };

std::string print(const Node* n, int need);

// coef * prod(nums) / prod(dens) view of a product or quotient
struct Factored {
  Rational coef{1};
  std::vector<const Node*> nums, dens;
};

void collect(const Node* n, Factored& f, bool den) {
  if (n->op == Op::Const) {
    if (den) f.coef /= n->c;
    else f.coef *= n->c;
  } else if (n->op == Op::Prod) {
    for (const Node* k : n->kids) collect(k, f, den);
  } else if (n->op == Op::Quot && !den) {
    collect(n->kids[0], f, false);
    collect(n->kids[1], f, true);
  } else {
    (den ? f.dens : f.nums).push_back(n);
  }
}

bool negative_term(const Node* n) {
  if (n->op != Op::Const && n->op != Op::Prod && n->op != Op::Quot) return false;
  Factored f;
  collect(n, f, false);
  return sgn(f.coef) < 0;
}

std::string join_factors(const BigInt& k, const std::vector<const Node*>& fs, bool& multi) {
  std::vector<std::string> parts;
  if (k != 1 || fs.empty()) parts.push_back(k.get_str());
  for (const Node* f : fs) parts.push_back(print(f, kAtom));
  multi = parts.size() > 1;
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "*" : "") + parts[i];
  return s;
}

std::string print_terms(const std::vector<const Node*>& terms) {
  std::vector<const Node*> pos, neg;
  for (const Node* t : terms) (negative_term(t) ? neg : pos).push_back(t);
  std::string s;
  bool first = true;
  for (const Node* t : pos) {
    s += (first ? "" : " + ") + print(t, kProd);
    first = false;
  }
  for (const Node* t : neg) {
    s += (first ? "-" : " - ") + print((-Expr(t)).node(), kProd);
    first = false;
  }
  return s;
}

std::string print(const Node* n, int need) {
  std::string s;
  int own = kAtom;
  switch (n->op) {
    case Op::Const:
      s = n->c.get_str();
      if (sgn(n->c) < 0) own = kSum;
      else if (n->c.get_den() != 1) own = kProd;
      break;
    case Op::Var:
      s = var_name(n->var);
      break;
    case Op::Sum:
      own = kSum;
      s = print_terms(n->kids);
      break;
    case Op::Prod:
    case Op::Quot: {
      Factored f;
      collect(n, f, false);
      own = kProd;
      bool neg = sgn(f.coef) < 0;
      Rational a = abs(f.coef);
      if (neg && a == 1 && f.dens.empty() && f.nums.size() == 1 && f.nums[0]->op == Op::Sum) {
        std::vector<const Node*> flipped;
        for (const Node* k : f.nums[0]->kids) flipped.push_back((-Expr(k)).node());
        s = print_terms(flipped);
        own = kSum;
        break;
      }
      bool multi_num = false, multi_den = false;
      s = join_factors(a.get_num(), f.nums, multi_num);
      if (a.get_den() != 1 || !f.dens.empty()) {
        std::string d = join_factors(a.get_den(), f.dens, multi_den);
        s += "/" + (multi_den ? "(" + d + ")" : d);
      }
      if (neg) {
        s = "-" + s;
        own = kSum;
      }
      break;
    }
    case Op::Sqrt:
      s = "sqrt(" + print(n->kids[0], kSum) + ")";
      break;
    case Op::Pow:
      s = print(n->kids[0], kAtom) + "^" + std::to_string(n->k);
      break;
  }
  if (own < need) return "(" + s + ")";
  return s;
}

}  // namespace

std::string Expr::str() const { return print(n_, kSum); }

Expr substitute(const Expr& e, const std::map<std::string, Expr>& sub) {
  std::vector<int> keys;
  std::unordered_map<int, Expr> byidx;
  for (auto& [k, v] : sub) {
    int i = var_index(k);
    keys.push_back(i);
    byidx.emplace(i, v);
  }
  std::sort(keys.begin(), keys.end());
  std::unordered_map<const Node*, Expr> memo;
  std::function<Expr(const Node*)> go = [&](const Node* n) -> Expr {
    bool touches = false;
    for (int v : n->free)
      if (std::binary_search(keys.begin(), keys.end(), v)) {
        touches = true;
        break;
      }
    if (!touches) return Expr(n);
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    Expr r;
    switch (n->op) {
      case Op::Var:
        r = byidx.at(n->var);
        break;
      case Op::Sum: {
        std::vector<Expr> ks;
        for (const Node* k : n->kids) ks.push_back(go(k));
        r = Expr::sum(ks);
        break;
      }
      case Op::Prod: {
        std::vector<Expr> ks;
        for (const Node* k : n->kids) ks.push_back(go(k));
        r = Expr::prod(ks);
        break;
      }
      case Op::Quot:
        r = Expr::quot(go(n->kids[0]), go(n->kids[1]));
        break;
      case Op::Sqrt:
        r = Expr::sqrt(go(n->kids[0]));
        break;
      case Op::Pow:
        r = Expr::pow(go(n->kids[0]), n->k);
        break;
      case Op::Const:
        r = Expr(n);
        break;
    }
    memo.emplace(n, r);
    return r;
  };
  return go(e.node());
}

Expr differentiate(const Expr& e, const std::string& v,
                   const std::unordered_map<const Node*, Expr>& seed) {
  int vi = var_index(v);
  std::unordered_map<const Node*, Expr> memo;
  std::function<Expr(const Node*)> d = [&](const Node* n) -> Expr {
    auto sit = seed.find(n);
    if (sit != seed.end()) return sit->second;
    if (!std::binary_search(n->free.begin(), n->free.end(), vi)) return Expr::constant(0);
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    Expr r;
    switch (n->op) {
      case Op::Const:
        r = Expr::constant(0);
        break;
      case Op::Var:
        r = Expr::constant(n->var == vi ? 1 : 0);
        break;
      case Op::Sum: {
        std::vector<Expr> ks;
        for (const Node* k : n->kids) ks.push_back(d(k));
        r = Expr::sum(ks);
        break;
      }
      case Op::Prod: {
        std::vector<Expr> terms;
        for (std::size_t i = 0; i < n->kids.size(); ++i) {
          Expr dk = d(n->kids[i]);
          if (dk.is_const(0)) continue;
          std::vector<Expr> fs{dk};
          for (std::size_t j = 0; j < n->kids.size(); ++j)
            if (j != i) fs.emplace_back(n->kids[j]);
          terms.push_back(Expr::prod(fs));
        }
        r = Expr::sum(terms);
        break;
      }
      case Op::Quot: {
        Expr a(n->kids[0]), b(n->kids[1]);
        Expr da = d(n->kids[0]), db = d(n->kids[1]);
        r = Expr::quot(da * b - a * db, Expr::pow(b, 2));
        break;
      }
      case Op::Sqrt:
        r = Expr::quot(d(n->kids[0]), Expr::constant(2) * Expr(n));
        break;
      case Op::Pow: {
        Expr b(n->kids[0]);
        r = Expr::prod({Expr::constant(n->k), Expr::pow(b, n->k - 1), d(n->kids[0])});
        break;
      }
    }
    memo.emplace(n, r);
    return r;
  };
  return d(e.node());
}

std::optional<Rational> homogeneity_degree(const Expr& e, const std::vector<std::string>& vars) {
  std::vector<int> idx;
  for (auto& v : vars) idx.push_back(var_index(v));
  std::sort(idx.begin(), idx.end());
  std::unordered_map<const Node*, std::optional<Rational>> memo;
  std::function<std::optional<Rational>(const Node*)> deg =
      [&](const Node* n) -> std::optional<Rational> {
    bool touches = false;
    for (int v : n->free)
      if (std::binary_search(idx.begin(), idx.end(), v)) touches = true;
    if (!touches) return Rational(0);
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    std::optional<Rational> r;
    switch (n->op) {
      case Op::Const:
        r = Rational(0);
        break;
      case Op::Var:
        r = Rational(1);
        break;
      case Op::Sum: {
        r = deg(n->kids[0]);
        for (std::size_t i = 1; r && i < n->kids.size(); ++i) {
          auto di = deg(n->kids[i]);
          if (!di || *di != *r) r.reset();
        }
        break;
      }
      case Op::Prod: {
        r = Rational(0);
        for (const Node* k : n->kids) {
          auto dk = deg(k);
          if (!dk) {
            r.reset();
            break;
          }
          *r += *dk;
        }
        break;
      }
      case Op::Quot: {
        auto a = deg(n->kids[0]), b = deg(n->kids[1]);
        if (a && b) r = *a - *b;
        break;
      }
      case Op::Sqrt: {
        auto a = deg(n->kids[0]);
        if (a) r = *a / 2;
        break;
      }
      case Op::Pow: {
        auto a = deg(n->kids[0]);
        if (a) r = *a * n->k;
        break;
      }
    }
    memo.emplace(n, r);
    return r;
  };
  return deg(e.node());
}

namespace {

Ival eval_ival_simple(const Node* n, const std::map<std::string, RationalInterval>& dom,
                      std::unordered_map<const Node*, Ival>& memo) {
  auto it = memo.find(n);
  if (it != memo.end()) return it->second;
  Ival r;
  switch (n->op) {
    case Op::Const:
      r = Ival::of(n->c);
      break;
    case Op::Var: {
      auto d = dom.find(var_name(n->var));
      if (d == dom.end()) throw std::out_of_range("unbound variable " + var_name(n->var));
      r = Ival::of(d->second);
      break;
    }
    case Op::Sum:
      r = Ival(0.0);
      for (const Node* k : n->kids) r = r + eval_ival_simple(k, dom, memo);
      break;
    case Op::Prod:
      r = Ival(1.0);
      for (const Node* k : n->kids) r = r * eval_ival_simple(k, dom, memo);
      break;
    case Op::Quot:
      r = eval_ival_simple(n->kids[0], dom, memo) / eval_ival_simple(n->kids[1], dom, memo);
      break;
    case Op::Sqrt:
      r = isqrt_iv(eval_ival_simple(n->kids[0], dom, memo));
      break;
    case Op::Pow:
      r = ipow_iv(eval_ival_simple(n->kids[0], dom, memo), n->k);
      break;
  }
  memo.emplace(n, r);
  return r;
}

}  // namespace

namespace {

struct TooLarge {};

std::vector<Expr> terms_of(const Expr& e) {
  std::vector<Expr> t;
  if (e.op() == Op::Sum) {
    for (std::size_t i = 0; i < e.nkids(); ++i) t.push_back(e.kid(i));
  } else {
    t.push_back(e);
  }
  return t;
}

Expr mul_expanded(const Expr& a, const Expr& b, std::size_t max_terms) {
  std::vector<Expr> ta = terms_of(a), tb = terms_of(b);
  if (ta.size() * tb.size() > max_terms) throw TooLarge{};
  std::vector<Expr> out;
  out.reserve(ta.size() * tb.size());
  for (const Expr& x : ta)
    for (const Expr& y : tb) out.push_back(x * y);
  return Expr::sum(out);
}

Expr expand_once(const Expr& e, std::size_t max_terms, std::unordered_map<const Node*, Expr>& memo) {
  if (auto it = memo.find(e.node()); it != memo.end()) return it->second;
  Expr r = e;
  switch (e.op()) {
    case Op::Const:
    case Op::Var:
    case Op::Sqrt:
      break;
    case Op::Sum: {
      std::vector<Expr> ks;
      for (std::size_t i = 0; i < e.nkids(); ++i) ks.push_back(expand_once(e.kid(i), max_terms, memo));
      r = Expr::sum(ks);
      break;
    }
    case Op::Prod:
    case Op::Quot:
    case Op::Pow: {
      Mono m = mono_of(e.node());
      Mono rest;
      rest.coef = m.coef;
      Expr acc = Expr::constant(1);
      for (auto& [b, ex] : m.f) {
        if (b->op == Op::Sum && sgn(ex) > 0) {
          BigInt k = floor_q(ex);
          if (Rational(k) != ex) rest.f[b] = ex - Rational(k);
          Expr be = expand_once(Expr(b), max_terms, memo);
          for (BigInt i = 0; i < k; ++i) acc = mul_expanded(acc, be, max_terms);
        } else {
          rest.f[b] = ex;
        }
      }
      r = mul_expanded(acc, build(rest), max_terms);
      break;
    }
  }
  memo.emplace(e.node(), r);
  return r;
}

}  // namespace

Expr expand(const Expr& e, std::size_t max_terms) {
  Expr cur = e;
  try {
    for (int it = 0; it < 6; ++it) {
      std::unordered_map<const Node*, Expr> memo;
      Expr next = expand_once(cur, max_terms, memo);
      if (next == cur) break;
      cur = next;
    }
  } catch (const TooLarge&) {
    return e;
  }
  return cur;
}

// c with a = c*b, for sums a and b whose terms match up to one common factor.
std::optional<Rational> proportional(const Node* a, const Node* b) {
  std::optional<Rational> c;
  for (const Node* ta : a->kids) {
    Mono ma = mono_of(ta);
    bool hit = false;
    for (const Node* tb : b->kids) {
      Mono mb = mono_of(tb);
      if (mb.f != ma.f) continue;
      Rational r = ma.coef / mb.coef;
      if (c && *c != r) return std::nullopt;
      c = r;
      hit = true;
      break;
    }
    if (!hit) return std::nullopt;
  }
  return c;
}

Expr together(const Expr& e, std::size_t max_terms) {
  Expr x = expand(e, max_terms);
  if (x.op() != Op::Sum) return x;
  std::vector<Mono> ms;
  Mono den;  // common denominator as a mono with positive exponents
  for (std::size_t i = 0; i < x.nkids(); ++i) {
    Mono m = mono_of(x.kid(i).node());
    for (auto& [b, ex] : m.f)
      if (sgn(ex) < 0) {
        Rational& d = den.f[b];
        if (-ex > d) d = -ex;
      }
    ms.push_back(std::move(m));
  }
  if (den.f.empty()) return x;
  std::vector<Expr> terms;
  for (Mono& m : ms) {
    mul_into(m, den, Rational(1));
    normalize(m);
    terms.push_back(build(m));
  }
  Expr num = expand(Expr::sum(terms), max_terms);
  // A numerator proportional to a sum in the denominator cancels against it.
  if (num.op() == Op::Sum)
    for (auto& [b, ex] : den.f) {
      if (b->op != Op::Sum || b->kids.size() != num.nkids()) continue;
      std::optional<Rational> c = proportional(num.node(), b);
      if (!c) continue;
      Mono q = den;
      q.f[b] -= 1;
      normalize(q);
      return Expr::constant(*c) / build(q);
    }
  return Expr::quot(num, build(den));
}

Expr simplify(const Expr& e, const std::map<std::string, RationalInterval>& domain) {
  std::unordered_map<const Node*, Ival> ivmemo;
  std::unordered_map<const Node*, bool> nonneg_memo;
  auto nonneg = [&](const Node* n) -> bool {
    auto it = nonneg_memo.find(n);
    if (it != nonneg_memo.end()) return it->second;
    bool r = false;
    try {
      r = eval_ival_simple(n, domain, ivmemo).lo >= 0;
    } catch (const std::exception&) {
      r = false;
    }
    nonneg_memo.emplace(n, r);
    return r;
  };
  std::unordered_map<const Node*, Expr> memo;
  std::function<Expr(const Node*)> go = [&](const Node* n) -> Expr {
    if (n->op == Op::Const || n->op == Op::Var) return Expr(n);
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    std::vector<Expr> ks;
    for (const Node* k : n->kids) ks.push_back(go(k));
    Expr r;
    switch (n->op) {
      case Op::Sum:
        r = Expr::sum(ks);
        break;
      case Op::Prod:
        r = Expr::prod(ks);
        break;
      case Op::Quot:
        r = Expr::quot(ks[0], ks[1]);
        break;
      case Op::Pow:
        r = Expr::pow(ks[0], n->k);
        break;
      case Op::Sqrt: {
        r = Expr::sqrt(ks[0]);
        if (r.op() == Op::Sqrt && r.kid(0) == ks[0] && !ks[0].is_const()) {
          Mono m = mono_of(ks[0].node());
          bool ok = sgn(m.coef) > 0;
          Mono out;
          if (ok) {
            Rational root;
            if (exact_sqrt(m.coef, root)) out.coef = root;
            else out.f[raw_const(m.coef)] = Rational(1, 2);
          }
          for (auto& [b, ex] : m.f) {
            if (!ok) break;
            if (ex.get_den() != 1 || b->op == Op::Sqrt) {
              ok = false;
              break;
            }
            if (!nonneg(b)) ok = false;
            out.f[b] = ex / 2;
          }
          if (ok) {
            normalize(out);
            r = build(out);
          }
        }
        break;
      }
      default:
        r = Expr(n);
    }
    memo.emplace(n, r);
    return r;
  };
  return go(e.node());
}

}  // namespace fpbound
