#include "fpbound/program.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fpbound {

const char* to_string(Annotation a) {
  switch (a) {
    case Annotation::Default:
      return "default";
    case Annotation::Exact:
      return "exact";
    case Annotation::ForceAbsolute:
      return "absolute";
    case Annotation::CustomAbsolute:
      return "abserr";
    case Annotation::CustomRelative:
      return "relerr";
  }
  return "?";
}

namespace {

const std::set<std::string> kKeywords = {"input", "in", "umax", "target", "rn", "sqrt", "exact",
                                         "absolute", "abserr", "relerr", "u"};

struct Token {
  enum Kind { Ident, Number, Sym, End } kind = End;
  std::string text;
  int col = 0;
};

std::vector<Token> lex(const std::string& line, int lineno) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char ch = line[i];
    if (ch == '#') break;
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
      continue;
    }
    Token t;
    t.col = static_cast<int>(i) + 1;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < line.size() && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_')) ++j;
      t.kind = Token::Ident;
      t.text = line.substr(i, j - i);
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(ch))) {
      std::size_t j = i;
      while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      if (j < line.size() && line[j] == '.') {
        ++j;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      }
      t.kind = Token::Number;
      t.text = line.substr(i, j - i);
      i = j;
    } else if (std::string("()[],+-*/^=").find(ch) != std::string::npos) {
      t.kind = Token::Sym;
      t.text = std::string(1, ch);
      ++i;
    } else {
      throw SyntaxError(std::string("unexpected character '") + ch + "'", lineno, static_cast<int>(i) + 1);
    }
    out.push_back(t);
  }
  Token end;
  end.col = static_cast<int>(line.size()) + 1;
  out.push_back(end);
  return out;
}

Rational decimal_value(const std::string& s) {
  auto dot = s.find('.');
  if (dot == std::string::npos) return Rational(BigInt(s, 10));
  std::string frac = s.substr(dot + 1);
  BigInt num(s.substr(0, dot) + frac, 10);
  BigInt den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  Rational r(num, den);
  r.canonicalize();
  return r;
}

// Name lookup policy for one expression.
struct Scope {
  std::set<std::string> visible;
  std::unordered_map<std::string, int> later;  // defined on a later line
  bool allow_u = false;
};

class ExprParser {
 public:
  ExprParser(const std::vector<Token>& t, std::size_t pos, int line, const Scope& scope)
      : t_(t), p_(pos), line_(line), scope_(scope) {}

  Expr parse_expr() {
    Expr e = term();
    while (is("+") || is("-")) {
      bool plus = is("+");
      ++p_;
      Expr r = term();
      e = plus ? e + r : e - r;
    }
    return e;
  }

  std::size_t pos() const { return p_; }

 private:
  bool is(const char* s) const { return t_[p_].kind == Token::Sym && t_[p_].text == s; }
  void expect(const char* s) {
    if (!is(s)) throw SyntaxError(std::string("expected '") + s + "'", line_, t_[p_].col);
    ++p_;
  }

  Expr term() {
    Expr e = unary();
    while (is("*") || is("/")) {
      bool mul = is("*");
      int col = t_[p_].col;
      ++p_;
      Expr r = unary();
      if (mul) {
        e = e * r;
      } else {
        if (r.is_const(0)) throw SyntaxError("division by zero", line_, col);
        e = e / r;
      }
    }
    return e;
  }

  Expr unary() {
    if (is("-")) {
      ++p_;
      return -unary();
    }
    if (is("+")) {
      ++p_;
      return unary();
    }
    return power();
  }

  Expr power() {
    Expr b = primary();
    if (is("^")) {
      int col = t_[p_].col;
      ++p_;
      bool neg = false;
      if (is("-")) {
        neg = true;
        ++p_;
      }
      if (t_[p_].kind != Token::Number || t_[p_].text.find('.') != std::string::npos)
        throw SyntaxError("exponent must be an integer literal", line_, t_[p_].col);
      if (t_[p_].text.size() > 6) throw SyntaxError("exponent too large", line_, col);
      long k = std::stol(t_[p_].text);
      ++p_;
      if (neg) k = -k;
      if (k > 4096 || k < -4096) throw SyntaxError("exponent too large", line_, col);
      if (b.is_const()) {
        if (b.value() == 0 && k < 0) throw SyntaxError("division by zero", line_, col);
        Rational r(1);
        Rational base = k >= 0 ? b.value() : Rational(1) / b.value();
        for (long i = 0; i < std::labs(k); ++i) r *= base;
        return Expr::constant(r);
      }
      if (k < 0) return Expr::constant(1) / Expr::pow(b, static_cast<int>(-k));
      return Expr::pow(b, static_cast<int>(k));
    }
    return b;
  }

  Expr primary() {
    const Token& t = t_[p_];
    if (t.kind == Token::Number) {
      ++p_;
      return Expr::constant(decimal_value(t.text));
    }
    if (t.kind == Token::Sym && t.text == "(") {
      ++p_;
      Expr e = parse_expr();
      expect(")");
      return e;
    }
    if (t.kind == Token::Ident) {
      if (t.text == "sqrt") {
        ++p_;
        expect("(");
        Expr e = parse_expr();
        expect(")");
        if (e.is_const() && sgn(e.value()) < 0) throw SyntaxError("sqrt of a negative constant", line_, t.col);
        return Expr::sqrt(e);
      }
      if (t.text == kUnitVar) {
        if (!scope_.allow_u) throw UndefinedVariable("'u' is only allowed in error bounds", line_, t.col);
        ++p_;
        return Expr::var(kUnitVar);
      }
      if (kKeywords.count(t.text)) throw SyntaxError("unexpected keyword '" + t.text + "'", line_, t.col);
      if (!scope_.visible.count(t.text)) {
        auto it = scope_.later.find(t.text);
        if (it != scope_.later.end())
          throw NonTriangularProgram("'" + t.text + "' is defined later, on line " + std::to_string(it->second),
                                     line_, t.col);
        throw UndefinedVariable("'" + t.text + "' is not defined", line_, t.col);
      }
      ++p_;
      return Expr::var(t.text);
    }
    throw SyntaxError(t.kind == Token::End ? "unexpected end of line" : "unexpected '" + t.text + "'", line_, t.col);
  }

  const std::vector<Token>& t_;
  std::size_t p_;
  int line_;
  const Scope& scope_;
};

bool only_inputs(const Expr& e, const std::set<std::string>& inputs) {
  for (const auto& v : e.free_vars())
    if (!inputs.count(v)) return false;
  return true;
}

}  // namespace

Box Program::input_box() const {
  Box b;
  for (const auto& in : inputs)
    if (!in.exact_relation) b[in.name] = in.range;
  return b;
}

Expr Program::resolve_relations(const Expr& e) const {
  Expr r = e;
  for (auto it = inputs.rbegin(); it != inputs.rend(); ++it)
    if (it->exact_relation) r = substitute(r, {{it->name, *it->exact_relation}});
  return r;
}

std::map<std::string, Expr> Program::exact_values() const {
  std::map<std::string, Expr> sub, out;
  for (const auto& in : inputs)
    if (in.exact_relation) sub[in.name] = resolve_relations(*in.exact_relation);
  for (const auto& s : steps) {
    Expr v = substitute(s.rhs, sub);
    sub[s.lhs] = v;
    out[s.lhs] = v;
  }
  return out;
}

Program parse_program(const std::string& text, const std::string& name) {
  Program p;
  p.name = name;
  std::vector<std::string> lines;
  {
    std::istringstream is(text);
    std::string l;
    while (std::getline(is, l)) lines.push_back(l);
  }
  std::vector<std::vector<Token>> toks;
  std::unordered_map<std::string, int> defined_at;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    int ln = static_cast<int>(i) + 1;
    toks.push_back(lex(lines[i], ln));
    const auto& t = toks.back();
    std::string def;
    if (t[0].kind == Token::Ident && t[0].text == "input" && t[1].kind == Token::Ident) def = t[1].text;
    else if (t[0].kind == Token::Ident && t[1].kind == Token::Sym && t[1].text == "=") def = t[0].text;
    if (!def.empty() && !defined_at.count(def)) defined_at[def] = ln;
  }

  Scope scope;
  std::set<std::string> input_names;
  bool have_umax = false, have_target = false;
  Box box;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    int ln = static_cast<int>(i) + 1;
    const auto& t = toks[i];
    if (t[0].kind == Token::End) continue;
    scope.later.clear();
    for (auto& [n, l] : defined_at)
      if (l > ln) scope.later[n] = l;
    auto need_end = [&](std::size_t pos) {
      if (t[pos].kind != Token::End) throw SyntaxError("unexpected '" + t[pos].text + "'", ln, t[pos].col);
    };
    auto const_expr = [&](std::size_t& pos) {
      Scope none;
      ExprParser ep(t, pos, ln, none);
      int col = t[pos].col;
      Expr e = ep.parse_expr();
      pos = ep.pos();
      if (!e.is_const()) throw SyntaxError("expected a rational constant", ln, col);
      return e.value();
    };
    auto check_new = [&](const Token& nt) {
      if (nt.kind != Token::Ident) throw SyntaxError("expected a variable name", ln, nt.col);
      if (kKeywords.count(nt.text)) throw SyntaxError("'" + nt.text + "' is reserved", ln, nt.col);
      if (scope.visible.count(nt.text)) throw SyntaxError("'" + nt.text + "' is already defined", ln, nt.col);
    };
    const Token& head = t[0];
    if (head.kind == Token::Ident && head.text == "input") {
      check_new(t[1]);
      if (!(t[2].kind == Token::Ident && t[2].text == "in")) throw SyntaxError("expected 'in'", ln, t[2].col);
      if (!(t[3].kind == Token::Sym && t[3].text == "[")) throw SyntaxError("expected '['", ln, t[3].col);
      std::size_t pos = 4;
      Rational lo = const_expr(pos);
      if (!(t[pos].kind == Token::Sym && t[pos].text == ","))
        throw SyntaxError("expected ','", ln, t[pos].col);
      ++pos;
      Rational hi = const_expr(pos);
      if (!(t[pos].kind == Token::Sym && t[pos].text == "]"))
        throw SyntaxError("expected ']'", ln, t[pos].col);
      need_end(pos + 1);
      if (lo > hi) throw EmptyRange("range of '" + t[1].text + "' is empty", ln, t[3].col);
      if (!p.steps.empty()) throw SyntaxError("inputs must precede steps", ln, head.col);
      InputDecl d;
      d.name = t[1].text;
      d.range = RationalInterval(lo, hi);
      d.line = ln;
      p.inputs.push_back(d);
      box[d.name] = d.range;
      scope.visible.insert(d.name);
      input_names.insert(d.name);
      continue;
    }
    if (head.kind == Token::Ident && head.text == "umax") {
      if (have_umax) throw SyntaxError("umax given twice", ln, head.col);
      std::size_t pos = 1;
      Rational v = const_expr(pos);
      need_end(pos);
      if (sgn(v) <= 0 || v > Rational(1, 4)) throw SyntaxError("umax must lie in (0, 1/4]", ln, t[1].col);
      p.u_max = v;
      have_umax = true;
      continue;
    }
    if (head.kind == Token::Ident && head.text == "target") {
      if (have_target) throw SyntaxError("target given twice", ln, head.col);
      Scope ts;
      ts.visible = input_names;
      for (auto& [n, l] : defined_at)
        if (!input_names.count(n)) ts.later[n] = l;
      ExprParser ep(t, 1, ln, ts);
      p.target = ep.parse_expr();
      need_end(ep.pos());
      have_target = true;
      continue;
    }
    if (head.kind == Token::Ident && t[1].kind == Token::Sym && t[1].text == "=") {
      check_new(head);
      Step s;
      s.lhs = head.text;
      s.line = ln;
      std::size_t pos = 2;
      if (t[2].kind == Token::Ident && t[2].text == "rn") {
        if (!(t[3].kind == Token::Sym && t[3].text == "(")) throw SyntaxError("expected '('", ln, t[3].col);
        ExprParser ep(t, 4, ln, scope);
        s.rhs = ep.parse_expr();
        pos = ep.pos();
        if (!(t[pos].kind == Token::Sym && t[pos].text == ")")) throw SyntaxError("expected ')'", ln, t[pos].col);
        ++pos;
        s.rounded = true;
        if (t[pos].kind == Token::Ident) {
          const std::string& a = t[pos].text;
          if (a == "exact") {
            s.annotation = Annotation::Exact;
            ++pos;
          } else if (a == "absolute") {
            s.annotation = Annotation::ForceAbsolute;
            ++pos;
          } else if (a == "abserr" || a == "relerr") {
            s.annotation = a == "abserr" ? Annotation::CustomAbsolute : Annotation::CustomRelative;
            ++pos;
            if (!(t[pos].kind == Token::Sym && t[pos].text == "("))
              throw SyntaxError("expected '('", ln, t[pos].col);
            Scope us;
            us.allow_u = true;
            ExprParser bp(t, pos + 1, ln, us);
            s.bound = bp.parse_expr();
            pos = bp.pos();
            if (!(t[pos].kind == Token::Sym && t[pos].text == ")"))
              throw SyntaxError("expected ')'", ln, t[pos].col);
            ++pos;
          } else {
            throw SyntaxError("unknown annotation '" + a + "'", ln, t[pos].col);
          }
        }
        need_end(pos);
        if (s.annotation != Annotation::Exact && !match_shape(s.rhs))
          throw SyntaxError("rounded expression is not of the form a*b+c, a/b or sqrt(a)", ln, t[4].col);
      } else {
        ExprParser ep(t, 2, ln, scope);
        s.rhs = ep.parse_expr();
        pos = ep.pos();
        if (!(t[pos].kind == Token::Ident && t[pos].text == "exact"))
          throw SyntaxError("unrounded definitions must be marked 'exact'", ln, t[pos].col);
        need_end(pos + 1);
        s.rounded = false;
        s.annotation = Annotation::Exact;
        if (p.steps.empty() && only_inputs(s.rhs, input_names)) {
          InputDecl d;
          d.name = s.lhs;
          d.exact_relation = s.rhs;
          d.line = ln;
          try {
            d.range = interval_eval(p.resolve_relations(s.rhs), p.input_box());
          } catch (const std::runtime_error& e) {
            throw SyntaxError(std::string("cannot bound exact relation: ") + e.what(), ln, t[2].col);
          }
          p.inputs.push_back(d);
          scope.visible.insert(d.name);
          input_names.insert(d.name);
          continue;
        }
      }
      p.steps.push_back(s);
      scope.visible.insert(s.lhs);
      continue;
    }
    throw SyntaxError("unrecognized statement", ln, head.col);
  }
  int last = static_cast<int>(lines.size()) + 1;
  if (p.inputs.empty()) throw SyntaxError("program declares no inputs", last, 1);
  if (p.steps.empty()) throw SyntaxError("program has no rounded steps", last, 1);
  if (!have_target) throw SyntaxError("program has no target", last, 1);
  return p;
}

Program load_program(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  std::string name = path;
  auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  auto dot = name.rfind('.');
  if (dot != std::string::npos) name = name.substr(0, dot);
  return parse_program(ss.str(), name);
}

std::string print_program(const Program& p) {
  std::ostringstream os;
  if (!p.name.empty()) os << "# " << p.name << "\n";
  os << "umax " << p.u_max.get_str() << "\n";
  for (const auto& in : p.inputs)
    if (!in.exact_relation) os << "input " << in.name << " in [" << in.range.lo().get_str() << ", " << in.range.hi().get_str() << "]\n";
  for (const auto& in : p.inputs)
    if (in.exact_relation) os << in.name << " = " << in.exact_relation->str() << " exact\n";
  for (const auto& s : p.steps) {
    os << s.lhs << " = ";
    if (!s.rounded) {
      os << s.rhs.str() << " exact\n";
      continue;
    }
    os << "rn(" << s.rhs.str() << ")";
    switch (s.annotation) {
      case Annotation::Default:
        break;
      case Annotation::Exact:
        os << " exact";
        break;
      case Annotation::ForceAbsolute:
        os << " absolute";
        break;
      case Annotation::CustomAbsolute:
        os << " abserr(" << s.bound->str() << ")";
        break;
      case Annotation::CustomRelative:
        os << " relerr(" << s.bound->str() << ")";
        break;
    }
    os << "\n";
  }
  os << "target " << p.target.str() << "\n";
  return os.str();
}

namespace {

struct Term {
  Rational coef;
  std::vector<Expr> atoms;  // variable factors with multiplicity
  bool ok = true;
};

// Split a product into a constant coefficient and variable factors; any
// factor that is not a variable, a square of one, or a constant fails.
Term split_term(const Expr& e) {
  Term t;
  t.coef = 1;
  std::vector<Expr> fs;
  if (e.op() == Op::Prod) {
    for (std::size_t i = 0; i < e.nkids(); ++i) fs.push_back(e.kid(i));
  } else {
    fs.push_back(e);
  }
  for (const Expr& f : fs) {
    if (f.is_const()) {
      t.coef *= f.value();
    } else if (f.op() == Op::Var) {
      t.atoms.push_back(f);
    } else if (f.op() == Op::Pow && f.kid(0).op() == Op::Var && f.exponent() == 2) {
      t.atoms.push_back(f.kid(0));
      t.atoms.push_back(f.kid(0));
    } else if (f.free_vars().empty()) {
      t.atoms.push_back(f);  // irrational constant factor such as sqrt(2)
    } else {
      t.ok = false;
    }
  }
  return t;
}

// operand: a constant or a constant multiple of one variable
bool is_operand(const Expr& e) {
  if (e.free_vars().empty()) return true;
  Term t = split_term(e);
  if (!t.ok) return false;
  int vars = 0;
  for (const Expr& a : t.atoms)
    if (!a.free_vars().empty()) ++vars;
  return vars == 1;
}

}  // namespace

std::optional<Shape> match_shape(const Expr& rhs) {
  Shape s;
  if (rhs.free_vars().empty()) {
    s.kind = Shape::Const;
    s.a = rhs;
    return s;
  }
  if (rhs.op() == Op::Sqrt) {
    if (!is_operand(rhs.kid(0))) return std::nullopt;
    s.kind = Shape::Sqrt;
    s.a = rhs.kid(0);
    return s;
  }
  if (rhs.op() == Op::Quot) {
    if (!is_operand(rhs.kid(0)) || !is_operand(rhs.kid(1))) return std::nullopt;
    s.kind = Shape::Div;
    s.a = rhs.kid(0);
    s.b = rhs.kid(1);
    return s;
  }
  std::vector<Expr> terms;
  if (rhs.op() == Op::Sum) {
    for (std::size_t i = 0; i < rhs.nkids(); ++i) terms.push_back(rhs.kid(i));
  } else {
    terms.push_back(rhs);
  }
  std::vector<Expr> constant_terms, var_terms;
  for (const Expr& t : terms) (t.free_vars().empty() ? constant_terms : var_terms).push_back(t);
  Expr cpart = Expr::sum(constant_terms);
  std::size_t operands = var_terms.size() + (cpart.is_const(0) ? 0 : 1);
  if (operands > 2 || var_terms.empty()) return std::nullopt;
  // one term may be a product of two variables, the other must be an operand
  int product_idx = -1;
  for (std::size_t i = 0; i < var_terms.size(); ++i) {
    Term t = split_term(var_terms[i]);
    if (!t.ok) return std::nullopt;
    int vars = 0;
    for (const Expr& a : t.atoms)
      if (!a.free_vars().empty()) ++vars;
    if (vars > 2) return std::nullopt;
    if (vars == 2) {
      if (product_idx >= 0) return std::nullopt;
      product_idx = static_cast<int>(i);
    }
  }
  s.kind = Shape::Fma;
  Expr prod_term = var_terms[product_idx >= 0 ? static_cast<std::size_t>(product_idx) : 0];
  Expr rest = cpart;
  for (std::size_t i = 0; i < var_terms.size(); ++i)
    if (var_terms[i] != prod_term) rest = rest + var_terms[i];
  Term pt = split_term(prod_term);
  std::vector<Expr> vs;
  Expr coef = Expr::constant(pt.coef);
  for (const Expr& a : pt.atoms) {
    if (a.free_vars().empty()) coef = coef * a;
    else vs.push_back(a);
  }
  s.a = coef * vs[0];
  s.b = vs.size() > 1 ? vs[1] : Expr::constant(1);
  s.c = rest;
  return s;
}

std::vector<std::string> scale_inputs(const Program& p) {
  std::vector<std::string> cand;
  Box box = p.input_box();
  for (auto& [n, r] : box)
    if (sgn(r.lo()) >= 0 && sgn(r.hi()) > 0) cand.push_back(n);
  Expr target = p.resolve_relations(p.target);
  std::vector<std::string> best;
  std::size_t n = cand.size();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<std::string> sub;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) sub.push_back(cand[i]);
    if (sub.size() <= best.size()) continue;
    auto d = homogeneity_degree(target, sub);
    if (d && sgn(*d) != 0) best = sub;
  }
  return best;
}

namespace {

bool spans_binade(const RationalInterval& r) {
  if (r.contains_zero()) return !r.is_point();
  Rational lo = abs(r.lo()), hi = abs(r.hi());
  if (lo > hi) std::swap(lo, hi);
  return hi > pow2(floor_log2(lo) + 1);
}

}  // namespace

std::vector<Diagnostic> validate(const Program& p) {
  std::vector<Diagnostic> out;
  Box box = p.input_box();
  std::map<std::string, Expr> exact = p.exact_values();
  std::vector<std::string> scale = scale_inputs(p);
  std::map<std::string, Expr> sub = exact;
  for (const auto& in : p.inputs)
    if (in.exact_relation) sub[in.name] = p.resolve_relations(*in.exact_relation);
  for (const auto& s : p.steps) {
    auto warn = [&](const std::string& m) { out.push_back({Diagnostic::Warning, s.line, s.lhs, m}); };
    auto sh = match_shape(s.rhs);
    if (sh && (sh->kind == Shape::Div || sh->kind == Shape::Sqrt)) {
      Expr operand = substitute(sh->kind == Shape::Div ? sh->b : sh->a, sub);
      try {
        RationalInterval r = interval_eval(operand, box);
        if (sh->kind == Shape::Div && r.contains_zero())
          warn("denominator " + sh->b.str() + " may be 0 over the input ranges");
        if (sh->kind == Shape::Sqrt && sgn(r.lo()) < 0) warn("square root of " + sh->a.str() + " may be negative");
      } catch (const std::runtime_error& e) {
        warn(std::string("operand range could not be bounded: ") + e.what());
      }
    }
    if (!s.rounded || s.annotation != Annotation::Default) continue;
    const Expr& v = exact.at(s.lhs);
    if (!scale.empty()) {
      auto d = homogeneity_degree(v, scale);
      if (!d || sgn(*d) != 0) continue;
    }
    try {
      RationalInterval r = interval_eval(v, box);
      if (spans_binade(r)) warn("value range " + r.str() + " spans a binade boundary; a split may allow an absolute error model");
    } catch (const std::runtime_error&) {
    }
  }
  return out;
}

}  // namespace fpbound
