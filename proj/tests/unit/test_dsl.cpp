#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "fpbound/program.hpp"

using namespace fpbound;

namespace {
std::string prog_path(const std::string& n) { return std::string(FPBOUND_PROGRAMS_DIR) + "/" + n + ".fp"; }

bool has_warning(const std::vector<Diagnostic>& ds, const std::string& step, const std::string& needle) {
  for (const auto& d : ds)
    if (d.step == step && d.message.find(needle) != std::string::npos) return true;
  return false;
}
}  // namespace

TEST_CASE("bundled programs parse") {
  for (const auto& e : std::filesystem::directory_iterator(FPBOUND_PROGRAMS_DIR)) {
    CAPTURE(e.path().string());
    Program p = load_program(e.path().string());
    CHECK(!p.steps.empty());
  }
  Program a1 = load_program(prog_path("algo1"));
  CHECK(a1.steps.size() == 4);
  CHECK(a1.u_max == Rational(1, 4));
  CHECK(a1.target == Expr::sqrt(Expr::pow(Expr::var("x"), 2) + Expr::pow(Expr::var("y"), 2)));
  Program a2 = load_program(prog_path("algo2"));
  CHECK(a2.u_max == Rational(1, 64));
  REQUIRE(a2.inputs.size() == 3);
  CHECK(a2.inputs[2].exact_relation.has_value());
}

TEST_CASE("annotations are carried") {
  Program p = load_program(prog_path("algo3_right_c"));
  const Step* eps = nullptr;
  const Step* c = nullptr;
  for (const auto& s : p.steps) {
    if (s.lhs == "epsilon") eps = &s;
    if (s.lhs == "c") c = &s;
  }
  REQUIRE(eps);
  REQUIRE(c);
  CHECK(eps->annotation == Annotation::Exact);
  CHECK(c->annotation == Annotation::CustomAbsolute);
  CHECK(*c->bound == Expr::pow(Expr::var("u"), 2) / 2);
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(parse_program("input x in [0,1]\na = rn(x*b)\nb = rn(x*x)\ntarget x\n"), NonTriangularProgram);
  CHECK_THROWS_AS(parse_program("input x in [0,1]\na = rn(x*q)\ntarget x\n"), UndefinedVariable);
  CHECK_THROWS_AS(parse_program("input x in [2,1]\na = rn(x*x)\ntarget x\n"), EmptyRange);
  CHECK_THROWS_AS(parse_program("input x in [0,1]\na = rn(x*x*x)\ntarget x\n"), SyntaxError);
  CHECK_THROWS_AS(parse_program("input x in [0,1]\na = rn(x*x\ntarget x\n"), SyntaxError);
  CHECK_THROWS_AS(parse_program("umax 1/2\ninput x in [0,1]\na = rn(x*x)\ntarget x\n"), SyntaxError);
  try {
    parse_program("input x in [0,1]\na = rn(x * zz)\ntarget x\n");
    FAIL("expected an error");
  } catch (const UndefinedVariable& e) {
    CHECK(e.line == 2);
    CHECK(e.column == 12);
  }
}

TEST_CASE("validate diagnostics") {
  CHECK(validate(load_program(prog_path("algo1"))).empty());
  auto d2 = validate(load_program(prog_path("algo2")));
  CHECK(has_warning(d2, "r", "denominator x may be 0"));
  auto d3 = validate(load_program(prog_path("algo3")));
  CHECK(has_warning(d3, "r", "binade"));
  CHECK(!has_warning(d3, "t", "binade"));
}

TEST_CASE("shape matching") {
  Expr x = Expr::var("x"), y = Expr::var("y"), z = Expr::var("z");
  CHECK(match_shape(x * y + z)->kind == Shape::Fma);
  CHECK(match_shape(1 + x * x)->kind == Shape::Fma);
  CHECK(match_shape(x / (2 * y))->kind == Shape::Div);
  CHECK(match_shape(Expr::sqrt(x))->kind == Shape::Sqrt);
  CHECK(match_shape(Expr::sqrt(Expr::constant(2)))->kind == Shape::Const);
  CHECK(!match_shape(x * y * z));
  CHECK(!match_shape(x + y + z));
  CHECK(match_shape(1 + Expr::sqrt(Expr::constant(2)) - x)->kind == Shape::Fma);
}

TEST_CASE("print then parse is the identity on bundled programs") {
  for (const auto& e : std::filesystem::directory_iterator(FPBOUND_PROGRAMS_DIR)) {
    Program p = load_program(e.path().string());
    std::string once = print_program(p);
    Program q = parse_program(once, p.name);
    CAPTURE(once);
    CHECK(print_program(q) == once);
    REQUIRE(q.steps.size() == p.steps.size());
    for (std::size_t i = 0; i < p.steps.size(); ++i) {
      CHECK(q.steps[i].rhs == p.steps[i].rhs);
      CHECK(q.steps[i].annotation == p.steps[i].annotation);
    }
    CHECK(q.target == p.target);
  }
}

TEST_CASE("fuzzed sources either fail cleanly or give triangular programs") {
  std::string base;
  {
    Program p = load_program(prog_path("algo3"));
    base = print_program(p);
  }
  const std::string alphabet = "xyrtsc0123456789+-*/^()[],= \nrnsqrtexactinputumax";
  std::mt19937_64 rng(5);
  int parsed = 0;
  for (int it = 0; it < 3000; ++it) {
    std::string s = base;
    int edits = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < edits; ++k) {
      std::size_t pos = rng() % s.size();
      switch (rng() % 3) {
        case 0:
          s.erase(pos, 1);
          break;
        case 1:
          s.insert(pos, 1, alphabet[rng() % alphabet.size()]);
          break;
        default:
          s[pos] = alphabet[rng() % alphabet.size()];
      }
    }
    try {
      Program p = parse_program(s);
      ++parsed;
      std::set<std::string> seen;
      for (const auto& in : p.inputs) {
        for (const auto& v : in.exact_relation ? in.exact_relation->free_vars() : std::vector<std::string>{})
          CHECK(seen.count(v));
        seen.insert(in.name);
      }
      for (const auto& st : p.steps) {
        for (const auto& v : st.rhs.free_vars()) CHECK(seen.count(v));
        CHECK(!seen.count(st.lhs));
        seen.insert(st.lhs);
      }
      CHECK(p.u_max > 0);
      CHECK(p.u_max <= Rational(1, 4));
    } catch (const DslError&) {
    }
  }
  CHECK(parsed > 0);
}
