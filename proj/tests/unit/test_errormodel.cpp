#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fpbound/errormodel.hpp"
#include "fpbound/poly.hpp"

using namespace fpbound;

namespace {
std::string prog_path(const std::string& n) { return std::string(FPBOUND_PROGRAMS_DIR) + "/" + n + ".fp"; }

std::vector<ModelKind> kinds(const AnalysisSystem& s) {
  std::vector<ModelKind> k;
  for (const auto& a : s.steps) k.push_back(a.model.kind);
  return k;
}

Program with_alpha(const std::string& name, const std::string& lo, const std::string& hi) {
  std::ifstream f(prog_path(name));
  std::stringstream ss;
  ss << f.rdbuf();
  std::string t = ss.str();
  auto p = t.find("input alpha in [");
  auto e = t.find(']', p);
  t.replace(p, e - p + 1, "input alpha in [" + lo + ", " + hi + "]");
  return parse_program(t, name);
}

// Objective evaluated at a point of the full box.
RationalInterval objective_at(const AnalysisSystem& s, const Box& pt) { return interval_eval(s.objective, pt, 128); }
}  // namespace

TEST_CASE("algorithm 1 uses relative models only") {
  AnalysisSystem s = analyze_steps(load_program(prog_path("algo1")));
  CHECK(kinds(s) == std::vector<ModelKind>{ModelKind::RelativeDK, ModelKind::RelativeDK, ModelKind::RelativeDK,
                                           ModelKind::RelativeSqrt});
  CHECK(s.eps.size() == 4);
  CHECK(s.u_max == Rational(1, 4));
  // objective vanishes with every error variable at 0
  Box pt{{"x", RationalInterval(Rational(3))}, {"y", RationalInterval(Rational(5))}, {"u", RationalInterval(Rational(1, 8))}};
  for (const auto& e : s.eps) pt[e] = RationalInterval(Rational(0));
  RationalInterval r = objective_at(s, pt);
  CHECK(r.contains(0));
  CHECK(r.width() < pow2(-100));
  // all errors maximal: (1+u/(1+u)) * (1+b_sqrt(u)*u) - 1
  for (const auto& e : s.eps) pt[e] = RationalInterval(Rational(1));
  Rational uu(1, 8);
  Rational dk = uu / (1 + uu);
  RationalInterval w = RationalInterval(Rational(1 + 2 * uu)).sqrt(128);
  RationalInterval want = RationalInterval(Rational(1 + dk)) *
                              (RationalInterval(Rational(1)) + RationalInterval(Rational(2 * uu)) / (RationalInterval(Rational(1 + 2 * uu)) + w)) -
                          RationalInterval(Rational(1));
  RationalInterval got = objective_at(s, pt);
  CHECK(abs(got.mid() - want.mid()) < pow2(-80));
}

TEST_CASE("algorithm 2 models") {
  AnalysisSystem s = analyze_steps(load_program(prog_path("algo2")));
  CHECK(kinds(s) == std::vector<ModelKind>{ModelKind::RelativeDiv, ModelKind::Absolute, ModelKind::Absolute,
                                           ModelKind::RelativeDK});
  CHECK(s.step("t").model.ell == 0);
  CHECK(s.step("s").model.ell == 0);
  CHECK(s.step("r").model.bound == Expr::var("u") * (1 - 2 * Expr::var("u")));
  CHECK(s.step("t").range == RationalInterval(Rational(1), Rational(2)));
  // objective does not depend on the scale input after simplification
  CHECK(!s.objective.depends_on("x"));
  // strict mode doubles the absolute coefficient
  AnalysisOptions o;
  o.strict_paper_absolute = true;
  AnalysisSystem st = analyze_steps(load_program(prog_path("algo2")), o);
  CHECK(st.step("t").model.bound == 2 * Expr::var("u"));
  CHECK(st.eps_slope.at("eps_t") == RationalInterval(Rational(2)));
}

TEST_CASE("Sterbenz, constants and annotations") {
  Program p = with_alpha("algo5_path2_split1", "1/2", "1");
  AnalysisSystem s = analyze_steps(p);
  CHECK(s.step("delta").model.kind == ModelKind::Exact);
  CHECK(s.step("tr2").model.kind == ModelKind::Exact);
  CHECK(s.step("sqrt2").model.kind == ModelKind::Absolute);
  CHECK(s.step("sqrt2").model.ell == 0);
  CHECK(s.step("Pl").model.kind == ModelKind::CustomAbsolute);
  CHECK(s.step("d").model.kind == ModelKind::CustomAbsolute);
  CHECK(s.eps_slope.at("eps_Pl") == RationalInterval(Rational(0)));
  CHECK(s.eps_slope.at("eps_d") == RationalInterval(Rational(2)));
  // outside Sterbenz range the subtraction is rounded
  Program q = with_alpha("algo5_path2_split1", "1/4", "1");
  CHECK(analyze_steps(q).step("delta").model.kind != ModelKind::Exact);
}

TEST_CASE("forced absolute model picks the covering binade") {
  AnalysisSystem s = analyze_steps(load_program(prog_path("algo3_left_abs")));
  CHECK(s.step("r").model.kind == ModelKind::Absolute);
  CHECK(s.step("r").model.ell == -2);
  CHECK(s.step("c").model.kind == ModelKind::CustomAbsolute);
  CHECK(s.step("epsilon").model.kind == ModelKind::Exact);
}

TEST_CASE("split suggestions") {
  auto a3 = suggest_splits(analyze_steps(load_program(prog_path("algo3"))));
  REQUIRE(a3.size() == 1);
  CHECK(a3[0].step == "r");
  CHECK(a3[0].boundary == Rational(1, 2));
  REQUIRE(a3[0].input);
  CHECK(*a3[0].input == "alpha");
  CHECK(*a3[0].point == Rational(1, 2));
  CHECK(suggest_splits(analyze_steps(load_program(prog_path("algo1")))).empty());
  auto a5 = suggest_splits(analyze_steps(with_alpha("algo5_path2_split1", "1/2", "1")));
  bool found = false;
  for (const auto& sp : a5)
    if (sp.step == "r2" && sp.point && *sp.point == Rational(2, 3)) found = true;
  CHECK(found);
}

TEST_CASE("sqrt bound forms agree") {
  Expr u = Expr::var("u");
  Expr b = sqrt_bound_fn();
  Expr residual = u * (1 + 2 * u) * b * b - 2 * (1 + 2 * u) * b + 2;
  for (int k = 4; k <= 60; ++k) {
    Box pt{{"u", RationalInterval(pow2(-k))}};
    RationalInterval lhs = interval_eval(u * b, pt, 200);
    RationalInterval rhs = interval_eval(1 - 1 / Expr::sqrt(1 + 2 * u), pt, 200);
    CHECK(abs(lhs.mid() - rhs.mid()) <= pow2(-60) * pow2(-k));
    CHECK(abs(interval_eval(residual, pt, 200).mid()) <= pow2(-60));
    CHECK(interval_eval(sqrt_rel_bound() - u * b, pt, 200).contains(0));
  }
}

TEST_CASE("json dump names every step") {
  AnalysisSystem s = analyze_steps(load_program(prog_path("algo2")));
  std::string j = system_json(s);
  for (const char* n : {"\"r\"", "\"t\"", "\"s\"", "\"rho\"", "RelativeDiv", "Absolute"}) CHECK(j.find(n) != std::string::npos);
}

TEST_CASE("proven_nonnegative") {
  Expr x = Expr::var("x"), a = Expr::var("a");
  Box b{{"x", RationalInterval(Rational(0), Rational(4))}, {"a", RationalInterval(Rational(1, 2), Rational(1))}};
  CHECK(proven_nonnegative(x * (2 * a - 1), b));
  CHECK(!proven_nonnegative(x * (3 * a - 2), b));
  CHECK(proven_nonnegative(a * a - a / 2, b));
}
