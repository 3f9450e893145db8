#include <random>
#include <set>

#include "doctest.h"
#include "fpbound/eval.hpp"
#include "fpbound/poly.hpp"

using namespace fpbound;

namespace {
Rational Q(long a, long b = 1) { return Rational(a, b); }
RationalInterval I(const Rational& a, const Rational& b) { return RationalInterval(a, b); }
}  // namespace

TEST_CASE("interval_eval errors") {
  Expr x = Expr::var("x");
  Box b{{"x", I(Q(-1), Q(1))}};
  CHECK_THROWS_AS(interval_eval(1 / x, b), DivisionByIntervalContainingZero);
  CHECK_THROWS_AS(interval_eval(Expr::sqrt(x), b), SqrtOfPossiblyNegative);
  CHECK(interval_eval(x * x + 1, b).contains(Q(1)));
}

TEST_CASE("sqrt enclosure width") {
  for (int bits : {20, 64, 200}) {
    RationalInterval r = RationalInterval(Q(2)).sqrt(bits);
    CHECK(r.width() / r.lo() <= pow2(-bits));
    CHECK(r.lo() * r.lo() <= 2);
    CHECK(r.hi() * r.hi() >= 2);
  }
  CHECK(RationalInterval(Q(9, 4)).sqrt(64).is_point());
}

TEST_CASE("inclusion monotonicity on random subboxes") {
  std::mt19937_64 rng(7);
  Expr x = Expr::var("x"), y = Expr::var("y");
  Expr e = Expr::sqrt(x * x + y * y) / (1 + x) - x * y / (2 + y * y);
  for (int t = 0; t < 200; ++t) {
    std::uniform_int_distribution<long> d(0, 1000);
    long a = d(rng), b = d(rng), c = d(rng), f = d(rng);
    if (a > b) std::swap(a, b);
    if (c > f) std::swap(c, f);
    Box outer{{"x", I(Q(a, 1000), Q(b, 1000))}, {"y", I(Q(c, 1000), Q(f, 1000))}};
    long a2 = a + (b - a) / 3, b2 = b - (b - a) / 4;
    Box inner{{"x", I(Q(a2, 1000), Q(b2, 1000))}, {"y", I(Q(c, 1000), Q(f, 1000))}};
    RationalInterval ro = interval_eval(e, outer), ri = interval_eval(e, inner);
    CHECK(ri.subset_of(ro));
  }
}

TEST_CASE("derivative agrees with central differences") {
  Expr u = Expr::var("u");
  Expr e = (1 + 3 * u - Expr::sqrt(1 + 2 * u)) / (1 + u);
  Expr d = differentiate(e, "u");
  for (long k : {1L, 3L, 7L}) {
    Rational u0 = Q(k, 16);
    for (int lg : {20, 24}) {
      Rational h = pow2(-lg);
      RationalInterval fp = interval_eval(e, {{"u", RationalInterval(Rational(u0 + h))}}, 100);
      RationalInterval fm = interval_eval(e, {{"u", RationalInterval(Rational(u0 - h))}}, 100);
      double cd = Rational((fp.mid() - fm.mid()) / (2 * h)).get_d();
      double an = interval_eval(d, {{"u", RationalInterval(u0)}}, 100).mid().get_d();
      CHECK(std::abs(cd - an) < 1e-6);
    }
  }
}

TEST_CASE("sturm examples") {
  CHECK(sturm_root_count(UPoly({Q(-2), Q(0), Q(1)}), Q(1), Q(2)) == 1);
  CHECK(sturm_root_count(UPoly({Q(4), Q(21), Q(32), Q(12), Q(-8)}), Q(0), Q(1, 2)) == 0);
  UPoly a({Q(1), Q(1)}), b({Q(1), Q(2)}), c({Q(-9), Q(-22), Q(-16), Q(1)});
  UPoly p = a * a * a * b * b * c;
  CHECK(sturm_root_count(p, Q(0), Q(1)) == 0);
  CHECK_THROWS_AS(sturm_root_count(UPoly(), Q(0), Q(1)), ZeroPolynomial);
  // endpoint roots: (t-1)(t-2) on (1,2] counts only 2
  UPoly e12({Q(2), Q(-3), Q(1)});
  CHECK(sturm_root_count(e12, Q(1), Q(2)) == 1);
  CHECK(sturm_root_count(e12 * e12, Q(0), Q(2)) == 2);
}

TEST_CASE("sturm counts agree with a sign grid on random polynomials") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<long> coef(-20, 20);
  std::uniform_int_distribution<int> deg(1, 6);
  for (int t = 0; t < 200; ++t) {
    // build from random rational roots so the true count is known
    int n = deg(rng);
    UPoly p({Q(coef(rng) == 0 ? 1 : 3)});
    std::set<Rational> roots;
    for (int i = 0; i < n; ++i) {
      Rational r = Q(coef(rng), 8);
      roots.insert(r);
      p = p * UPoly({-r, Q(1)});
    }
    Rational lo = Q(-1), hi = Q(1);
    int want = 0;
    for (auto& r : roots)
      if (r > lo && r <= hi) ++want;
    CHECK(sturm_root_count(p, lo, hi) == want);
    // and against sign changes on a fine grid for squarefree parts
    UPoly q = p;
    int changes = 0;
    int last = sgn(q(Q(-1)));
    for (int k = -1023; k <= 1024; ++k) {
      int s = sgn(q(Q(k, 1024) + Q(1, 4096)));
      if (s != 0 && last != 0 && s != last) ++changes;
      if (s != 0) last = s;
    }
    CHECK(changes <= want);
  }
}

TEST_CASE("sign_on_box") {
  Expr x = Expr::var("x"), y = Expr::var("y");
  Box b{{"x", I(Q(0), Q(1))}, {"y", I(Q(1, 2), Q(2))}};
  CHECK(sign_on_box(x * x - x * y + y * y, b) == Sign::Positive);
  CHECK(sign_on_box(x - 2 * y - Expr::constant(Q(1, 100)), b) == Sign::Negative);
  CHECK(sign_on_box(x - y, b) == Sign::Unknown);
}

TEST_CASE("sign_on_box is sound on samples") {
  std::mt19937_64 rng(3);
  Expr x = Expr::var("x"), y = Expr::var("y");
  std::vector<Expr> es{x * x - 2 * x * y + y * y + Expr::constant(Q(1, 1000)), Expr::sqrt(x + y) - x,
                       (x - y) / (1 + x * y), Expr::pow(x - y, 2) + Expr::constant(Q(1, 1000)),
                       x * y - 2 - x};
  int decided = 0;
  Box b{{"x", I(Q(0), Q(1))}, {"y", I(Q(0), Q(1))}};
  std::uniform_int_distribution<long> d(0, 1 << 20);
  for (const Expr& e : es) {
    SignOptions so;
    so.max_boxes = 20000;
    Sign s = sign_on_box(e, b, so);
    if (s == Sign::Unknown) continue;
    ++decided;
    for (int i = 0; i < 10000; ++i) {
      Box p{{"x", RationalInterval(Q(d(rng), 1 << 20))}, {"y", RationalInterval(Q(d(rng), 1 << 20))}};
      RationalInterval v = interval_eval(e, p, 80);
      if (s == Sign::Positive) CHECK(sgn(v.hi()) > 0);
      if (s == Sign::Negative) CHECK(sgn(v.lo()) < 0);
    }
  }
  CHECK(decided >= 2);
}

TEST_CASE("series_at_zero examples") {
  Expr u = Expr::var("u");
  auto s1 = series_at_zero((1 + 3 * u - Expr::sqrt(1 + 2 * u)) / (1 + u), "u", 2);
  REQUIRE(s1.size() == 3);
  CHECK(s1[0].exact);
  CHECK(s1[0].value == 0);
  CHECK(s1[1].value == 2);
  CHECK(s1[2].value == Q(-3, 2));
  CHECK_THROWS_AS(series_at_zero(1 / u, "u", 2), NotSmoothAtZero);
  CHECK_THROWS_AS(series_at_zero(Expr::sqrt(u), "u", 2), NotSmoothAtZero);
  auto s2 = series_at_zero(Expr::sqrt(2 + u), "u", 1);
  CHECK(!s2[0].exact);
  CHECK(s2[0].enclosure.width() <= pow2(-60));
  CHECK(std::abs(s2[0].approx() - std::sqrt(2.0)) < 1e-15);
}

TEST_CASE("double intervals enclose exact results and stay exact when possible") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-4, 4);
  std::uniform_int_distribution<int> ex(-1070, 60);
  for (int i = 0; i < 20000; ++i) {
    double a = std::ldexp(d(rng), i % 3 == 0 ? ex(rng) : 0), b = std::ldexp(d(rng), i % 5 == 0 ? ex(rng) : 0);
    Rational qa(a), qb(b);
    Ival A(a), B(b);
    CHECK(Ival::of(RationalInterval(qa + qb)).lo >= (A + B).lo);
    Ival s = A + B, p = A * B;
    CHECK(Rational(s.lo) <= qa + qb);
    CHECK(Rational(s.hi) >= qa + qb);
    if (!std::isfinite(p.hi) || !std::isfinite(p.lo)) continue;
    CHECK(Rational(p.lo) <= qa * qb);
    CHECK(Rational(p.hi) >= qa * qb);
    if (b != 0 && std::isfinite(a / b)) {
      Ival q = A / B;
      CHECK(Rational(q.lo) <= qa / qb);
      CHECK(Rational(q.hi) >= qa / qb);
    }
    if (a >= 0) {
      Ival r = isqrt_iv(A);
      CHECK(Rational(r.lo) * Rational(r.lo) <= qa);
      CHECK(Rational(r.hi) * Rational(r.hi) >= qa);
    }
  }
  CHECK((Ival(0.0) + Ival(0.0)).lo == 0.0);
  CHECK((Ival(0.0, 10.0) * Ival(0.0, 10.0) + Ival(0.0, 10.0)).lo == 0.0);
  CHECK((Ival(1.0) + Ival(2.0)).is_point());
  CHECK(isqrt_iv(Ival(4.0)).is_point());
}
