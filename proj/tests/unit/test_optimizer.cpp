#include <cmath>

#include "doctest.h"
#include "fpbound/optimizer.hpp"

using namespace fpbound;

namespace {

std::string prog_path(const std::string& n) { return std::string(FPBOUND_PROGRAMS_DIR) + "/" + n + ".fp"; }

AnalysisSystem system_for(const std::string& name, std::optional<Rational> umax = {}) {
  AnalysisOptions ao;
  ao.u_max = umax;
  return analyze_steps(load_program(prog_path(name)), ao);
}

// E(y, u) for the naive algorithm; beta is its root at u = u_max.
double e_naive(double y, double u) {
  return u * u * (1 + u) * (1 + u) * y * y - 2 * (1 - u * u) * (1 + 2 * u) * y + (1 + 2 * u) * (2 * u - 3);
}

// E(y, u) for the scaled algorithm.
double e_scaled(double y, double u) {
  return 4 * u * u * (1 + u) * (1 + u) * y * y + 4 * (1 + u) * (u * u + 5 * u + 2) * y + u * u - 6 * u - 3;
}

// Root of E(., u) in [lo, hi] by bisection; E changes sign there.
template <class F>
double root(F f, double u, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    double m = (lo + hi) / 2;
    ((f(lo, u) < 0) == (f(m, u) < 0) ? lo : hi) = m;
  }
  return (lo + hi) / 2;
}

}  // namespace

TEST_CASE("naive algorithm: exact alpha and the quadratic root") {
  AnalysisSystem s = system_for("algo1");
  CHECK(pinned_alpha(s) == Rational(2));
  BoundResult r = compute_bound(s);
  CHECK(r.alpha.lo() == 2);
  CHECK(r.alpha.hi() == 2);
  REQUIRE(r.beta);
  CHECK(r.tight);
  double closed = 72.0 / 5 - 32 * std::sqrt(6.0) / 5;
  CHECK(std::fabs(r.beta->lo().get_d() - closed) < 1e-9);
  CHECK(std::fabs(r.beta->hi().get_d() - closed) < 1e-9);
  CHECK(std::fabs(e_naive(r.beta->hi().get_d(), 0.25)) < 1e-9);
}

TEST_CASE("naive algorithm at u_max = 2^-8 follows the quadratic oracle") {
  BoundResult r = compute_bound(system_for("algo1", pow2(-8)));
  REQUIRE(r.beta);
  double u = std::ldexp(1.0, -8);
  double y = root(e_naive, u, -2.0, 0.0);
  CHECK(std::fabs(r.beta->hi().get_d() - y) < 1e-9);
  double delta = r.beta->hi().get_d() + 1.5;
  CHECK(delta >= 0);
  CHECK(delta <= 4.4e-3);
}

TEST_CASE("scaled algorithm: beta dominates the oracle root on a u grid") {
  AnalysisSystem s = system_for("algo2");
  BoundResult r = compute_bound(s);
  CHECK(r.alpha.contains(Rational(5, 2)));
  CHECK(r.alpha.width() <= Rational(1, 1000000000));
  REQUIRE(r.beta);
  double umax = s.u_max.get_d();
  for (int k = 1; k <= 40; ++k) {
    double u = umax * k / 40;
    double y = root(e_scaled, u, -1.0, 1.0);
    CHECK(y <= r.beta->hi().get_d() + 1e-12);
  }
  // the supremum is approached as u -> 0, where the root tends to 3/8
  CHECK(std::fabs(root(e_scaled, 1e-12, -1.0, 1.0) - 0.375) < 1e-9);
  CHECK(r.beta->hi().get_d() <= 0.375 + 1e-9);
  CHECK(r.beta->hi().get_d() >= 0.375 - 1e-6);
}

TEST_CASE("linear stage alone leaves beta open") {
  OptimizerOptions o;
  o.linear_only = true;
  BoundResult r = compute_bound(system_for("algo3_right"), o);
  CHECK(!r.beta);
  CHECK(r.alpha.contains(Rational(8, 5)));
}

TEST_CASE("pinning fixes every error variable of the naive algorithm") {
  AnalysisSystem s = system_for("algo1");
  PinningAssignment mx = pin_by_monotonicity(s, Direction::Max);
  PinningAssignment mn = pin_by_monotonicity(s, Direction::Min);
  for (auto& v : mx.branched()) CHECK(v.rfind(kEpsPrefix, 0) != 0);
  for (auto& v : mn.branched()) CHECK(v.rfind(kEpsPrefix, 0) != 0);
  for (auto& [v, st] : mx.vars)
    if (v.rfind(kEpsPrefix, 0) == 0) CHECK(st == PinningAssignment::PinnedHi);
  for (auto& [v, st] : mn.vars)
    if (v.rfind(kEpsPrefix, 0) == 0) CHECK(st == PinningAssignment::PinnedLo);
}

TEST_CASE("max and min searches are mirror images") {
  AnalysisSystem s = system_for("algo1");
  RationalInterval ur(s.u_max / 2, s.u_max);
  PinningAssignment mx = pin_by_monotonicity(s, Direction::Max);
  PinningAssignment mn = pin_by_monotonicity(s, Direction::Min);
  RationalInterval up = branch_and_bound_max(s, mx, ur, pow2(-16), 100000);
  RationalInterval down = branch_and_bound_max(s, mn, ur, pow2(-16), 100000);
  RationalInterval both = sup_abs_objective(s, ur, pow2(-16), 100000);
  CHECK(both.hi() >= std::max(up.lo(), down.lo()));
  CHECK(both.lo() <= std::max(up.hi(), down.hi()) + pow2(-20));
}

TEST_CASE("certify accepts the computed bound and rejects a weakened one") {
  AnalysisSystem s = system_for("algo2");
  BoundResult r = compute_bound(s);
  CertifyReport ok = certify(s, r, 2000, 5);
  CHECK(ok.samples == 2000);
  CHECK(ok.max_ratio <= 1.0);

  BoundResult loose = r;
  loose.beta = RationalInterval(r.beta->lo(), r.beta->hi() + 1);
  CHECK(certify(s, loose, 2000, 5).max_ratio < 1.0);

  BoundResult wrong = r;
  wrong.alpha = RationalInterval(Rational(1));
  CHECK_THROWS_AS(certify(s, wrong, 2000, 5), CounterexampleFound);
}

TEST_CASE("json output is deterministic") {
  AnalysisSystem s = system_for("algo2");
  CHECK(compute_bound(s).json() == compute_bound(s).json());
}
