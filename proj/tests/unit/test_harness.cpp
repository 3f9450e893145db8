#include "doctest.h"
#include "fpbound/harness.hpp"

using namespace fpbound;

TEST_CASE("search configuration limits") {
  SearchConfig c;
  c.p = 8;
  CHECK(c.offsets().size() == 9);
  CHECK(c.pair_count() == 128u * 128u * 9u);
  c.p = 16;
  CHECK_THROWS_AS(cmd_search(c), SearchTooLarge);
  c.y_offsets = {1};
  c.p = 4;
  CHECK_THROWS_AS(cmd_search(c), std::invalid_argument);
}

TEST_CASE("exhaustive search does not depend on the worker count") {
  SearchConfig c;
  c.algo = HypotAlgo::Beebe;
  c.p = 6;
  c.workers = 1;
  SearchResult a = cmd_search(c);
  c.workers = 3;
  SearchResult b = cmd_search(c);
  CHECK(a.json() == b.json());
  CHECK(a.pairs == 32u * 32u * 7u);
  std::size_t total = 0;
  for (auto n : a.histogram) total += n;
  CHECK(total == a.pairs);
}

TEST_CASE("random search does not depend on the worker count") {
  SearchConfig c;
  c.algo = HypotAlgo::Kahan;
  c.p = 20;
  c.exhaustive = false;
  c.samples = 10000;
  c.seed = 9;
  c.workers = 1;
  SearchResult a = cmd_search(c);
  c.workers = 2;
  CHECK(a.json() == cmd_search(c).json());
  CHECK(a.pairs == 10000);
}

TEST_CASE("the argmax replays through a witness file") {
  SearchConfig c;
  c.algo = HypotAlgo::Scaled;
  c.p = 7;
  SearchResult r = cmd_search(c);
  REQUIRE(r.x);
  Witness w = parse_witness(witness_json(Witness{r.x->fmt, c.algo, *r.x, *r.y}));
  ErrorMeasurement m = cmd_witness(w);
  CHECK(m.rel_error_over_u.lo() == r.max_exact.lo());
  CHECK(m.rel_error_over_u.hi() == r.max_exact.hi());
  CHECK(std::fabs(r.max_err_over_u - r.max_exact.hi().get_d()) < 1e-9);
}

TEST_CASE("search maximum matches a direct scan") {
  SearchConfig c;
  c.algo = HypotAlgo::Naive;
  c.p = 5;
  c.y_offsets = {0, -1};
  SearchResult r = cmd_search(c);
  FPFormat f = FPFormat::precision(5);
  Rational best = 0;
  for (long X = 16; X < 32; ++X)
    for (long k : {0L, -1L})
      for (long Y = 16; Y < 32; ++Y) {
        FPNum x = fp_exact(Rational(X, 16), f), y = fp_exact(Rational(Y, 16) * pow2(k), f);
        best = std::max(best, measure(HypotAlgo::Naive, x, y).rel_error_over_u.hi());
      }
  CHECK(r.max_exact.hi() == best);
}

TEST_CASE("witness files") {
  Witness w = parse_witness(R"({"format": "binary32", "algorithm": "algo5",
                               "x": {"M": 12285049, "e": 23}, "y": {"M": "11439491", "e": 23}})");
  CHECK(w.x.value() == 12285049);
  CHECK(w.algo == HypotAlgo::Kahan);
  CHECK_THROWS_AS(parse_witness(R"({"format": "p4", "algorithm": "algo1", "x": {"M": 17, "e": 0},
                                   "y": {"M": 8, "e": 0}})"),
                  NotRepresentable);
  CHECK_THROWS(parse_witness(R"({"format": "p4", "algorithm": "algo9", "x": {"M": 8, "e": 0},
                                "y": {"M": 8, "e": 0}})"));
  // round trip
  CHECK(witness_json(parse_witness(witness_json(w))) == witness_json(w));
}

TEST_CASE("published witnesses replay within their tolerances") {
  for (auto& pw : published_witnesses()) {
    ErrorMeasurement m = cmd_witness(pw.w);
    Rational e = parse_decimal(pw.expected), tol = parse_decimal(pw.tol);
    CHECK(m.rel_error_over_u.lo() >= e - tol);
    CHECK(m.rel_error_over_u.hi() <= e + tol);
  }
}

TEST_CASE("algorithm bounds combine covers") {
  AlgorithmBound ab = algorithm_bound(HypotAlgo::Scaled, 100000);
  REQUIRE(ab.programs.size() == 1);
  const BoundResult& r = ab.programs[0].result;
  Rational u = pow2(-8);
  REQUIRE(ab.over_u(u));
  CHECK(*ab.over_u(u) == r.alpha.hi() + r.beta->hi() * u);
  CHECK(!ab.over_u(r.u_max * 2));
}

TEST_CASE("measured errors respect the published bounds") {
  // bound/u at u = 2^-p for the five algorithms, as published
  auto published = [](HypotAlgo a, double u) {
    switch (a) {
      case HypotAlgo::Naive:
        return 2 - 1.6 * (9 - 4 * std::sqrt(6.0)) * u;
      case HypotAlgo::Scaled:
        return 2.5 + 0.375 * u;
      case HypotAlgo::Beebe:
        return 1.6 + 1.4 * u;
      case HypotAlgo::Borges:
        return 1 + 13.1 * u;
      case HypotAlgo::Kahan:
        return 5 * std::sqrt(2.0) / 2 - 2 + u / 12;
    }
    return 0.0;
  };
  for (int a = 1; a <= 5; ++a)
    for (int p : {8, 10, 12}) {
      SearchConfig c;
      c.algo = HypotAlgo(a);
      c.p = p;
      if (p > 8) {
        c.exhaustive = false;
        c.samples = 20000;
      }
      SearchResult r = cmd_search(c);
      INFO(to_string(c.algo) << " p=" << p);
      CHECK(r.max_exact.hi().get_d() <= published(c.algo, std::ldexp(1.0, -p)));
    }
}
