// One line per acceptance criterion; exit status 1 when any line fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "fpbound/harness.hpp"

using namespace fpbound;

namespace {

constexpr std::size_t kBudget = 20000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string dec(const Rational& q, int digits = 12) { return to_decimal(q, digits); }
std::string ival(const RationalInterval& i, int digits = 12) {
  return "[" + dec(i.lo(), digits) + ", " + dec(i.hi(), digits) + "]";
}

bool contains_within(const RationalInterval& i, const Rational& v, const Rational& tol) {
  return i.lo() - tol <= v && v <= i.hi() + tol;
}

// Enclosure of a + b*sqrt(c).
RationalInterval affine_sqrt(const Rational& a, const Rational& b, const Rational& c) {
  return RationalInterval(a) + RationalInterval(b) * RationalInterval(c).sqrt(200);
}

std::map<std::string, BoundResult> bound_cache;

const BoundResult& bound(const std::string& name) {
  auto it = bound_cache.find(name);
  if (it == bound_cache.end()) it = bound_cache.emplace(name, analyze_bundled(name, kBudget).result).first;
  return it->second;
}

BoundResult bound_at(const std::string& name, const Rational& u_max) {
  return analyze_bundled(name, kBudget, u_max).result;
}

AlgorithmBound algorithm(HypotAlgo a) {
  AlgorithmBound ab;
  ab.algo = a;
  for (auto& cover : program_covers(a))
    for (auto& name : cover) ab.programs.push_back(ProgramBound{name, bound(name)});
  return ab;
}

std::map<std::pair<int, int>, SearchResult> search_cache;

const SearchResult& exhaustive(HypotAlgo a, int p) {
  auto key = std::make_pair(static_cast<int>(a), p);
  auto it = search_cache.find(key);
  if (it == search_cache.end()) {
    SearchConfig c;
    c.algo = a;
    c.p = p;
    it = search_cache.emplace(key, cmd_search(c)).first;
  }
  return it->second;
}

int failures = 0;

void line(int n, bool pass, double secs, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("criterion %2d: %s (%.1f s) %s\n", n, pass ? "PASS" : "FAIL", secs, detail.c_str());
  std::fflush(stdout);
}

void run(int n, const std::function<bool(std::ostringstream&)>& body) {
  auto t0 = Clock::now();
  std::ostringstream os;
  bool pass = false;
  try {
    pass = body(os);
  } catch (const std::exception& e) {
    os << " exception: " << e.what();
  }
  line(n, pass, seconds_since(t0), os.str());
}

double e_naive(double y, double u) {
  return u * u * (1 + u) * (1 + u) * y * y - 2 * (1 - u * u) * (1 + 2 * u) * y + (1 + 2 * u) * (2 * u - 3);
}

double e_scaled(double y, double u) {
  return 4 * u * u * (1 + u) * (1 + u) * y * y + 4 * (1 + u) * (u * u + 5 * u + 2) * y + u * u - 6 * u - 3;
}

double root_in(double (*f)(double, double), double u, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    double m = (lo + hi) / 2;
    ((f(lo, u) < 0) == (f(m, u) < 0) ? lo : hi) = m;
  }
  return (lo + hi) / 2;
}

bool criterion1(std::ostringstream& os) {
  auto t0 = Clock::now();
  BoundResult r = bound_at("algo1", Rational(1, 4));
  double secs = seconds_since(t0);
  RationalInterval closed = affine_sqrt(Rational(72, 5), Rational(-32, 5), Rational(6));
  bool a = r.alpha.contains(Rational(2)) && r.alpha.width() <= Rational(1, 1000000000);
  bool b = r.beta && contains_within(*r.beta, closed.lo(), Rational(1, 1000000)) &&
           contains_within(*r.beta, closed.hi(), Rational(1, 1000000));
  double e = r.beta ? std::fabs(e_naive(r.beta->hi().get_d(), 0.25)) : 1.0;
  os << "alpha " << ival(r.alpha) << ", beta " << (r.beta ? ival(*r.beta) : "none") << ", |E(beta,1/4)| " << e;
  return a && b && e <= 1e-6 && secs <= 30;
}

bool criterion2(std::ostringstream& os) {
  auto t0 = Clock::now();
  struct Row {
    int k;
    double delta;
  };
  bool ok = true;
  for (Row row : {Row{8, 4e-3}, Row{11, 5e-4}, Row{24, 6e-8}, Row{53, 2e-16}}) {
    BoundResult r = bound_at("algo1", pow2(-row.k));
    if (!r.beta) return false;
    Rational d = r.beta->hi() + Rational(3, 2);
    bool pass = sgn(d) >= 0 && d.get_d() <= 1.1 * row.delta;
    os << "2^-" << row.k << ": delta " << d.get_d() << (pass ? "" : " (out of range)") << "; ";
    ok = ok && pass;
  }
  return ok && seconds_since(t0) <= 120;
}

bool criterion3(std::ostringstream& os) {
  bool ok = true;
  for (Rational umax : {Rational(1, 64), Rational(1, 4)}) {
    BoundResult r = bound_at("algo2", umax);
    bool a = r.alpha.contains(Rational(5, 2)) && r.alpha.width() <= Rational(1, 1000000000);
    // beta is measured against alpha_hi, so it sits just below 3/8
    bool b = r.beta && contains_within(*r.beta, Rational(3, 8), Rational(1, 1000000));
    // the oracle root is largest as u -> 0 and never exceeds beta
    double lim = root_in(e_scaled, 1e-15, -1.0, 1.0);
    bool oracle = r.beta && std::fabs(lim - 0.375) <= 1e-6;
    for (int k = 1; k <= 64 && oracle; ++k) {
      double u = umax.get_d() * k / 64;
      oracle = root_in(e_scaled, u, -1.0, 1.0) <= r.beta->hi().get_d() + 1e-6;
    }
    os << "u_max " << to_string(umax) << ": alpha " << ival(r.alpha, 14) << ", beta "
       << (r.beta ? ival(*r.beta) : "none") << (oracle ? ", oracle ok; " : ", oracle violated; ");
    ok = ok && a && b && oracle;
  }
  return ok;
}

bool criterion4(std::ostringstream& os) {
  auto t0 = Clock::now();
  const BoundResult& unsplit = bound("algo3");
  const BoundResult& left = bound("algo3_left_abs");
  const BoundResult& right = bound("algo3_right");
  bool a1 = unsplit.alpha.contains(Rational(7, 4)) && unsplit.alpha.width() <= Rational(1, 1000000000);
  RationalInterval split(std::max(left.alpha.lo(), right.alpha.lo()), std::max(left.alpha.hi(), right.alpha.hi()));
  bool a2 = split.contains(Rational(8, 5)) && split.width() <= Rational(1, 1000000000);
  BoundResult rc = bound_at("algo3_right_c", Rational(1, 16));
  bool b = rc.beta && rc.beta->hi() <= Rational(145, 100) &&
           (!rc.tight || std::fabs(rc.beta->hi().get_d() - 1.392) <= 0.05);
  AnalysisSystem sys = analyze_steps(load_program(std::string(FPBOUND_PROGRAMS_DIR) + "/algo3.fp"));
  bool named = false;
  for (auto& s : suggest_splits(sys)) named = named || (s.step == "r" && s.point && *s.point == Rational(1, 2));
  os << "unsplit alpha " << ival(unsplit.alpha) << ", split alpha " << ival(split) << ", right_c at 2^-4 beta "
     << (rc.beta ? ival(*rc.beta) : "none") << (rc.tight ? " tight" : "")
     << (named ? ", split at r = 1/2 suggested" : ", no split at r = 1/2");
  return a1 && a2 && b && named && seconds_since(t0) <= 600;
}

bool criterion5(std::ostringstream& os) {
  auto t0 = Clock::now();
  const BoundResult& r = bound("algo4");
  bool a = r.alpha.contains(Rational(1)) && r.alpha.width() <= Rational(1, 1000000);
  bool b = r.beta && r.u_max == pow2(-6) && r.beta->hi() <= 30;
  os << "alpha " << ival(r.alpha) << ", beta " << (r.beta ? ival(*r.beta) : "none") << " at u_max "
     << to_string(r.u_max) << (r.exhausted ? " (budget exhausted, upper end sound)" : "");
  return a && b && seconds_since(t0) <= 1800;
}

bool criterion6(std::ostringstream& os) {
  const BoundResult& s2 = bound("algo5_path2_split2");
  RationalInterval target = affine_sqrt(Rational(-2), Rational(5, 2), Rational(2));
  bool a = s2.alpha.contains(target.lo()) && s2.alpha.contains(target.hi()) &&
           s2.alpha.width() <= Rational(1, 1000);
  const BoundResult& p1 = bound("algo5_path1");
  bool b = p1.u_max == Rational(1, 256) && p1.alpha.hi() <= Rational(140, 100) && p1.beta.has_value();
  os << "split2 alpha " << ival(s2.alpha) << ", path1 alpha " << ival(p1.alpha) << "; ";
  AlgorithmBound ab = algorithm(HypotAlgo::Kahan);
  bool dom = true;
  for (int p : {10, 12}) {
    const SearchResult& sr = exhaustive(HypotAlgo::Kahan, p);
    auto bnd = ab.over_u(pow2(-p));
    bool ok = bnd && sr.max_exact.hi() <= *bnd;
    os << "p=" << p << " max " << dec(sr.max_exact.hi(), 6) << " <= " << (bnd ? dec(*bnd, 6) : "none") << "; ";
    dom = dom && ok;
  }
  return a && b && dom;
}

bool criterion7(std::ostringstream& os) {
  auto t0 = Clock::now();
  bool ok = true;
  for (auto& pw : published_witnesses()) {
    ErrorMeasurement m = cmd_witness(pw.w);
    Rational e = parse_decimal(pw.expected), tol = parse_decimal(pw.tol);
    bool pass = m.rel_error_over_u.lo() >= e - tol && m.rel_error_over_u.hi() <= e + tol;
    os << to_string(pw.w.algo) << "/" << pw.w.format.name() << " " << dec(m.rel_error_over_u.hi(), 20)
       << (pass ? "; " : " (off); ");
    ok = ok && pass;
  }
  return ok && seconds_since(t0) <= 10;
}

bool criterion8(std::ostringstream& os) {
  bool ok = true;
  for (int p : {8, 10}) {
    auto t0 = Clock::now();
    os << "p=" << p << ":";
    for (int a = 1; a <= 5; ++a) {
      HypotAlgo algo = HypotAlgo(a);
      const SearchResult& sr = exhaustive(algo, p);
      auto bnd = algorithm(algo).over_u(pow2(-p));
      bool sound = bnd && sr.max_exact.hi() <= *bnd;
      bool sharp = true;
      if (algo == HypotAlgo::Naive) sharp = sr.max_exact.hi() >= Rational(19, 10);
      if (algo == HypotAlgo::Scaled) sharp = sr.max_exact.hi() >= Rational(23, 10);
      os << " " << to_string(algo) << " " << dec(sr.max_exact.hi(), 6) << "<=" << (bnd ? dec(*bnd, 6) : "none")
         << (sound ? "" : " UNSOUND") << (sharp ? "" : " (below sharpness target)");
      ok = ok && sound && sharp;
    }
    double secs = seconds_since(t0);
    os << " [" << secs << " s];";
    if (p == 8) ok = ok && secs <= 300;
  }
  return ok;
}

std::vector<FPNum> binade_numbers(const FPFormat& f, long e0, long e1) {
  std::vector<FPNum> r;
  for (long e = e0; e <= e1; ++e)
    for (long M = 1L << (f.p - 1); M < (1L << f.p); ++M) {
      FPNum x;
      x.M = M;
      x.e = e;
      x.fmt = f;
      r.push_back(x);
    }
  return r;
}

bool criterion9(std::ostringstream& os) {
  auto t0 = Clock::now();
  FPFormat f = FPFormat::precision(6);
  const Rational u = f.u();
  const Rational dk = u / (1 + u);
  bool ok_dk = true, ok_div = true, ok_sqrt = true, ok_sterbenz = true, ok_eft = true;
  auto xs = binade_numbers(f, 0, 1);
  for (auto& a : xs)
    for (auto& b : xs) {
      Rational s = a.value() + b.value(), m = a.value() * b.value(), q = a.value() / b.value();
      ok_dk = ok_dk && abs(fp_add(a, b).value() - s) <= dk * s && abs(fp_mul(a, b).value() - m) <= dk * m;
      ok_div = ok_div && abs(fp_div(a, b).value() - q) <= (u - 2 * u * u) * q;
    }
  RationalInterval B =
      RationalInterval(Rational(1)) - RationalInterval(Rational(1)) / RationalInterval(1 + 2 * u).sqrt(200);
  for (auto& a : binade_numbers(f, -2, 1)) {
    Rational s = fp_sqrt(a).value();
    if (s * s <= a.value()) {
      ok_sqrt = ok_sqrt && s * s * (1 + 2 * u) >= a.value();
    } else {
      RationalInterval e = RationalInterval(s) / RationalInterval(a.value()).sqrt(200) - RationalInterval(Rational(1));
      ok_sqrt = ok_sqrt && e.hi() < B.lo();
    }
  }
  auto ys = binade_numbers(f, -1, 2);
  for (auto& a : ys)
    for (auto& b : ys)
      if (2 * b.value() >= a.value() && b.value() <= 2 * a.value())
        ok_sterbenz = ok_sterbenz && fp_sub(b, a).value() == b.value() - a.value();

  std::mt19937_64 rng(2024);
  for (int p : {5, 12, 24, 53}) {
    FPFormat g = FPFormat::precision(p);
    auto draw = [&]() {
      FPNum x;
      x.M = 1;
      for (int left = p - 1; left > 0; left -= 32) {
        int take = std::min(left, 32);
        x.M <<= static_cast<mp_bitcnt_t>(take);
        x.M += static_cast<unsigned long>(rng() >> (64 - take));
      }
      if (rng() & 1) x.M = -x.M;
      x.e = static_cast<long>(rng() % 61) - 30;
      x.fmt = g;
      return x;
    };
    for (int i = 0; i < 100000; ++i) {
      FPNum a = draw(), b = draw();
      auto [h, l] = fast_two_mult(a, b);
      ok_eft = ok_eft && h.value() + l.value() == a.value() * b.value();
      if (abs(a.value()) < abs(b.value())) std::swap(a, b);
      auto [s, t] = fast_two_sum(a, b);
      ok_eft = ok_eft && s.value() + t.value() == a.value() + b.value();
    }
  }
  os << "Dekker-Knuth " << ok_dk << ", division " << ok_div << ", sqrt " << ok_sqrt << ", Sterbenz " << ok_sterbenz
     << ", EFT " << ok_eft;
  return ok_dk && ok_div && ok_sqrt && ok_sterbenz && ok_eft && seconds_since(t0) <= 120;
}

bool criterion10(std::ostringstream& os) {
  const char* names[] = {"algo1",       "algo2",       "algo3",        "algo3_left",         "algo3_left_abs",
                         "algo3_right", "algo3_right_c", "algo4",      "algo5_path1",        "algo5_path2_split1",
                         "algo5_path2_split2"};
  bool ok = true;
  os.precision(9);
  for (const char* n : names) {
    AnalysisSystem sys = analyze_steps(load_program(std::string(FPBOUND_PROGRAMS_DIR) + "/" + n + ".fp"));
    try {
      CertifyReport rep = certify(sys, bound(n), 100000, 17);
      os << n << " " << rep.max_ratio << "; ";
    } catch (const CounterexampleFound& e) {
      os << n << " counterexample; ";
      ok = false;
    }
  }
  return ok;
}

}  // namespace

int main() {
  std::printf("budget %zu boxes per stage; workers %u\n", kBudget, default_workers());
  run(1, criterion1);
  run(2, criterion2);
  run(3, criterion3);
  run(4, criterion4);
  run(5, criterion5);
  run(6, criterion6);
  run(7, criterion7);
  run(8, criterion8);
  run(9, criterion9);
  run(10, criterion10);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures ? 1 : 0;
}
