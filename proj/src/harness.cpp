#include "fpbound/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace fpbound {

using json = nlohmann::json;

std::vector<long> SearchConfig::offsets() const {
  if (!y_offsets.empty()) return y_offsets;
  std::vector<long> r;
  for (long k = 0; k >= -p; --k) r.push_back(k);
  return r;
}

std::size_t SearchConfig::pair_count() const {
  if (!exhaustive) return samples;
  if (p > 30) return static_cast<std::size_t>(-1);
  std::size_t binade = std::size_t{1} << (p - 1);
  return binade * binade * offsets().size();
}

unsigned default_workers() {
  if (const char* s = std::getenv("FPBOUND_WORKERS")) {
    long n = std::strtol(s, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return 1;
}

namespace {

FPNum make_num(const BigInt& M, long e, const FPFormat& f) {
  FPNum r;
  r.M = M;
  r.e = e;
  r.fmt = f;
  return r;
}

// Double estimate of |rho/sqrt(x^2+y^2) - 1| / u from the exact
// e = (rho^2 - T)/T, using rho/sqrt(T) - 1 = e/(sqrt(1+e)+1).
struct ErrorEstimator {
  BigInt T, R, t;

  double operator()(const FPNum& x, const FPNum& y, const FPNum& rho) {
    // squares of M * 2^e, all scaled by 2^-2*emin
    long emin = std::min({x.e, y.e, rho.e});
    auto square = [&](BigInt& out, const FPNum& v) {
      out = v.M * v.M;
      out <<= static_cast<mp_bitcnt_t>(2 * (v.e - emin));
    };
    square(T, x);
    square(t, y);
    T += t;
    square(R, rho);
    R -= T;
    if (sgn(R) == 0) return 0.0;
    long ed, et;
    double md = mpz_get_d_2exp(&ed, R.get_mpz_t());
    double mt = mpz_get_d_2exp(&et, T.get_mpz_t());
    double e = std::ldexp(md / mt, static_cast<int>(ed - et));
    return std::fabs(e) / (std::sqrt(1 + e) + 1) * std::ldexp(1.0, x.fmt.p);
  }
};

struct Best {
  double err = -1;
  std::uint64_t key = 0;
  BigInt X, Y;
  long k = 0;

  void offer(double v, std::uint64_t kk, const BigInt& xm, const BigInt& ym, long off) {
    if (v > err || (v == err && kk < key)) {
      err = v;
      key = kk;
      X = xm;
      Y = ym;
      k = off;
    }
  }
  void merge(const Best& o) {
    if (o.err > err || (o.err == err && o.key < key)) *this = o;
  }
};

struct Accumulator {
  Best best;
  std::vector<std::size_t> hist;
  std::size_t pairs = 0;
};

constexpr std::size_t kChunk = 4096;

}  // namespace

SearchResult cmd_search(const SearchConfig& cfg) {
  if (cfg.p < 2) throw std::invalid_argument("search precision must be at least 2");
  const std::vector<long> offs = cfg.offsets();
  for (long k : offs)
    if (k > 0) throw std::invalid_argument("y offsets must be <= 0");
  if (cfg.exhaustive && cfg.pair_count() > SearchConfig::kMaxExhaustive)
    throw SearchTooLarge("exhaustive search of " + std::to_string(cfg.pair_count()) + " pairs exceeds 2^28");
  const FPFormat f = FPFormat::precision(cfg.p);
  const int bins = std::max(1, cfg.histogram_bins);
  const unsigned workers = std::max(1u, cfg.workers ? cfg.workers : default_workers());
  const long lo = 1L << (cfg.p - 1);
  const long hi_excl = cfg.p <= 62 ? (1L << cfg.p) : 0;

  auto run = [&](unsigned w, Accumulator& acc) {
    acc.hist.assign(static_cast<std::size_t>(bins) + 1, 0);
    ErrorEstimator est;
    auto record = [&](double err, std::uint64_t key, const FPNum& x, const FPNum& y, long k) {
      ++acc.pairs;
      int b = static_cast<int>(err / cfg.histogram_max * bins);
      acc.hist[static_cast<std::size_t>(std::clamp(b, 0, bins))]++;
      acc.best.offer(err, key, x.M, y.M, k);
    };
    if (cfg.exhaustive) {
      // stripes of x significands
      for (long X = lo + w; X < hi_excl; X += workers) {
        FPNum x = make_num(BigInt(X), 0, f);
        for (std::size_t ki = 0; ki < offs.size(); ++ki) {
          for (long Y = lo; Y < hi_excl; ++Y) {
            FPNum y = make_num(BigInt(Y), offs[ki], f);
            FPNum rho = run_hypot(cfg.algo, x, y);
            std::uint64_t key = (static_cast<std::uint64_t>(X - lo) * offs.size() + ki) *
                                    static_cast<std::uint64_t>(lo) +
                                static_cast<std::uint64_t>(Y - lo);
            record(est(x, y, rho), key, x, y, offs[ki]);
          }
        }
      }
      return;
    }
    // random mode: chunk c always draws from the same generator, so the
    // result does not depend on the worker count
    std::size_t chunks = (cfg.samples + kChunk - 1) / kChunk;
    gmp_randclass gen(gmp_randinit_default);
    for (std::size_t c = w; c < chunks; c += workers) {
      std::seed_seq seq{static_cast<unsigned long>(cfg.seed), static_cast<unsigned long>(c)};
      std::mt19937_64 rng(seq);
      gen.seed(static_cast<unsigned long>(rng()));
      std::uniform_int_distribution<std::size_t> pick(0, offs.size() - 1);
      std::size_t end = std::min(cfg.samples, (c + 1) * kChunk);
      for (std::size_t i = c * kChunk; i < end; ++i) {
        BigInt X = gen.get_z_bits(static_cast<unsigned long>(cfg.p - 1)) + pow2z(static_cast<unsigned long>(cfg.p - 1));
        BigInt Y = gen.get_z_bits(static_cast<unsigned long>(cfg.p - 1)) + pow2z(static_cast<unsigned long>(cfg.p - 1));
        long k = offs[pick(rng)];
        FPNum x = make_num(X, 0, f), y = make_num(Y, k, f);
        FPNum rho = run_hypot(cfg.algo, x, y);
        record(est(x, y, rho), i, x, y, k);
      }
    }
  };

  std::vector<Accumulator> accs(workers);
  if (workers == 1) {
    run(0, accs[0]);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(run, w, std::ref(accs[w]));
    for (auto& t : threads) t.join();
  }

  SearchResult r;
  r.config = cfg;
  r.config.y_offsets = offs;
  r.histogram.assign(static_cast<std::size_t>(bins) + 1, 0);
  Best best;
  for (auto& a : accs) {
    best.merge(a.best);
    r.pairs += a.pairs;
    for (std::size_t i = 0; i < a.hist.size(); ++i) r.histogram[i] += a.hist[i];
  }
  if (best.err >= 0) {
    r.max_err_over_u = best.err;
    r.x = make_num(best.X, 0, f);
    r.y = make_num(best.Y, best.k, f);
    r.max_exact = rel_error_over_u(run_hypot(cfg.algo, *r.x, *r.y), *r.x, *r.y);
  }
  return r;
}

namespace {

json num_json(const FPNum& v) { return json{{"M", v.M.get_str()}, {"e", v.e}, {"value", to_string(v.value())}}; }

json interval_json(const RationalInterval& i, int digits = 20) {
  return json::array({to_decimal(i.lo(), digits), to_decimal(i.hi(), digits)});
}

}  // namespace

std::string SearchResult::json() const {
  nlohmann::json j;
  j["algorithm"] = to_string(config.algo);
  j["p"] = config.p;
  j["mode"] = config.exhaustive ? "exhaustive" : "random";
  if (!config.exhaustive) {
    j["samples"] = config.samples;
    j["seed"] = config.seed;
  }
  j["y_offsets"] = config.y_offsets;
  j["pairs"] = pairs;
  j["max_err_over_u"] = max_err_over_u;
  if (x) {
    j["max_err_over_u_exact"] = interval_json(max_exact);
    j["witness"] = nlohmann::json::parse(witness_json(Witness{x->fmt, config.algo, *x, *y}));
  }
  j["histogram"] = {{"bin_width", config.histogram_max / std::max(1, config.histogram_bins)}, {"counts", histogram}};
  return j.dump(2);
}

FPFormat format_from_string(const std::string& s) {
  if (s == "binary32") return FPFormat::binary32();
  if (s == "binary64") return FPFormat::binary64();
  if (s == "binary128") return FPFormat::binary128();
  if (s == "binary64_ieee") return FPFormat::binary64_ieee();
  if (s.size() > 1 && s[0] == 'p') return FPFormat::precision(std::stoi(s.substr(1)));
  throw std::invalid_argument("unknown format " + s);
}

namespace {

FPNum parse_num(const json& j, const FPFormat& f) {
  BigInt M = j.at("M").is_string() ? BigInt(j.at("M").get<std::string>()) : BigInt(j.at("M").get<long>());
  long e = j.at("e").get<long>();
  return fp_exact(Rational(M) * pow2(e - f.p + 1), f);
}

}  // namespace

Witness parse_witness(const std::string& text) {
  json j = json::parse(text);
  Witness w;
  w.format = format_from_string(j.at("format").get<std::string>());
  w.algo = hypot_algo_from_string(j.at("algorithm").get<std::string>());
  w.x = parse_num(j.at("x"), w.format);
  w.y = parse_num(j.at("y"), w.format);
  return w;
}

std::string witness_json(const Witness& w) {
  json j{{"format", w.format.name()},
         {"algorithm", to_string(w.algo)},
         {"x", {{"M", w.x.M.get_str()}, {"e", w.x.e}}},
         {"y", {{"M", w.y.M.get_str()}, {"e", w.y.e}}}};
  return j.dump();
}

ErrorMeasurement cmd_witness(const Witness& w) { return measure(w.algo, w.x, w.y); }

std::string measurement_json(const ErrorMeasurement& m, const Witness& w) {
  json j;
  j["format"] = w.format.name();
  j["algorithm"] = to_string(w.algo);
  j["x"] = num_json(m.x);
  j["y"] = num_json(m.y);
  j["rho"] = num_json(m.rho);
  j["rel_error_over_u"] = interval_json(m.rel_error_over_u, 24);
  json steps = json::array();
  for (auto& [name, v] : m.transcript.steps) {
    json s = num_json(v);
    s["name"] = name;
    steps.push_back(s);
  }
  j["transcript"] = steps;
  return j.dump(2);
}

Witness make_witness(HypotAlgo a, const FPFormat& f, const std::string& x, const std::string& y) {
  return Witness{f, a, fp_exact(parse_rational(x), f), fp_exact(parse_rational(y), f)};
}

std::vector<PublishedWitness> published_witnesses() {
  return {
      {make_witness(HypotAlgo::Scaled, FPFormat::binary64(), "9007199254740991", "8425463406411589/33554432"),
       "2.49999999999999558648", "0.000000000000000001"},
      {make_witness(HypotAlgo::Beebe, FPFormat::binary64(), "8056283928243985", "4028141964171097"), "1.5999739",
       "0.000001"},
      {make_witness(HypotAlgo::Beebe, FPFormat::binary128(), "9288262988033986935972257666807793",
                    "4644131494016993467987768200983857"),
       "1.5999999648", "0.00000001"},
      {make_witness(HypotAlgo::Kahan, FPFormat::binary32(), "12285049", "11439491"), "1.4977", "0.0001"},
      {make_witness(HypotAlgo::Kahan, FPFormat::binary64(), "6595357501251898", "6135139757867044"), "1.4961", "0.0001"},
  };
}

ProgramBound analyze_bundled(const std::string& name, std::size_t budget, std::optional<Rational> u_max) {
  Program prog = load_program(std::string(FPBOUND_PROGRAMS_DIR) + "/" + name + ".fp");
  AnalysisOptions ao;
  ao.u_max = u_max;
  AnalysisSystem sys = analyze_steps(prog, ao);
  OptimizerOptions oo;
  oo.budget = budget;
  return ProgramBound{name, compute_bound(sys, oo)};
}

std::vector<std::vector<std::string>> program_covers(HypotAlgo a) {
  switch (a) {
    case HypotAlgo::Naive:
      return {{"algo1"}};
    case HypotAlgo::Scaled:
      return {{"algo2"}};
    case HypotAlgo::Beebe:
      return {{"algo3_left", "algo3_right_c"}, {"algo3"}};
    case HypotAlgo::Borges:
      return {{"algo4"}};
    case HypotAlgo::Kahan:
      return {{"algo5_path1", "algo5_path2_split1", "algo5_path2_split2"}};
  }
  return {};
}

std::optional<Rational> AlgorithmBound::over_u(const Rational& u) const {
  std::map<std::string, const BoundResult*> by_name;
  for (auto& pb : programs) by_name[pb.name] = &pb.result;
  std::optional<Rational> best;
  for (auto& cover : program_covers(algo)) {
    std::optional<Rational> worst;
    bool ok = true;
    for (auto& name : cover) {
      auto it = by_name.find(name);
      if (it == by_name.end() || !it->second->beta || u > it->second->u_max) {
        ok = false;
        break;
      }
      Rational v = it->second->alpha.hi() + it->second->beta->hi() * u;
      if (!worst || v > *worst) worst = v;
    }
    if (ok && worst && (!best || *worst < *best)) best = worst;
  }
  return best;
}

AlgorithmBound algorithm_bound(HypotAlgo a, std::size_t budget) {
  AlgorithmBound ab;
  ab.algo = a;
  std::vector<std::string> seen;
  for (auto& cover : program_covers(a))
    for (auto& name : cover)
      if (std::find(seen.begin(), seen.end(), name) == seen.end()) {
        seen.push_back(name);
        ab.programs.push_back(analyze_bundled(name, budget));
      }
  return ab;
}

namespace {

struct PublishedRow {
  std::string alpha, beta, regime;
  double alpha_value, beta_value, alpha_tol;
};

PublishedRow published_row(HypotAlgo a) {
  switch (a) {
    case HypotAlgo::Naive:
      return {"2", "-(8/5)(9-4*sqrt(6))", "p>=2", 2.0, -1.6 * (9 - 4 * std::sqrt(6.0)), 1e-9};
    case HypotAlgo::Scaled:
      return {"5/2", "3/8", "p>=2", 2.5, 0.375, 1e-9};
    case HypotAlgo::Beebe:
      return {"8/5", "7/5", "p>=4", 1.6, 1.4, 1e-9};
    case HypotAlgo::Borges:
      return {"1", "13.1", "p>=5", 1.0, 13.1, 1e-6};
    case HypotAlgo::Kahan:
      return {"5*sqrt(2)/2-2", "1/12", "p>=5", 5 * std::sqrt(2.0) / 2 - 2, 1.0 / 12, 1e-3};
  }
  return {};
}

bool contains_within(const RationalInterval& i, double v, double tol) {
  return i.lo().get_d() - tol <= v && v <= i.hi().get_d() + tol;
}

}  // namespace

std::vector<RegressionRow> cmd_report(const ReportConfig& cfg) {
  std::vector<RegressionRow> rows;
  for (HypotAlgo a : cfg.algos) {
    AlgorithmBound ab = algorithm_bound(a, cfg.budget);
    PublishedRow pr = published_row(a);
    // enclosures reported for the first cover: hull of its pieces' maxima
    std::optional<RationalInterval> alpha, beta;
    bool beta_missing = false;
    for (auto& name : program_covers(a).front()) {
      for (auto& pb : ab.programs) {
        if (pb.name != name) continue;
        const BoundResult& r = pb.result;
        alpha = alpha ? RationalInterval(std::max(alpha->lo(), r.alpha.lo()), std::max(alpha->hi(), r.alpha.hi())) : r.alpha;
        if (!r.beta) {
          beta_missing = true;
        } else {
          beta = beta ? RationalInterval(std::max(beta->lo(), r.beta->lo()), std::max(beta->hi(), r.beta->hi())) : *r.beta;
        }
      }
    }
    for (int p : cfg.ps) {
      RegressionRow row;
      row.algorithm = to_string(a);
      row.published_alpha = pr.alpha;
      row.published_beta = pr.beta;
      row.published_alpha_value = pr.alpha_value;
      row.published_beta_value = pr.beta_value;
      row.published_regime = pr.regime;
      row.alpha = *alpha;
      if (!beta_missing) row.beta = beta;
      row.p = p;
      SearchConfig sc;
      sc.algo = a;
      sc.p = p;
      if (sc.pair_count() > SearchConfig::kMaxExhaustive) {
        sc.exhaustive = false;
        sc.samples = cfg.random_samples;
      }
      SearchResult sr = cmd_search(sc);
      row.observed_max = sr.x ? sr.max_exact.hi().get_d() : 0.0;
      Rational u = pow2(-p);
      std::optional<Rational> b = ab.over_u(u);
      row.bound_at_p = b ? b->get_d() : 0.0;
      row.sound_pass = b && (!sr.x || sr.max_exact.hi() <= *b);
      row.alpha_pass = contains_within(row.alpha, pr.alpha_value, pr.alpha_tol);
      switch (a) {
        case HypotAlgo::Naive:
        case HypotAlgo::Scaled:
          row.beta_pass = row.beta && contains_within(*row.beta, pr.beta_value, 1e-6);
          break;
        case HypotAlgo::Beebe:
          row.beta_pass = row.beta && row.beta->hi().get_d() <= pr.beta_value;
          break;
        case HypotAlgo::Borges:
          // the tight value relies on pinning that is only conjectured
          row.beta_pass = row.beta && row.beta->hi().get_d() <= 30.0;
          break;
        case HypotAlgo::Kahan:
          // checked through soundness only
          row.beta_pass = row.beta.has_value();
          break;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string report_csv(const std::vector<RegressionRow>& rows) {
  std::ostringstream os;
  os << "algorithm,p,published_alpha,published_beta,published_regime,alpha_lo,alpha_hi,beta_lo,beta_hi,observed_max_over_u,"
        "bound_over_u,alpha_pass,beta_pass,sound_pass,pass\n";
  for (auto& r : rows) {
    os << r.algorithm << ',' << r.p << ',' << r.published_alpha << ',' << r.published_beta << ',' << r.published_regime << ','
       << to_decimal(r.alpha.lo(), 15) << ',' << to_decimal(r.alpha.hi(), 15) << ','
       << (r.beta ? to_decimal(r.beta->lo(), 15) : "") << ',' << (r.beta ? to_decimal(r.beta->hi(), 15) : "") << ','
       << to_decimal(Rational(r.observed_max), 15) << ',' << to_decimal(Rational(r.bound_at_p), 15) << ','
       << r.alpha_pass << ',' << r.beta_pass << ',' << r.sound_pass << ',' << r.pass() << '\n';
  }
  return os.str();
}

std::string report_json(const std::vector<RegressionRow>& rows) {
  json arr = json::array();
  for (auto& r : rows) {
    json j{{"algorithm", r.algorithm},
           {"p", r.p},
           {"published_alpha", r.published_alpha},
           {"published_beta", r.published_beta},
           {"published_regime", r.published_regime},
           {"alpha", interval_json(r.alpha)},
           {"observed_max_over_u", r.observed_max},
           {"bound_over_u", r.bound_at_p},
           {"alpha_pass", r.alpha_pass},
           {"beta_pass", r.beta_pass},
           {"sound_pass", r.sound_pass},
           {"pass", r.pass()}};
    j["beta"] = r.beta ? interval_json(*r.beta) : json(nullptr);
    arr.push_back(j);
  }
  return json{{"rows", arr}}.dump(2);
}

}  // namespace fpbound
