#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpbound/fpsim.hpp"
#include "fpbound/optimizer.hpp"

namespace fpbound {

struct SearchTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// x = X * 2^(1-p) with X in [2^(p-1), 2^p - 1]; y = Y * 2^(1-p+k) for each
// offset k <= 0 and every significand Y.
struct SearchConfig {
  HypotAlgo algo = HypotAlgo::Naive;
  int p = 8;
  std::vector<long> y_offsets;  // empty means 0, -1, ..., -p
  bool exhaustive = true;
  std::size_t samples = 0;  // random mode
  unsigned long seed = 1;
  unsigned workers = 0;  // 0 reads FPBOUND_WORKERS, else 1
  int histogram_bins = 30;
  double histogram_max = 3.0;  // bins cover [0, histogram_max) in units of u

  std::vector<long> offsets() const;
  std::size_t pair_count() const;
  static constexpr std::size_t kMaxExhaustive = std::size_t{1} << 28;
};

struct SearchResult {
  SearchConfig config;
  std::size_t pairs = 0;
  double max_err_over_u = 0;       // double estimate
  RationalInterval max_exact;      // exact enclosure at the argmax
  std::optional<FPNum> x, y;       // argmax
  std::vector<std::size_t> histogram;  // last bin collects errors >= histogram_max
  std::string json() const;
};

unsigned default_workers();
// Throws SearchTooLarge when an exhaustive search exceeds 2^28 pairs.
SearchResult cmd_search(const SearchConfig& cfg);

struct Witness {
  FPFormat format;
  HypotAlgo algo;
  FPNum x, y;
};
FPFormat format_from_string(const std::string& s);
Witness parse_witness(const std::string& json_text);
std::string witness_json(const Witness& w);
// Report JSON {rel_error_over_u: [lo, hi], transcript, ...}.
std::string measurement_json(const ErrorMeasurement& m, const Witness& w);
ErrorMeasurement cmd_witness(const Witness& w);

struct PublishedWitness {
  Witness w;
  std::string expected;  // error/u as published, decimal
  std::string tol;
};
// x and y are given as rationals; throws NotRepresentable if they are not
// format numbers.
Witness make_witness(HypotAlgo a, const FPFormat& f, const std::string& x, const std::string& y);
std::vector<PublishedWitness> published_witnesses();

struct ProgramBound {
  std::string name;
  BoundResult result;
};
// Analyzes a bundled program (name without .fp) through the full pipeline.
ProgramBound analyze_bundled(const std::string& name, std::size_t budget, std::optional<Rational> u_max = {});

// Sets of bundled programs whose domains jointly cover one algorithm. Any
// cover yields a valid bound, so the smallest one is used.
std::vector<std::vector<std::string>> program_covers(HypotAlgo a);

struct AlgorithmBound {
  HypotAlgo algo;
  std::vector<ProgramBound> programs;  // every program of every cover
  // min over covers of max over pieces of alpha_hi*u + beta_hi*u^2, in
  // units of u. Empty when no cover is valid at u.
  std::optional<Rational> over_u(const Rational& u) const;
};
AlgorithmBound algorithm_bound(HypotAlgo a, std::size_t budget);

struct RegressionRow {
  std::string algorithm;
  std::string published_alpha, published_beta;
  double published_alpha_value = 0, published_beta_value = 0;
  std::string published_regime;
  RationalInterval alpha;
  std::optional<RationalInterval> beta;
  int p = 0;
  double observed_max = 0;  // error/u from search and witnesses at p
  double bound_at_p = 0;    // computed bound / u at u = 2^-p
  bool alpha_pass = false, beta_pass = false, sound_pass = false;
  bool pass() const { return alpha_pass && beta_pass && sound_pass; }
};

struct ReportConfig {
  std::vector<HypotAlgo> algos{HypotAlgo::Naive, HypotAlgo::Scaled, HypotAlgo::Beebe, HypotAlgo::Borges,
                               HypotAlgo::Kahan};
  std::vector<int> ps{8};
  std::size_t budget = 20000;
  std::size_t random_samples = 200000;  // used when exhaustive is too large
};

std::vector<RegressionRow> cmd_report(const ReportConfig& cfg);
std::string report_csv(const std::vector<RegressionRow>& rows);
std::string report_json(const std::vector<RegressionRow>& rows);

}  // namespace fpbound
