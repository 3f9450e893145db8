#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fpbound/harness.hpp"

using namespace fpbound;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int analyze(const std::string& file, const std::string& umax, const std::string& steps, bool strict,
            std::size_t budget) {
  Program prog = load_program(file);
  AnalysisOptions ao;
  ao.strict_paper_absolute = strict;
  if (!umax.empty()) ao.u_max = parse_rational(umax);
  AnalysisSystem sys = analyze_steps(prog, ao);
  OptimizerOptions oo;
  oo.budget = budget;
  oo.linear_only = steps == "linear";
  BoundResult r = compute_bound(sys, oo);
  std::cout << r.json() << "\n";
  // human summary on stderr keeps stdout parseable
  std::cerr << prog.name << ": alpha in [" << to_decimal(r.alpha.lo(), 15) << ", " << to_decimal(r.alpha.hi(), 15)
            << "]";
  if (r.beta) std::cerr << ", beta in [" << to_decimal(r.beta->lo(), 12) << ", " << to_decimal(r.beta->hi(), 12) << "]";
  std::cerr << " for u <= " << to_string(r.u_max) << (r.tight ? " (tight)" : "")
            << (r.exhausted ? " (budget exhausted, upper end sound)" : "") << "\n";
  for (auto& s : suggest_splits(sys)) std::cerr << "split suggestion: " << s.text() << "\n";
  return 0;
}

std::vector<long> parse_offsets(const std::string& s) {
  std::vector<long> r;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto dots = tok.find("..");
    if (dots == std::string::npos) {
      r.push_back(std::stol(tok));
      continue;
    }
    long a = std::stol(tok.substr(0, dots)), b = std::stol(tok.substr(dots + 2));
    for (long k = a; a >= b ? k >= b : k <= b; k += a >= b ? -1 : 1) r.push_back(k);
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified relative error bounds for straight-line floating-point programs"};
  app.require_subcommand(1);

  std::string file, umax, steps = "full";
  bool strict = false;
  std::size_t budget = 1000000;
  auto* an = app.add_subcommand("analyze", "bound the relative error of a DSL program");
  an->add_option("program", file, "program file")->required();
  an->add_option("--umax", umax, "largest unit round-off, a rational such as 1/64");
  an->add_option("--steps", steps, "linear or full")->check(CLI::IsMember({"linear", "full"}));
  an->add_flag("--strict-paper-absolute", strict, "absolute model with 2^(l+1) instead of 2^l");
  an->add_option("--budget", budget, "branch-and-bound box budget per stage");

  std::string algo = "algo1", offsets, witness_out;
  int p = 8;
  std::size_t random_n = 0;
  unsigned long seed = 1;
  unsigned workers = 0;
  auto* se = app.add_subcommand("search", "worst-case error search at precision p");
  se->add_option("--algo", algo, "algo1..algo5")->required();
  se->add_option("-p,--precision", p, "precision")->required();
  se->add_option("--offsets", offsets, "y binade offsets, e.g. 0..-8 or 0,-2");
  se->add_option("--random", random_n, "random mode with this many samples");
  se->add_option("--seed", seed, "seed for random mode");
  se->add_option("--workers", workers, "threads (default FPBOUND_WORKERS or 1)");
  se->add_option("--witness-out", witness_out, "write the argmax as a witness file");

  std::string wfile;
  bool with_transcript = true;
  auto* wi = app.add_subcommand("witness", "replay a witness file");
  wi->add_option("file", wfile, "witness JSON")->required();
  wi->add_flag("!--no-transcript", with_transcript, "omit intermediate values");

  std::vector<int> ps{8};
  std::string csv_out, json_out;
  std::size_t report_budget = 20000;
  auto* re = app.add_subcommand("report", "regression matrix against the published bounds");
  re->add_option("--p", ps, "precisions searched")->delimiter(',');
  re->add_option("--budget", report_budget, "branch-and-bound box budget per stage");
  re->add_option("--csv", csv_out, "CSV output file (default stdout)");
  re->add_option("--json", json_out, "JSON output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*an) return analyze(file, umax, steps, strict, budget);
    if (*se) {
      SearchConfig c;
      c.algo = hypot_algo_from_string(algo);
      c.p = p;
      if (!offsets.empty()) c.y_offsets = parse_offsets(offsets);
      if (random_n) {
        c.exhaustive = false;
        c.samples = random_n;
      }
      c.seed = seed;
      c.workers = workers;
      SearchResult r = cmd_search(c);
      std::cout << r.json() << "\n";
      if (!witness_out.empty() && r.x) write_file(witness_out, witness_json(Witness{r.x->fmt, c.algo, *r.x, *r.y}) + "\n");
      return 0;
    }
    if (*wi) {
      Witness w = parse_witness(read_file(wfile));
      ErrorMeasurement m = cmd_witness(w);
      if (!with_transcript) m.transcript.steps.clear();
      std::cout << measurement_json(m, w) << "\n";
      return 0;
    }
    if (*re) {
      ReportConfig rc;
      rc.ps = ps;
      rc.budget = report_budget;
      auto rows = cmd_report(rc);
      if (csv_out.empty()) {
        std::cout << report_csv(rows);
      } else {
        write_file(csv_out, report_csv(rows));
      }
      if (!json_out.empty()) write_file(json_out, report_json(rows) + "\n");
      for (auto& r : rows)
        if (!r.pass()) return 1;
      return 0;
    }
  } catch (const SearchTooLarge& e) {
    std::cerr << "search too large: " << e.what() << "\n";
    return 2;
  } catch (const NotRepresentable& e) {
    std::cerr << "not representable: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
