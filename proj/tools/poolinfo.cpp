// Command-line front end. Exit codes: 0 success, 1 usage or parse error,
// 2 domain error, 3 size cap exceeded.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "poolinfo/adaptive.hpp"
#include "poolinfo/dorfman.hpp"
#include "poolinfo/error.hpp"
#include "poolinfo/format.hpp"
#include "poolinfo/oracles.hpp"
#include "poolinfo/protocol.hpp"
#include "poolinfo/scoring.hpp"
#include "poolinfo/service.hpp"
#include "poolinfo/simulator.hpp"

using namespace poolinfo;

namespace {

enum Exit { kOk = 0, kUsage = 1, kDomain = 2, kCap = 3 };

struct Common {
  std::uint64_t seed = 0;
  std::string output;
  std::string format = "text";
  Caps caps = Caps::from_env();
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("-o,--output", c.output, "Write results to this file instead of stdout");
  app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  app->add_option("--max-n", c.caps.max_n, "Cap on patients (env POOLINFO_MAX_N)")->capture_default_str();
  app->add_option("--max-m", c.caps.max_m, "Cap on tests in one multiset (env POOLINFO_MAX_M)")->capture_default_str();
  app->add_option("--max-joint", c.caps.max_joint, "Cap on n + m for exact scoring (env POOLINFO_MAX_JOINT)")
      ->capture_default_str();
  app->add_option("--max-greedy-n", c.caps.max_greedy_n,
                  "Largest n for exhaustive greedy design search (env POOLINFO_MAX_GREEDY_N)")
      ->capture_default_str();
}

std::string read_all(std::istream& in) {
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string read_source(const std::string& path) {
  if (path.empty() || path == "-") return read_all(std::cin);
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open '" + path + "'");
  return read_all(in);
}

/// stdout unless an output path was given.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error(ErrorCode::kInvalidArgument, "cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<double> parse_reals(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string w;
  while (in >> w) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(w, &used));
      if (used != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, what + ": '" + w + "' is not a number", what);
    }
  }
  return out;
}

struct ModelOptions {
  std::string priors;
  double tpr = 1.0;
  double tnr = 1.0;

  void add(CLI::App* app) {
    app->add_option("--priors", priors, "Per-patient infection probabilities, space separated")->required();
    app->add_option("--tpr", tpr, "Test sensitivity")->required();
    app->add_option("--tnr", tnr, "Test specificity")->required();
  }
  Prior prior() const { return Prior(parse_reals(priors, "priors")); }
  TestSpec spec() const { return TestSpec(tpr, tnr); }
};

int run_job(const std::string& input_path, const Common& c) {
  const auto input = parse_job(read_source(input_path), c.caps);
  Output out(c.output);
  const bool json = c.format == "json";
  if (input.mode == JobMode::kEval) {
    out.stream() << (json ? run_eval_json(input, c.caps) : run_eval(input, c.caps));
  } else {
    out.stream() << (json ? run_optim_json(input, c.seed, c.caps) : run_optim(input, c.seed, c.caps));
  }
  return kOk;
}

/// Reads commands from `in`: "0"/"1" answer the recommended design,
/// "<design> <result>" records a different pool, plus undo/report/quit.
int run_adaptive(const ModelOptions& model, int tests, std::istream& in, bool interactive, const Common& c) {
  GreedyOptions opts;
  opts.caps = c.caps;
  opts.fallback.seed = c.seed;
  Session session(model.prior(), model.spec(), tests, c.caps);
  const int n = session.n();
  const double h0 = entropy(session.current());
  std::vector<PolicyStep> steps;
  Output output(c.output);
  auto& out = output.stream();

  std::optional<Recommendation> rec;
  auto prompt = [&] {
    if (session.remaining_budget() == 0) return;
    rec = greedy_next_design(session.current(), session.spec(), opts);
    if (interactive) {
      std::cerr << "next test: " << rec->designs.front().to_string(n) << " (expected gain "
                << format_g6(rec->expected_gain_bits) << " bits, " << session.remaining_budget()
                << " left); enter 0, 1, '<design> <result>', undo, report or quit\n> " << std::flush;
    }
  };

  prompt();
  std::string line;
  while (session.remaining_budget() > 0 && std::getline(in, line)) {
    std::istringstream words(line);
    std::vector<std::string> w;
    for (std::string s; words >> s;) w.push_back(s);
    if (w.empty()) continue;
    try {
      if (w[0] == "quit" || w[0] == "q") break;
      if (w[0] == "report") {
        out << format_report(session.report(), n);
      } else if (w[0] == "undo") {
        session = session.undo();
        steps.pop_back();
        out << "undo: step " << steps.size() + 1 << " removed\n";
      } else {
        PoolDesign design = rec->designs.front();
        double gain = rec->expected_gain_bits;
        std::string result = w[0];
        if (w.size() == 2) {
          if (static_cast<int>(w[0].size()) != n || w[0].find_first_not_of("01") != std::string::npos) {
            throw Error(ErrorCode::kParse, "design must be " + std::to_string(n) + " characters of 0/1");
          }
          design = PoolDesign::parse(w[0]);
          gain = mutual_information(session.current(), {design}, session.spec(), c.caps);
          result = w[1];
        } else if (w.size() != 1) {
          throw Error(ErrorCode::kParse, "unrecognized command '" + line + "'");
        }
        if (result != "0" && result != "1") throw Error(ErrorCode::kParse, "result must be 0 or 1");
        session = session.observe(design, result == "1");
        const double h = entropy(session.current());
        steps.push_back({design, result == "1", gain, h, h0 - h});
        out << format_step(static_cast<int>(steps.size()), steps.back(), n) << std::flush;
      }
    } catch (const Error& e) {
      if (!interactive) throw;
      std::cerr << "error: " << e.what() << "\n";
    }
    prompt();
  }
  out << "\n" << format_report(session.report(), n);
  return kOk;
}

int run_simulate(const std::string& config, const std::string& trials_csv, unsigned threads, const Common& c) {
  auto scenarios = sim::parse_scenarios(read_source(config));
  for (auto& sc : scenarios) sc.caps = c.caps;
  std::ofstream csv;
  if (!trials_csv.empty()) {
    for (const auto& sc : scenarios) {
      if (sc.prior.n() != scenarios.front().prior.n()) {
        throw Error(ErrorCode::kInvalidArgument, "scenarios written to one trial CSV must share n", "csv");
      }
    }
    csv.open(trials_csv);
    if (!csv) throw Error(ErrorCode::kInvalidArgument, "cannot write '" + trials_csv + "'");
    csv << sim::trial_csv_header(scenarios.front().prior.n()) << "\n";
  }
  Output output(c.output);
  auto& out = output.stream();
  nlohmann::json rows = nlohmann::json::array();
  if (c.format == "text") out << sim::report_csv_header() << "\n";
  for (const auto& sc : scenarios) {
    sim::TrialSink sink;
    if (csv.is_open()) {
      sink = [&](std::int64_t t, const sim::TrialRecord& r) {
        csv << sim::trial_csv_row(sc.id, t, r, sc.prior.n()) << "\n";
      };
    }
    const auto report = run_scenario(sc, sink, threads);
    if (c.format == "text") {
      out << sim::report_csv_row(report) << "\n";
    } else {
      auto estimate = [](const sim::Estimate& e) { return nlohmann::json{{"mean", e.mean}, {"std_error", e.std_error}}; };
      nlohmann::json patients = nlohmann::json::array();
      for (const auto& p : report.patients) {
        patients.push_back({{"sensitivity", p.sensitivity ? nlohmann::json(*p.sensitivity) : nlohmann::json()},
                            {"specificity", p.specificity ? nlohmann::json(*p.specificity) : nlohmann::json()}});
      }
      rows.push_back({{"scenario_id", report.id},
                      {"strategy", report.strategy},
                      {"trials", report.trials},
                      {"accuracy", estimate(report.accuracy)},
                      {"tests_used", estimate(report.tests_used)},
                      {"entropy_bits", estimate(report.entropy_bits)},
                      {"confidence", estimate(report.confidence)},
                      {"patients", patients}});
    }
  }
  if (c.format == "json") out << rows.dump(2) << "\n";
  return kOk;
}

std::string designs_line(const DesignMultiset& designs, int n) {
  std::string s;
  for (const auto& d : designs) s += (s.empty() ? "" : " ") + d.to_string(n);
  return s;
}

int run_oracle_naive(const std::string& input_path, const Common& c) {
  const auto input = parse_job(read_source(input_path), c.caps);
  if (input.mode != JobMode::kEval) throw Error(ErrorCode::kInvalidArgument, "naive scoring needs an eval input");
  if (input.n + input.m > 20) throw Error(ErrorCode::kCapExceeded, "naive scoring is limited to n + m <= 20");
  const auto dist = prior_to_distribution(input.prior(), c.caps);
  const auto s = oracle::naive_joint_scores(dist, input.eval.designs, input.spec());
  Output out(c.output);
  if (c.format == "json") {
    out.stream() << nlohmann::json{{"conditional_entropy_bits", s.conditional_entropy},
                                   {"mutual_information_bits", entropy(dist) - s.conditional_entropy},
                                   {"expected_confidence", s.expected_confidence}}
                        .dump(2)
                 << "\n";
  } else {
    out.stream() << "conditional entropy: " << format_g6(s.conditional_entropy) << "\n"
                 << "mutual information: " << format_g6(entropy(dist) - s.conditional_entropy) << "\n"
                 << "expected confidence: " << format_g6(s.expected_confidence) << "\n";
  }
  return kOk;
}

int run_oracle_policy(const ModelOptions& model, int budget, const Common& c) {
  const auto prior = model.prior();
  if (prior.n() > 3 || budget > 2) throw Error(ErrorCode::kCapExceeded, "policy enumeration is limited to n <= 3, budget <= 2");
  const auto dist = prior_to_distribution(prior, c.caps);
  const auto best = oracle::optimal_adaptive_policy(dist, model.spec(), budget);
  GreedyOptions opts;
  opts.caps = c.caps;
  const double greedy = greedy_expected_information(dist, model.spec(), budget, opts);
  Output out(c.output);
  if (c.format == "json") {
    out.stream() << nlohmann::json{{"optimal_information_bits", best.expected_information_bits},
                                   {"greedy_information_bits", greedy},
                                   {"tree", designs_line(best.tree.nodes, prior.n())}}
                        .dump(2)
                 << "\n";
  } else {
    out.stream() << "optimal adaptive information: " << format_g6(best.expected_information_bits) << "\n"
                 << "greedy adaptive information: " << format_g6(greedy) << "\n"
                 << "optimal tree (heap order): " << designs_line(best.tree.nodes, prior.n()) << "\n";
  }
  return kOk;
}

int run_oracle_dorfman(const ModelOptions& model, const std::vector<int>& sizes, const Common& c) {
  const auto prior = model.prior();
  const auto plan = DorfmanPlan::from_sizes(prior.n(), sizes);
  const double tests = oracle::dorfman_expected_tests(plan, prior, model.spec());
  Output out(c.output);
  if (c.format == "json") {
    out.stream() << nlohmann::json{{"expected_tests", tests}}.dump(2) << "\n";
  } else {
    out.stream() << "expected tests: " << format_g6(tests) << "\n";
  }
  return kOk;
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kCapExceeded:
      return kCap;
    case ErrorCode::kParse:
      return kUsage;
    default:
      return kDomain;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact Bayesian group testing: design, evaluate and simulate pooled tests"};
  app.require_subcommand(1);
  Common common;

  std::string run_input;
  auto* run = app.add_subcommand("run", "Evaluate or optimize a job in the plain-text format (file or stdin)");
  run->add_option("input", run_input, "Job file; '-' or absent reads stdin");
  add_common(run, common);

  ModelOptions adaptive_model;
  int adaptive_tests = 0;
  std::string script;
  auto* adaptive = app.add_subcommand("adaptive", "Greedy adaptive loop: recommends one pool at a time");
  adaptive_model.add(adaptive);
  adaptive->add_option("-m,--tests", adaptive_tests, "Test budget")->required()->check(CLI::NonNegativeNumber);
  adaptive->add_option("--script", script, "Read commands from this file instead of the terminal");
  add_common(adaptive, common);

  std::string config, trials_csv;
  unsigned threads = 0;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo comparison of strategies from a scenario file");
  simulate->add_option("--config", config, "Scenario file ('-' reads stdin)")->required();
  simulate->add_option("--csv", trials_csv, "Write one row per trial to this file");
  simulate->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
  add_common(simulate, common);

  auto* oracle = app.add_subcommand("oracle", "Brute-force reference computations");
  oracle->require_subcommand(1);
  std::string naive_input;
  auto* naive = oracle->add_subcommand("naive", "Score an eval job by enumerating the full joint table");
  naive->add_option("input", naive_input, "Eval job file; '-' or absent reads stdin");
  add_common(naive, common);
  ModelOptions policy_model;
  int policy_budget = 2;
  auto* policy = oracle->add_subcommand("policy", "Optimal adaptive policy by exhaustive tree search (n <= 3)");
  policy_model.add(policy);
  policy->add_option("--budget", policy_budget, "Number of adaptive tests (<= 2)")->capture_default_str();
  add_common(policy, common);
  ModelOptions dorfman_model;
  std::vector<int> group_sizes;
  auto* dorfman = oracle->add_subcommand("dorfman", "Expected tests of two-stage pooling");
  dorfman_model.add(dorfman);
  dorfman->add_option("--groups", group_sizes, "Contiguous group sizes, e.g. --groups 3 3")->required();
  add_common(dorfman, common);

  std::string host = "127.0.0.1";
  int port = 8080;
  SessionService::Options service;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  serve_cmd->add_option("--host", host, "Bind address")->envname("POOLINFO_HOST")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port")->envname("POOLINFO_PORT")->capture_default_str();
  serve_cmd->add_option("--data-dir", service.data_dir, "Directory for session logs (empty: in memory)")
      ->envname("POOLINFO_DATA_DIR");
  serve_cmd->add_option("--cors-origin", service.cors_origin, "Allowed CORS origin")->capture_default_str();
  serve_cmd->add_option("--optimize-ceiling", service.optimize_budget_ceiling, "Largest /optimize budget")
      ->capture_default_str();
  add_common(serve_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return run_job(run_input, common);
    if (*adaptive) {
      if (script.empty()) return run_adaptive(adaptive_model, adaptive_tests, std::cin, true, common);
      std::ifstream in(script);
      if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open '" + script + "'");
      return run_adaptive(adaptive_model, adaptive_tests, in, false, common);
    }
    if (*simulate) return run_simulate(config, trials_csv, threads, common);
    if (*naive) return run_oracle_naive(naive_input, common);
    if (*policy) return run_oracle_policy(policy_model, policy_budget, common);
    if (*dorfman) return run_oracle_dorfman(dorfman_model, group_sizes, common);
    if (*serve_cmd) {
      service.caps = common.caps;
      return serve(service, host, port);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomain;
  }
  return kUsage;
}
