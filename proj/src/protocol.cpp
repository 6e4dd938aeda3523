#include "poolinfo/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "json.hpp"
#include "poolinfo/error.hpp"
#include "poolinfo/format.hpp"
#include "poolinfo/scoring.hpp"

namespace poolinfo {
namespace {

struct Line {
  int number = 0;
  std::vector<std::string> words;
};

[[noreturn]] void fail(int line, const std::string& message, std::string field = {}) {
  throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + message, std::move(field));
}

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  for (int number = 1; std::getline(in, raw); ++number) {
    std::istringstream words(raw);
    Line line{number, {}};
    for (std::string w; words >> w;) line.words.push_back(w);
    if (!line.words.empty()) out.push_back(std::move(line));
  }
  return out;
}

template <typename T>
T parse_number(const std::string& word, int line, const std::string& what) {
  T value{};
  const auto* end = word.data() + word.size();
  const auto [ptr, ec] = std::from_chars(word.data(), end, value);
  if (ec != std::errc() || ptr != end) fail(line, what + " must be a number, got '" + word + "'", what);
  return value;
}

double parse_probability(const std::string& word, int line, const std::string& what) {
  const double p = parse_number<double>(word, line, what);
  if (!(p >= 0.0 && p <= 1.0)) fail(line, what + " must lie in [0, 1], got '" + word + "'", what);
  return p;
}

Mask parse_row(const std::string& word, int n, int line, const std::string& what) {
  if (static_cast<int>(word.size()) != n) {
    fail(line, what + " '" + word + "' must have " + std::to_string(n) + " characters", what);
  }
  if (word.find_first_not_of("01") != std::string::npos) {
    fail(line, what + " '" + word + "' may only contain 0 and 1", what);
  }
  return parse_bits(word);
}

Objective parse_objective(const std::string& token, int line) {
  if (token == "confidence") return Objective::kExpectedConfidence;
  if (token == "mi" || token == "mutual_information" || token == "information" || token == "entropy") {
    return Objective::kMutualInformation;
  }
  fail(line, "unknown objective '" + token + "'", "objective");
}

void expect_words(const Line& line, std::size_t count, const std::string& what) {
  if (line.words.size() != count) {
    fail(line.number, what + " expects " + std::to_string(count) + " value(s), got " +
                          std::to_string(line.words.size()));
  }
}

class Cursor {
 public:
  explicit Cursor(std::vector<Line> lines) : lines_(std::move(lines)) {}

  const Line& next(const std::string& what) {
    if (pos_ == lines_.size()) {
      const int last = lines_.empty() ? 1 : lines_.back().number + 1;
      fail(last, "unexpected end of input, expected " + what);
    }
    return lines_[pos_++];
  }

  void finish() const {
    if (pos_ != lines_.size()) fail(lines_[pos_].number, "unexpected trailing content");
  }

 private:
  std::vector<Line> lines_;
  std::size_t pos_ = 0;
};

DiagnosisReport eval_report(const JobInput& input, const Caps& caps) {
  if (input.mode != JobMode::kEval) throw Error(ErrorCode::kInvalidArgument, "input is not in eval mode");
  const auto prior = prior_to_distribution(input.prior(), caps);
  return diagnose(posterior(prior, input.eval.designs, input.eval.results, input.spec()));
}

}  // namespace

JobInput parse_job(std::string_view text, const Caps& caps) {
  Cursor cur(split_lines(text));
  JobInput in;

  const auto& sizes = cur.next("'n m'");
  expect_words(sizes, 2, "the size line");
  in.n = parse_number<int>(sizes.words[0], sizes.number, "n");
  in.m = parse_number<int>(sizes.words[1], sizes.number, "m");
  if (in.n < 1) fail(sizes.number, "n must be at least 1", "n");
  if (in.m < 0) fail(sizes.number, "m must be non-negative", "m");
  caps.check_tests(in.n, in.m);

  const auto& rates = cur.next("'tpr tnr'");
  expect_words(rates, 2, "the rate line");
  in.tpr = parse_probability(rates.words[0], rates.number, "tpr");
  in.tnr = parse_probability(rates.words[1], rates.number, "tnr");

  const auto& priors = cur.next("priors");
  expect_words(priors, static_cast<std::size_t>(in.n), "the prior line");
  for (const auto& w : priors.words) in.priors.push_back(parse_probability(w, priors.number, "priors"));

  const auto& mode = cur.next("a mode");
  if (mode.words[0] == "eval") {
    expect_words(mode, 1, "eval");
    in.mode = JobMode::kEval;
    for (int j = 0; j < in.m; ++j) {
      const auto& row = cur.next("design " + std::to_string(j + 1));
      expect_words(row, 1, "a design line");
      in.eval.designs.emplace_back(parse_row(row.words[0], in.n, row.number, "design"));
    }
    // With m = 0 the results line is empty and so indistinguishable from a blank.
    if (in.m > 0) {
      const auto& results = cur.next("the results line");
      expect_words(results, 1, "the results line");
      const Mask bits = parse_row(results.words[0], in.m, results.number, "results");
      for (int j = 0; j < in.m; ++j) in.eval.results.push_back((bits >> j) & 1U);
    }
  } else if (mode.words[0] == "optim") {
    expect_words(mode, 2, "optim");
    in.mode = JobMode::kOptim;
    in.optim.objective = parse_objective(mode.words[1], mode.number);
    const auto& opt = cur.next("an optimizer line");
    if (opt.words[0] == "ga-luby") {
      expect_words(opt, 3, "ga-luby");
      in.optim.optimizer = OptimizerKind::kEvolution;
      in.optim.lambda = parse_number<int>(opt.words[1], opt.number, "lambda");
      in.optim.base = parse_number<int>(opt.words[2], opt.number, "base");
      if (in.optim.lambda < 1) fail(opt.number, "lambda must be at least 1", "lambda");
      if (in.optim.base < 1) fail(opt.number, "base must be at least 1", "base");
    } else if (opt.words[0] == "exhaustive") {
      expect_words(opt, 1, "exhaustive");
      in.optim.optimizer = OptimizerKind::kExhaustive;
    } else {
      fail(opt.number, "unknown optimizer '" + opt.words[0] + "'", "optimizer");
    }
    const auto& budget = cur.next("a budget line");
    expect_words(budget, 1, "the budget line");
    in.optim.budget = parse_number<std::int64_t>(budget.words[0], budget.number, "budget");
    if (in.optim.budget < 1) fail(budget.number, "budget must be at least 1", "budget");
  } else {
    fail(mode.number, "unknown mode '" + mode.words[0] + "'", "mode");
  }
  cur.finish();
  return in;
}

std::string format_exact(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string format_job(const JobInput& in) {
  std::string out = std::to_string(in.n) + " " + std::to_string(in.m) + "\n\n";
  out += format_exact(in.tpr) + " " + format_exact(in.tnr) + "\n\n";
  for (std::size_t i = 0; i < in.priors.size(); ++i) out += (i ? " " : "") + format_exact(in.priors[i]);
  out += "\n\n";
  if (in.mode == JobMode::kEval) {
    out += "eval\n\n";
    for (const auto& d : in.eval.designs) out += d.to_string(in.n) + "\n";
    out += "\n";
    for (bool r : in.eval.results) out += r ? '1' : '0';
    out += "\n";
  } else {
    out += std::string("optim ") +
           (in.optim.objective == Objective::kExpectedConfidence ? "confidence" : "mi") + "\n";
    if (in.optim.optimizer == OptimizerKind::kEvolution) {
      out += "ga-luby " + std::to_string(in.optim.lambda) + " " + std::to_string(in.optim.base) + "\n";
    } else {
      out += "exhaustive\n";
    }
    out += std::to_string(in.optim.budget) + "\n";
  }
  return out;
}

std::string format_report(const DiagnosisReport& report, int n) {
  std::string out = "most probable diagnosis: " + report.ml_secret.to_string(n) + "\n";
  out += "confidence: " + format_g6(report.confidence) + "\n\nmarginals: ";
  for (double p : report.marginals) out += format_g6(p) + " ";
  return out + "\n";
}

std::string run_eval(const JobInput& input, const Caps& caps) {
  return format_report(eval_report(input, caps), input.n);
}

OptimOutcome optimize(const JobInput& input, std::uint64_t seed, const Caps& caps) {
  if (input.mode != JobMode::kOptim) throw Error(ErrorCode::kInvalidArgument, "input is not in optim mode");
  const auto dist = prior_to_distribution(input.prior(), caps);
  OptimOutcome out;
  if (input.optim.optimizer == OptimizerKind::kExhaustive) {
    auto [designs, score] = exhaustive_best(input.n, input.m, dist, input.spec(), input.optim.objective, caps);
    out.designs = std::move(designs);
    out.score = score;
    out.evaluations_used = static_cast<std::int64_t>(multiset_count(input.n, input.m));
  } else {
    const ESConfig cfg{.lambda = input.optim.lambda, .base = input.optim.base, .budget = input.optim.budget,
                       .seed = seed, .objective = input.optim.objective};
    auto r = es_run(input.n, input.m, dist, input.spec(), cfg, caps);
    out.designs = std::move(r.best);
    out.score = r.score;
    out.evaluations_used = r.evaluations_used;
    out.restarts_performed = r.restarts_performed;
  }
  std::sort(out.designs.begin(), out.designs.end());
  return out;
}

std::string format_optim(const OptimOutcome& outcome, Objective objective, int n) {
  std::string out = objective == Objective::kExpectedConfidence ? "expected confidence:\n"
                                                                 : "expected mutual information:\n";
  out += format_g6(outcome.score) + "\n\ntests (one per line):\n";
  for (const auto& d : outcome.designs) out += d.to_string(n) + "\n";
  return out;
}

std::string run_optim(const JobInput& input, std::uint64_t seed, const Caps& caps) {
  return format_optim(optimize(input, seed, caps), input.optim.objective, input.n);
}

std::string run_eval_json(const JobInput& input, const Caps& caps) {
  const auto r = eval_report(input, caps);
  nlohmann::json j{{"diagnosis", r.ml_secret.to_string(input.n)},
                   {"confidence", r.confidence},
                   {"marginals", r.marginals},
                   {"entropy_bits", r.entropy_bits}};
  return j.dump(2) + "\n";
}

std::string run_optim_json(const JobInput& input, std::uint64_t seed, const Caps& caps) {
  const auto r = optimize(input, seed, caps);
  std::vector<std::string> designs;
  for (const auto& d : r.designs) designs.push_back(d.to_string(input.n));
  nlohmann::json j{{"objective", std::string(to_string(input.optim.objective))},
                   {"score", r.score},
                   {"designs", designs},
                   {"evaluations_used", r.evaluations_used},
                   {"restarts_performed", r.restarts_performed}};
  return j.dump(2) + "\n";
}

std::string format_step(int index, const PolicyStep& step, int n) {
  return "step " + std::to_string(index) + ": test " + step.design.to_string(n) + " result " +
         (step.result ? "1" : "0") + " expected gain " + format_g6(step.expected_gain_bits) +
         " bits, entropy " + format_g6(step.entropy_after_bits) + " bits\n";
}

std::string format_trace(const PolicyTrace& trace) {
  std::string out;
  const int n = trace.session.n();
  for (std::size_t i = 0; i < trace.steps.size(); ++i) out += format_step(static_cast<int>(i) + 1, trace.steps[i], n);
  return out + "\n" + format_report(trace.session.report(), n);
}

}  // namespace poolinfo
