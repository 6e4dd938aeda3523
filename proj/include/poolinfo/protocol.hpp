#pragma once

// The plain-text job format shared with the original web tool:
//
//   3 3                 n m
//   0.99 0.95           tpr tnr
//   0.1 0.1 0.1         priors
//   eval                or: optim <objective>
//   011 / 101 / 110     eval: m designs, then one line of m result bits
//                       optim: "ga-luby <lambda> <base>" or "exhaustive", then a budget
//
// Blank lines anywhere are ignored. Errors name the offending line.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "poolinfo/adaptive.hpp"
#include "poolinfo/model.hpp"
#include "poolinfo/optimizer.hpp"

namespace poolinfo {

enum class JobMode { kEval, kOptim };
enum class OptimizerKind { kEvolution, kExhaustive };

struct EvalPayload {
  DesignMultiset designs;
  OutcomeVector results;

  friend bool operator==(const EvalPayload&, const EvalPayload&) = default;
};

struct OptimPayload {
  Objective objective = Objective::kExpectedConfidence;
  OptimizerKind optimizer = OptimizerKind::kEvolution;
  int lambda = 2;
  int base = 100;
  std::int64_t budget = 1000;

  friend bool operator==(const OptimPayload&, const OptimPayload&) = default;
};

struct JobInput {
  int n = 0;
  int m = 0;
  double tpr = 1.0;
  double tnr = 1.0;
  std::vector<double> priors;
  JobMode mode = JobMode::kEval;
  EvalPayload eval;    // meaningful in eval mode
  OptimPayload optim;  // meaningful in optim mode

  TestSpec spec() const { return TestSpec(tpr, tnr); }
  Prior prior() const { return Prior(priors); }

  friend bool operator==(const JobInput&, const JobInput&) = default;
};

/// Throws kParse ("line N: ...") on malformed input and kCapExceeded past caps.
JobInput parse_job(std::string_view text, const Caps& caps = {});

/// Inverse of parse_job; reals use the shortest round-tripping form.
std::string format_job(const JobInput& input);

/// "most probable diagnosis / confidence / marginals" block.
std::string format_report(const DiagnosisReport& report, int n);

std::string run_eval(const JobInput& input, const Caps& caps = {});

struct OptimOutcome {
  DesignMultiset designs;  // sorted by mask
  double score = 0.0;
  std::int64_t evaluations_used = 0;
  int restarts_performed = 0;
};

OptimOutcome optimize(const JobInput& input, std::uint64_t seed, const Caps& caps = {});
std::string format_optim(const OptimOutcome& outcome, Objective objective, int n);
std::string run_optim(const JobInput& input, std::uint64_t seed, const Caps& caps = {});

/// Same fields as the text forms, as one JSON document.
std::string run_eval_json(const JobInput& input, const Caps& caps = {});
std::string run_optim_json(const JobInput& input, std::uint64_t seed, const Caps& caps = {});

/// One line per adaptive round; shared by the REPL and scripted policy runs.
std::string format_step(int index, const PolicyStep& step, int n);

/// Every step line, a blank line, then the final report block.
std::string format_trace(const PolicyTrace& trace);

/// Shortest decimal that parses back to the same double.
std::string format_exact(double value);

}  // namespace poolinfo
