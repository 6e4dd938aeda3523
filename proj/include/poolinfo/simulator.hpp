#pragma once

// Monte-Carlo comparison of testing strategies on sampled secrets and
// noisy lab results.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "poolinfo/dorfman.hpp"
#include "poolinfo/model.hpp"
#include "poolinfo/optimizer.hpp"

namespace poolinfo::sim {

/// A fixed non-adaptive multiset run in every trial.
struct FixedDesigns {
  DesignMultiset designs;
};

/// A non-adaptive multiset found once by the ES, then run in every trial.
struct EvolvedDesigns {
  int m = 0;
  ESConfig es;
};

struct GreedyAdaptive {
  int m = 0;
};

/// Semi-adaptive: one k-greedy batch per lab round.
struct KGreedy {
  std::vector<int> batches;
};

/// Two-stage pooling: group pools, then individual retests of positive pools.
struct Dorfman {
  DorfmanPlan plan;
};

using Strategy = std::variant<FixedDesigns, EvolvedDesigns, GreedyAdaptive, KGreedy, Dorfman>;

std::string strategy_name(const Strategy& strategy);

struct Scenario {
  std::string id = "scenario";
  Prior prior;
  TestSpec spec;
  Strategy strategy;
  std::int64_t trials = 1000;
  std::uint64_t seed = 0;
  Caps caps;
};

struct TrialRecord {
  SecretIndex truth;
  DesignMultiset designs;
  OutcomeVector outcomes;
  SecretIndex diagnosis;     // ML secret of the terminal posterior
  double confidence = 0.0;   // posterior mass of the diagnosis
  bool correct = false;
  int tests_used = 0;
  double entropy_bits = 0.0;
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// ML-bit sensitivity/specificity of one patient; empty when the patient
/// was never (or always) infected across trials.
struct PatientStats {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::int64_t infected_trials = 0;
  std::int64_t healthy_trials = 0;
};

struct Report {
  std::string id;
  std::string strategy;
  std::int64_t trials = 0;
  Estimate accuracy;
  Estimate tests_used;
  Estimate entropy_bits;
  Estimate confidence;
  std::vector<PatientStats> patients;
};

/// Independent substream for one trial, derived from (seed, trial).
Rng trial_rng(std::uint64_t seed, std::uint64_t trial);

SecretIndex sample_secret(const Prior& prior, Rng& rng);
bool sample_outcome(PoolDesign design, SecretIndex secret, const TestSpec& spec, Rng& rng);

/// Receives every trial in index order after the run.
using TrialSink = std::function<void(std::int64_t, const TrialRecord&)>;

/// Deterministic in the scenario; `threads` only changes wall time.
Report run_scenario(const Scenario& scenario, const TrialSink& sink = {}, unsigned threads = 0);

/// Per-trial CSV: scenario_id,trial,tests_used,correct,entropy_bits,
/// confidence,marginal_pred_1..n,true_1..n
std::string trial_csv_header(int n);
std::string trial_csv_row(const std::string& scenario_id, std::int64_t trial,
                          const TrialRecord& record, int n);

/// One row per scenario.
std::string report_csv_header();
std::string report_csv_row(const Report& report);

/// Runs every scenario and returns the comparison table (header + rows).
std::string compare(const std::vector<Scenario>& scenarios, unsigned threads = 0);

/// Parses key = value scenario files. Keys before the first [section] are
/// defaults shared by every section; each section is one scenario.
std::vector<Scenario> parse_scenarios(const std::string& text);

}  // namespace poolinfo::sim
