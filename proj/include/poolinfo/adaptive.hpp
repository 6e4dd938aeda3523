#pragma once

// Greedy-adaptive test selection, its semi-adaptive batch variant and the
// session state that drives an interactive lab loop.

#include <functional>
#include <optional>
#include <vector>

#include "poolinfo/model.hpp"
#include "poolinfo/optimizer.hpp"

namespace poolinfo {

struct ScoredDesign {
  PoolDesign design;
  double gain_bits = 0.0;
};

struct Recommendation {
  DesignMultiset designs;
  double expected_gain_bits = 0.0;
  std::vector<ScoredDesign> alternatives;  // runner-up single designs
  bool fallback = false;                   // chosen by ES instead of full enumeration
};

struct GreedyOptions {
  Caps caps;
  int alternatives = 3;
  ESConfig fallback{.lambda = 2, .base = 100, .budget = 2000, .seed = 0,
                    .objective = Objective::kMutualInformation};
};

/// I(S; T(S, d)) for every d in {0,1}^n, indexed by mask. O(n 2^n) via a
/// subset-sum transform of the distribution.
std::vector<double> single_design_gains(const SecretDistribution& dist, const TestSpec& spec);

/// Argmax of the single-test mutual information over all 2^n designs; ties
/// (within 1e-12) go to the smallest mask. Past caps.max_greedy_n the ES
/// searches single designs instead and the result is flagged.
Recommendation greedy_next_design(const SecretDistribution& dist, const TestSpec& spec,
                                  const GreedyOptions& options = {});

/// Builds a batch by repeatedly adding the design that maximizes the joint
/// mutual information of the partial batch.
Recommendation k_greedy_batch(const SecretDistribution& dist, const TestSpec& spec,
                              int batch_size, const GreedyOptions& options = {});

struct Observation {
  PoolDesign design;
  bool result = false;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Adaptive loop state. A value type: observe() and undo() return new
/// sessions. The history is the source of truth; `current` is its posterior.
class Session {
 public:
  Session(Prior prior, TestSpec spec, int budget, const Caps& caps = {});

  /// Rebuilds a session from a recorded history.
  static Session replay(Prior prior, TestSpec spec, int budget,
                        const std::vector<Observation>& history, const Caps& caps = {});

  int n() const { return prior_.n(); }
  const Prior& prior() const { return prior_; }
  const TestSpec& spec() const { return spec_; }
  int budget() const { return budget_; }
  int remaining_budget() const { return budget_ - static_cast<int>(history_.size()); }
  const std::vector<Observation>& history() const { return history_; }
  const SecretDistribution& current() const { return current_; }
  const Caps& caps() const { return caps_; }

  /// Any design may be observed, not only the recommended one.
  Session observe(PoolDesign design, bool result) const;
  /// Drops the last observation and recomputes the posterior from scratch.
  Session undo() const;

  DiagnosisReport report() const;

  /// Posterior recomputed from the prior and the full history.
  SecretDistribution recompute() const;

 private:
  Prior prior_;
  TestSpec spec_;
  int budget_;
  Caps caps_;
  std::vector<Observation> history_;
  SecretDistribution current_;
};

struct PolicyStep {
  PoolDesign design;
  bool result = false;
  double expected_gain_bits = 0.0;
  double entropy_after_bits = 0.0;
  double realized_information_bits = 0.0;  // H(prior) - H(current)
};

struct PolicyTrace {
  Session session;
  std::vector<PolicyStep> steps;
};

/// Supplies the lab result of a queried design.
using ResultSource = std::function<bool(PoolDesign)>;

/// Runs m rounds of greedy_next_design followed by observe.
PolicyTrace run_greedy_policy(const Prior& prior, const TestSpec& spec, int m,
                              const ResultSource& results, const GreedyOptions& options = {});

/// Expected terminal mutual information of the greedy policy over all 2^m
/// outcome paths (zero-probability paths skipped).
double greedy_expected_information(const SecretDistribution& dist, const TestSpec& spec, int m,
                                   const GreedyOptions& options = {});

}  // namespace poolinfo
