#pragma once

// Brute-force reference computations. Nothing here calls into the fast
// scoring paths; tests compare the two.

#include <vector>

#include "poolinfo/dorfman.hpp"
#include "poolinfo/model.hpp"

namespace poolinfo::oracle {

struct JointScores {
  double conditional_entropy = 0.0;
  double expected_confidence = 0.0;
};

/// Materializes Pr[S = s, T = t] for all 2^(n+m) pairs and sums directly.
/// Requires n + m <= 20.
JointScores naive_joint_scores(const SecretDistribution& dist, const DesignMultiset& designs,
                               const TestSpec& spec);

/// Complete binary decision tree in heap order: node i branches to 2i+1 on
/// a negative result and 2i+2 on a positive one. depth == number of tests.
struct PolicyTree {
  int depth = 0;
  std::vector<PoolDesign> nodes;

  PoolDesign design_at(std::size_t node) const { return nodes.at(node); }
};

struct OptimalPolicy {
  PolicyTree tree;
  double expected_information_bits = 0.0;
};

/// Expected terminal mutual information H(S) - E_paths[H(S | path)] of a tree.
double policy_information(const SecretDistribution& dist, const TestSpec& spec,
                          const PolicyTree& tree);

/// Enumerates every policy tree of the given depth. Requires n <= 3, budget <= 2.
OptimalPolicy optimal_adaptive_policy(const SecretDistribution& dist, const TestSpec& spec,
                                      int budget);

/// g + sum over groups of |group| * Pr[group pool positive].
double dorfman_expected_tests(const DorfmanPlan& plan, const Prior& prior, const TestSpec& spec);

/// Exact per-patient sensitivity and specificity of the ML diagnosis under
/// a fixed design multiset, by enumerating secrets and outcomes.
struct PatientRates {
  double sensitivity = 0.0;  // Pr[ML bit = 1 | infected]; NaN if never infected
  double specificity = 0.0;  // Pr[ML bit = 0 | healthy]; NaN if never healthy
};

std::vector<PatientRates> ml_patient_rates(const SecretDistribution& dist,
                                           const DesignMultiset& designs, const TestSpec& spec);

}  // namespace poolinfo::oracle
