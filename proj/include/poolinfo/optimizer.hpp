#pragma once

// Non-adaptive design search: a (1+lambda) evolution strategy whose
// offspring form a mutation chain, restarted on a Luby schedule, plus an
// exhaustive comparator for small instances.

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "poolinfo/model.hpp"

namespace poolinfo {

enum class Objective { kMutualInformation, kExpectedConfidence };

std::string_view to_string(Objective objective);

/// Score of a multiset under the objective (bits or probability).
double objective_score(const SecretDistribution& dist, const DesignMultiset& designs,
                       const TestSpec& spec, Objective objective, const Caps& caps = {});

struct ESConfig {
  int lambda = 2;          // offspring chain length per generation
  int base = 100;          // generations per unit of the Luby sequence
  std::int64_t budget = 1000;  // score evaluations
  std::uint64_t seed = 0;
  Objective objective = Objective::kExpectedConfidence;

  void validate() const;
};

struct ESResult {
  DesignMultiset best;
  double score = 0.0;
  std::int64_t evaluations_used = 0;
  int restarts_performed = 0;
  /// Generation counts of every restart period that ran to completion.
  std::vector<std::int64_t> completed_periods;
};

/// i-th term (1-based) of 1,1,2,1,1,2,4,1,1,2,1,1,2,4,8,...
std::uint64_t luby(std::uint64_t i);

using Rng = std::mt19937_64;

/// Flips one of the n*m design bits, chosen uniformly.
DesignMultiset mutate(const DesignMultiset& designs, int n, Rng& rng);

using ScoreFn = std::function<double(const DesignMultiset&)>;
/// Called after every evaluation with (evaluations so far, score, best so far).
using EvaluationObserver = std::function<void(std::int64_t, double, double)>;

/// Runs the restarted ES over any score of m-design multisets on n patients.
ESResult es_optimize(int n, int m, const ScoreFn& score, const ESConfig& cfg,
                     const EvaluationObserver& observer = {});

ESResult es_run(int n, int m, const SecretDistribution& dist, const TestSpec& spec,
                const ESConfig& cfg, const Caps& caps = {});

/// Global optimum over all multisets, enumerated as nondecreasing mask
/// sequences. Requires C(2^n + m - 1, m) <= 10^6. Ties keep the first
/// multiset in lexicographic order.
std::pair<DesignMultiset, double> exhaustive_best(int n, int m, const SecretDistribution& dist,
                                                  const TestSpec& spec, Objective objective,
                                                  const Caps& caps = {});

/// Number of multisets of size m over 2^n designs, as a double.
double multiset_count(int n, int m);

}  // namespace poolinfo
