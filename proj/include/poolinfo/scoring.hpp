#pragma once

// Bayesian updating and the information-theoretic scores of a design
// multiset. All functions are pure; entropies are in bits.

#include <utility>

#include "poolinfo/model.hpp"

namespace poolinfo {

/// Pr[positive | secret] for one pooled test: tpr of the pool size on a
/// hit, 1 - tnr otherwise.
double positive_prob(PoolDesign design, SecretIndex secret, const TestSpec& spec);

/// Pr[T = t | S = secret]; tests are conditionally independent given the secret.
double outcome_likelihood(const OutcomeVector& t, SecretIndex secret,
                          const DesignMultiset& designs, const TestSpec& spec);

/// Throws kZeroProbabilityOutcome when the observed results are impossible.
SecretDistribution posterior(const SecretDistribution& dist, const DesignMultiset& designs,
                             const OutcomeVector& t, const TestSpec& spec);

double entropy(const SecretDistribution& dist);

/// Both outcome-averaged scores come out of one walk over the 2^m outcomes.
struct OutcomeScores {
  double conditional_entropy = 0.0;
  double expected_confidence = 0.0;
};

OutcomeScores outcome_scores(const SecretDistribution& dist, const DesignMultiset& designs,
                             const TestSpec& spec, const Caps& caps = {});

double conditional_entropy(const SecretDistribution& dist, const DesignMultiset& designs,
                           const TestSpec& spec, const Caps& caps = {});

double mutual_information(const SecretDistribution& dist, const DesignMultiset& designs,
                          const TestSpec& spec, const Caps& caps = {});

double expected_confidence(const SecretDistribution& dist, const DesignMultiset& designs,
                           const TestSpec& spec, const Caps& caps = {});

/// Most probable secret and its mass; ties go to the smallest index.
std::pair<SecretIndex, double> ml_diagnosis(const SecretDistribution& dist);

/// Entry i is Pr[patient i+1 infected].
std::vector<double> marginals(const SecretDistribution& dist);

DiagnosisReport diagnose(const SecretDistribution& dist);

/// Binary entropy in bits with 0 log 0 = 0.
double binary_entropy(double p);

}  // namespace poolinfo
