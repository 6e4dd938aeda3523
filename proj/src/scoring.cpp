#include "poolinfo/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "poolinfo/error.hpp"

namespace poolinfo {

double positive_prob(PoolDesign design, SecretIndex secret, const TestSpec& spec) {
  const Rates rates = spec.rates_for(design.size());
  return design.hits(secret) ? rates.tpr : 1.0 - rates.tnr;
}

double outcome_likelihood(const OutcomeVector& t, SecretIndex secret,
                          const DesignMultiset& designs, const TestSpec& spec) {
  if (t.size() != designs.size()) {
    throw Error(ErrorCode::kLengthMismatch, "outcome vector and design multiset differ in length");
  }
  double likelihood = 1.0;
  for (std::size_t j = 0; j < designs.size(); ++j) {
    const double p = positive_prob(designs[j], secret, spec);
    likelihood *= t[j] ? p : 1.0 - p;
  }
  return likelihood;
}

SecretDistribution posterior(const SecretDistribution& dist, const DesignMultiset& designs,
                             const OutcomeVector& t, const TestSpec& spec) {
  if (t.size() != designs.size()) {
    throw Error(ErrorCode::kLengthMismatch, "outcome vector and design multiset differ in length");
  }
  const auto prior_mass = dist.mass();
  std::vector<double> mass(prior_mass.begin(), prior_mass.end());
  double evidence = 0.0;
  for (std::size_t s = 0; s < mass.size(); ++s) {
    if (mass[s] == 0.0) continue;
    mass[s] *= outcome_likelihood(t, SecretIndex(static_cast<Mask>(s)), designs, spec);
    evidence += mass[s];
  }
  if (!(evidence > 0.0)) {
    throw Error(ErrorCode::kZeroProbabilityOutcome, "observed results have probability zero");
  }
  for (double& w : mass) w /= evidence;
  return SecretDistribution(dist.n(), std::move(mass));
}

double entropy(const SecretDistribution& dist) {
  double h = 0.0;
  for (double w : dist.mass()) {
    if (w > 0.0) h -= w * std::log2(w);
  }
  return std::clamp(h, 0.0, static_cast<double>(dist.n()));
}

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

OutcomeScores outcome_scores(const SecretDistribution& dist, const DesignMultiset& designs,
                             const TestSpec& spec, const Caps& caps) {
  const int n = dist.n();
  const int m = static_cast<int>(designs.size());
  caps.check_tests(n, m);
  const std::size_t size = dist.size();

  std::vector<std::vector<double>> positive(static_cast<std::size_t>(m), std::vector<double>(size));
  for (int j = 0; j < m; ++j) {
    for (std::size_t s = 0; s < size; ++s) {
      positive[j][s] = positive_prob(designs[j], SecretIndex(static_cast<Mask>(s)), spec);
    }
  }

  // Depth-first walk over the outcome tree. levels[j] holds the joint
  // masses Pr[S = s, T_1..j = t_1..j] of the current prefix.
  std::vector<std::vector<double>> levels(static_cast<std::size_t>(m) + 1,
                                          std::vector<double>(size));
  std::copy(dist.mass().begin(), dist.mass().end(), levels[0].begin());

  OutcomeScores scores;
  std::function<void(int, double)> walk = [&](int depth, double prefix_prob) {
    const auto& joint = levels[static_cast<std::size_t>(depth)];
    if (depth == m) {
      // Pr[t] * H(S | T = t) = -sum w log w + Pr[t] log Pr[t]
      double neg_sum = 0.0;
      double best = 0.0;
      for (double w : joint) {
        if (w > 0.0) neg_sum -= w * std::log2(w);
        best = std::max(best, w);
      }
      scores.conditional_entropy += neg_sum + prefix_prob * std::log2(prefix_prob);
      scores.expected_confidence += best;
      return;
    }
    auto& child = levels[static_cast<std::size_t>(depth) + 1];
    const auto& pos = positive[static_cast<std::size_t>(depth)];
    for (int result = 0; result < 2; ++result) {
      double total = 0.0;
      for (std::size_t s = 0; s < size; ++s) {
        const double w = joint[s] * (result ? pos[s] : 1.0 - pos[s]);
        child[s] = w;
        total += w;
      }
      if (total > 0.0) walk(depth + 1, total);
    }
  };
  double total = 0.0;
  for (double w : levels[0]) total += w;
  walk(0, total);

  scores.conditional_entropy = std::max(0.0, scores.conditional_entropy);
  scores.expected_confidence = std::min(1.0, scores.expected_confidence);
  return scores;
}

double conditional_entropy(const SecretDistribution& dist, const DesignMultiset& designs,
                           const TestSpec& spec, const Caps& caps) {
  return outcome_scores(dist, designs, spec, caps).conditional_entropy;
}

double mutual_information(const SecretDistribution& dist, const DesignMultiset& designs,
                          const TestSpec& spec, const Caps& caps) {
  const double mi = entropy(dist) - conditional_entropy(dist, designs, spec, caps);
  return std::max(0.0, mi);
}

double expected_confidence(const SecretDistribution& dist, const DesignMultiset& designs,
                           const TestSpec& spec, const Caps& caps) {
  return outcome_scores(dist, designs, spec, caps).expected_confidence;
}

std::pair<SecretIndex, double> ml_diagnosis(const SecretDistribution& dist) {
  const auto mass = dist.mass();
  std::size_t best = 0;
  for (std::size_t s = 1; s < mass.size(); ++s) {
    if (mass[s] > mass[best]) best = s;
  }
  return {SecretIndex(static_cast<Mask>(best)), mass[best]};
}

std::vector<double> marginals(const SecretDistribution& dist) {
  std::vector<double> out(static_cast<std::size_t>(dist.n()), 0.0);
  const auto mass = dist.mass();
  for (std::size_t s = 0; s < mass.size(); ++s) {
    for (int i = 0; i < dist.n(); ++i) {
      if ((s >> i) & 1U) out[static_cast<std::size_t>(i)] += mass[s];
    }
  }
  for (double& p : out) p = std::clamp(p, 0.0, 1.0);
  return out;
}

DiagnosisReport diagnose(const SecretDistribution& dist) {
  auto [secret, confidence] = ml_diagnosis(dist);
  return DiagnosisReport{secret, confidence, marginals(dist), entropy(dist)};
}

}  // namespace poolinfo
