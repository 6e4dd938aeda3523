#include "poolinfo/oracles.hpp"

#include <cmath>
#include <limits>

#include "poolinfo/error.hpp"

namespace poolinfo::oracle {

namespace {

bool overlaps(Mask design, std::size_t secret, int n) {
  for (int i = 0; i < n; ++i) {
    if (((design >> i) & 1U) && ((secret >> i) & 1U)) return true;
  }
  return false;
}

int pool_size(Mask design, int n) {
  int k = 0;
  for (int i = 0; i < n; ++i) k += static_cast<int>((design >> i) & 1U);
  return k;
}

double result_prob(Mask design, std::size_t secret, int n, bool positive, const TestSpec& spec) {
  const Rates r = spec.rates_for(pool_size(design, n));
  const double p_pos = overlaps(design, secret, n) ? r.tpr : 1.0 - r.tnr;
  return positive ? p_pos : 1.0 - p_pos;
}

double table_entropy(const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  double h = 0.0;
  for (double x : w) {
    if (x > 0.0) h -= (x / total) * std::log2(x / total);
  }
  return h;
}

std::vector<double> copy_mass(const SecretDistribution& dist) {
  return {dist.mass().begin(), dist.mass().end()};
}

// Sum over reachable leaves of Pr[path] * H(S | path). `joint` holds
// unnormalized masses Pr[S = s, path so far].
double expected_leaf_entropy(const std::vector<double>& joint, int n, const TestSpec& spec,
                             const PolicyTree& tree, std::size_t node, int depth) {
  double prob = 0.0;
  for (double w : joint) prob += w;
  if (prob <= 0.0) return 0.0;
  if (depth == tree.depth) return prob * table_entropy(joint);
  const Mask design = tree.nodes[node].mask();
  double acc = 0.0;
  for (int result = 0; result < 2; ++result) {
    std::vector<double> child(joint.size());
    for (std::size_t s = 0; s < joint.size(); ++s) {
      child[s] = joint[s] * result_prob(design, s, n, result == 1, spec);
    }
    acc += expected_leaf_entropy(child, n, spec, tree, 2 * node + 1 + result, depth + 1);
  }
  return acc;
}

}  // namespace

JointScores naive_joint_scores(const SecretDistribution& dist, const DesignMultiset& designs,
                               const TestSpec& spec) {
  const int n = dist.n();
  const int m = static_cast<int>(designs.size());
  if (n + m > 20) throw Error(ErrorCode::kCapExceeded, "oracle limited to n + m <= 20");
  const std::size_t secrets = std::size_t{1} << n;
  const std::size_t outcomes = std::size_t{1} << m;

  // joint[t * secrets + s] = Pr[S = s] * prod_j Pr[T_j = t_j | s]
  std::vector<double> joint(secrets * outcomes);
  for (std::size_t t = 0; t < outcomes; ++t) {
    for (std::size_t s = 0; s < secrets; ++s) {
      double p = dist.mass()[s];
      for (int j = 0; j < m; ++j) {
        p *= result_prob(designs[static_cast<std::size_t>(j)].mask(), s, n, (t >> j) & 1U, spec);
      }
      joint[t * secrets + s] = p;
    }
  }

  JointScores out;
  for (std::size_t t = 0; t < outcomes; ++t) {
    double p_t = 0.0;
    double best = 0.0;
    for (std::size_t s = 0; s < secrets; ++s) {
      p_t += joint[t * secrets + s];
      if (joint[t * secrets + s] > best) best = joint[t * secrets + s];
    }
    if (p_t <= 0.0) continue;
    for (std::size_t s = 0; s < secrets; ++s) {
      const double p_st = joint[t * secrets + s];
      if (p_st > 0.0) out.conditional_entropy -= p_st * std::log2(p_st / p_t);
    }
    out.expected_confidence += best;
  }
  return out;
}

double policy_information(const SecretDistribution& dist, const TestSpec& spec,
                          const PolicyTree& tree) {
  const auto mass = copy_mass(dist);
  return table_entropy(mass) - expected_leaf_entropy(mass, dist.n(), spec, tree, 0, 0);
}

OptimalPolicy optimal_adaptive_policy(const SecretDistribution& dist, const TestSpec& spec,
                                      int budget) {
  const int n = dist.n();
  if (n > 3 || budget > 2) {
    throw Error(ErrorCode::kCapExceeded, "optimal policy search limited to n <= 3, budget <= 2");
  }
  if (budget < 0) throw Error(ErrorCode::kInvalidArgument, "budget must be non-negative");

  const std::size_t node_count = (std::size_t{1} << budget) - 1;
  const Mask designs = Mask{1} << n;

  OptimalPolicy best;
  best.tree.depth = budget;
  best.tree.nodes.assign(node_count, PoolDesign{});
  best.expected_information_bits = policy_information(dist, spec, best.tree);

  // Odometer over (2^n)^node_count trees, starting at all-zero (already scored).
  PolicyTree tree = best.tree;
  for (;;) {
    std::size_t digit = 0;
    while (digit < node_count) {
      const Mask next = tree.nodes[digit].mask() + 1;
      if (next < designs) {
        tree.nodes[digit] = PoolDesign(next);
        break;
      }
      tree.nodes[digit] = PoolDesign(0);
      ++digit;
    }
    if (digit == node_count) break;
    const double value = policy_information(dist, spec, tree);
    if (value > best.expected_information_bits) {
      best.tree = tree;
      best.expected_information_bits = value;
    }
  }
  return best;
}

double dorfman_expected_tests(const DorfmanPlan& plan, const Prior& prior, const TestSpec& spec) {
  if (plan.n() != prior.n()) {
    throw Error(ErrorCode::kLengthMismatch, "plan and prior disagree on patient count");
  }
  double expected = 0.0;
  for (const auto& group : plan.groups()) {
    double all_healthy = 1.0;
    for (int patient : group) all_healthy *= 1.0 - prior[patient];
    const Rates r = spec.rates_for(static_cast<int>(group.size()));
    const double p_positive = r.tpr * (1.0 - all_healthy) + (1.0 - r.tnr) * all_healthy;
    expected += 1.0 + static_cast<double>(group.size()) * p_positive;
  }
  return expected;
}

std::vector<PatientRates> ml_patient_rates(const SecretDistribution& dist,
                                           const DesignMultiset& designs, const TestSpec& spec) {
  const int n = dist.n();
  const int m = static_cast<int>(designs.size());
  if (n + m > 20) throw Error(ErrorCode::kCapExceeded, "oracle limited to n + m <= 20");
  const std::size_t secrets = std::size_t{1} << n;
  const std::size_t outcomes = std::size_t{1} << m;

  std::vector<double> true_pos(static_cast<std::size_t>(n), 0.0);
  std::vector<double> true_neg(static_cast<std::size_t>(n), 0.0);
  std::vector<double> infected(static_cast<std::size_t>(n), 0.0);
  std::vector<double> joint(secrets);
  for (std::size_t t = 0; t < outcomes; ++t) {
    std::size_t ml = 0;
    double ml_mass = -1.0;
    for (std::size_t s = 0; s < secrets; ++s) {
      double p = dist.mass()[s];
      for (int j = 0; j < m; ++j) {
        p *= result_prob(designs[static_cast<std::size_t>(j)].mask(), s, n, (t >> j) & 1U, spec);
      }
      joint[s] = p;
      if (p > ml_mass) {
        ml = s;
        ml_mass = p;
      }
    }
    for (std::size_t s = 0; s < secrets; ++s) {
      for (int i = 0; i < n; ++i) {
        const bool truth = (s >> i) & 1U;
        const bool predicted = (ml >> i) & 1U;
        if (truth && predicted) true_pos[static_cast<std::size_t>(i)] += joint[s];
        if (!truth && !predicted) true_neg[static_cast<std::size_t>(i)] += joint[s];
      }
    }
  }
  for (std::size_t s = 0; s < secrets; ++s) {
    for (int i = 0; i < n; ++i) {
      if ((s >> i) & 1U) infected[static_cast<std::size_t>(i)] += dist.mass()[s];
    }
  }
  std::vector<PatientRates> out(static_cast<std::size_t>(n));
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].sensitivity = infected[i] > 0.0 ? true_pos[i] / infected[i] : kNaN;
    out[i].specificity = infected[i] < 1.0 ? true_neg[i] / (1.0 - infected[i]) : kNaN;
  }
  return out;
}

}  // namespace poolinfo::oracle
