#include "poolinfo/optimizer.hpp"

#include <cmath>
#include <string>

#include "poolinfo/error.hpp"
#include "poolinfo/scoring.hpp"

namespace poolinfo {

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::kMutualInformation: return "mutual information";
    case Objective::kExpectedConfidence: return "confidence";
  }
  return "unknown";
}

double objective_score(const SecretDistribution& dist, const DesignMultiset& designs,
                       const TestSpec& spec, Objective objective, const Caps& caps) {
  if (objective == Objective::kExpectedConfidence) {
    return expected_confidence(dist, designs, spec, caps);
  }
  return mutual_information(dist, designs, spec, caps);
}

void ESConfig::validate() const {
  if (lambda < 1) throw Error(ErrorCode::kInvalidArgument, "lambda must be at least 1", "lambda");
  if (base < 1) throw Error(ErrorCode::kInvalidArgument, "base must be at least 1", "base");
  if (budget < 1) throw Error(ErrorCode::kInvalidArgument, "budget must be at least 1", "budget");
}

std::uint64_t luby(std::uint64_t i) {
  if (i == 0) throw Error(ErrorCode::kInvalidArgument, "Luby index starts at 1");
  // Find the block 2^k - 1 containing i; at its end the term is 2^(k-1),
  // otherwise recurse into the repeated prefix.
  for (;;) {
    int k = 1;
    while (((std::uint64_t{1} << k) - 1) < i) ++k;
    if (i == (std::uint64_t{1} << k) - 1) return std::uint64_t{1} << (k - 1);
    i -= (std::uint64_t{1} << (k - 1)) - 1;
  }
}

DesignMultiset mutate(const DesignMultiset& designs, int n, Rng& rng) {
  if (designs.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot mutate an empty multiset");
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "patient count must be at least 1");
  const std::uint64_t positions = static_cast<std::uint64_t>(n) * designs.size();
  std::uniform_int_distribution<std::uint64_t> pick(0, positions - 1);
  const std::uint64_t position = pick(rng);
  DesignMultiset out = designs;
  auto& target = out[static_cast<std::size_t>(position / static_cast<std::uint64_t>(n))];
  target = PoolDesign(target.mask() ^ (Mask{1} << (position % static_cast<std::uint64_t>(n))));
  return out;
}

ESResult es_optimize(int n, int m, const ScoreFn& score, const ESConfig& cfg,
                     const EvaluationObserver& observer) {
  cfg.validate();
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "patient count must be at least 1", "n");
  if (m < 0) throw Error(ErrorCode::kInvalidArgument, "test count must be non-negative", "m");

  Rng rng(cfg.seed);
  ESResult result;
  bool have_best = false;

  auto evaluate = [&](const DesignMultiset& candidate) {
    const double value = score(candidate);
    ++result.evaluations_used;
    if (!have_best || value > result.score) {
      result.best = candidate;
      result.score = value;
      have_best = true;
    }
    if (observer) observer(result.evaluations_used, value, result.score);
    return value;
  };

  const DesignMultiset zero(static_cast<std::size_t>(m), PoolDesign{});
  for (std::uint64_t period = 1; result.evaluations_used < cfg.budget; ++period) {
    if (period > 1) ++result.restarts_performed;
    DesignMultiset parent = zero;
    double parent_score = evaluate(parent);
    if (m == 0) break;  // a single empty multiset; nothing to mutate

    const auto limit = static_cast<std::int64_t>(luby(period)) * cfg.base;
    std::int64_t generations = 0;
    while (generations < limit && result.evaluations_used < cfg.budget) {
      DesignMultiset chain = parent;
      DesignMultiset best_child = parent;
      double best_child_score = parent_score;
      for (int k = 0; k < cfg.lambda && result.evaluations_used < cfg.budget; ++k) {
        chain = mutate(chain, n, rng);
        const double value = evaluate(chain);
        if (value > best_child_score) {
          best_child = chain;
          best_child_score = value;
        }
      }
      parent = std::move(best_child);
      parent_score = best_child_score;
      ++generations;
    }
    if (generations == limit) result.completed_periods.push_back(generations);
  }
  return result;
}

ESResult es_run(int n, int m, const SecretDistribution& dist, const TestSpec& spec,
                const ESConfig& cfg, const Caps& caps) {
  if (dist.n() != n) throw Error(ErrorCode::kLengthMismatch, "distribution has the wrong patient count");
  caps.check_tests(n, m);
  return es_optimize(
      n, m,
      [&](const DesignMultiset& designs) {
        return objective_score(dist, designs, spec, cfg.objective, caps);
      },
      cfg);
}

double multiset_count(int n, int m) {
  // C(2^n + m - 1, m)
  const double designs = std::ldexp(1.0, n);
  double count = 1.0;
  for (int k = 1; k <= m; ++k) count = count * (designs + k - 1) / k;
  return std::round(count);
}

std::pair<DesignMultiset, double> exhaustive_best(int n, int m, const SecretDistribution& dist,
                                                  const TestSpec& spec, Objective objective,
                                                  const Caps& caps) {
  if (dist.n() != n) throw Error(ErrorCode::kLengthMismatch, "distribution has the wrong patient count");
  caps.check_tests(n, m);
  if (multiset_count(n, m) > 1e6) {
    throw Error(ErrorCode::kCapExceeded, "exhaustive search limited to 10^6 multisets");
  }
  const Mask designs = Mask{1} << n;
  DesignMultiset current(static_cast<std::size_t>(m), PoolDesign{});
  DesignMultiset best = current;
  double best_score = objective_score(dist, current, spec, objective, caps);

  for (;;) {
    // Next nondecreasing sequence: bump the rightmost digit that can grow
    // and reset everything after it to the same value.
    int pos = m - 1;
    while (pos >= 0 && current[static_cast<std::size_t>(pos)].mask() + 1 == designs) --pos;
    if (pos < 0) break;
    const PoolDesign bumped(current[static_cast<std::size_t>(pos)].mask() + 1);
    for (int j = pos; j < m; ++j) current[static_cast<std::size_t>(j)] = bumped;
    const double value = objective_score(dist, current, spec, objective, caps);
    if (value > best_score) {
      best = current;
      best_score = value;
    }
  }
  return {best, best_score};
}

}  // namespace poolinfo
