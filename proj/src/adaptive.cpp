#include "poolinfo/adaptive.hpp"

#include <algorithm>
#include <string>

#include "poolinfo/error.hpp"
#include "poolinfo/scoring.hpp"

namespace poolinfo {

namespace {

constexpr double kTieTolerance = 1e-12;

double gain_from_hit_mass(double p_hit, const Rates& rates) {
  p_hit = std::clamp(p_hit, 0.0, 1.0);
  const double p_miss = 1.0 - p_hit;
  const double p_positive = rates.tpr * p_hit + (1.0 - rates.tnr) * p_miss;
  const double noise = p_hit * binary_entropy(rates.tpr) + p_miss * binary_entropy(rates.tnr);
  return std::max(0.0, binary_entropy(p_positive) - noise);
}

double single_design_gain(const SecretDistribution& dist, PoolDesign design, const TestSpec& spec) {
  double p_hit = 0.0;
  const auto mass = dist.mass();
  for (std::size_t s = 0; s < mass.size(); ++s) {
    if (design.hits(SecretIndex(static_cast<Mask>(s)))) p_hit += mass[s];
  }
  return gain_from_hit_mass(p_hit, spec.rates_for(design.size()));
}

// Index of the best gain scanning masks upward; a later mask must beat the
// incumbent by more than the tie tolerance.
Mask argmax_gain(const std::vector<double>& gains) {
  Mask best = 0;
  for (Mask d = 1; d < gains.size(); ++d) {
    if (gains[d] > gains[best] + kTieTolerance) best = d;
  }
  return best;
}

std::vector<ScoredDesign> runners_up(const std::vector<double>& gains, Mask chosen, int count) {
  std::vector<ScoredDesign> all;
  all.reserve(gains.size());
  for (Mask d = 0; d < gains.size(); ++d) {
    if (d != chosen) all.push_back({PoolDesign(d), gains[d]});
  }
  const auto keep = std::min<std::size_t>(all.size(), static_cast<std::size_t>(std::max(count, 0)));
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    [](const ScoredDesign& a, const ScoredDesign& b) {
                      if (a.gain_bits != b.gain_bits) return a.gain_bits > b.gain_bits;
                      return a.design < b.design;
                    });
  all.resize(keep);
  return all;
}

// Joint masses Pr[S = s, T = t] for every outcome t of `designs` with
// Pr[T = t] > 0, each normalized into a posterior, paired with Pr[T = t].
std::vector<std::pair<double, SecretDistribution>> outcome_posteriors(
    const SecretDistribution& dist, const DesignMultiset& designs, const TestSpec& spec) {
  std::vector<std::pair<double, SecretDistribution>> out;
  const std::size_t outcomes = std::size_t{1} << designs.size();
  for (std::size_t t = 0; t < outcomes; ++t) {
    OutcomeVector bits(designs.size());
    for (std::size_t j = 0; j < designs.size(); ++j) bits[j] = (t >> j) & 1U;
    double evidence = 0.0;
    for (std::size_t s = 0; s < dist.size(); ++s) {
      evidence += dist.mass()[s] * outcome_likelihood(bits, SecretIndex(static_cast<Mask>(s)),
                                                      designs, spec);
    }
    if (evidence > 0.0) out.emplace_back(evidence, posterior(dist, designs, bits, spec));
  }
  return out;
}

}  // namespace

std::vector<double> single_design_gains(const SecretDistribution& dist, const TestSpec& spec) {
  const int n = dist.n();
  const std::size_t size = dist.size();
  // subset[x] = sum of mass over secrets contained in x
  std::vector<double> subset(dist.mass().begin(), dist.mass().end());
  for (int i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t x = 0; x < size; ++x) {
      if (x & bit) subset[x] += subset[x ^ bit];
    }
  }
  const std::size_t full = size - 1;
  std::vector<double> gains(size);
  for (std::size_t d = 0; d < size; ++d) {
    const double p_miss = subset[full & ~d];
    const PoolDesign design(static_cast<Mask>(d));
    gains[d] = gain_from_hit_mass(1.0 - p_miss, spec.rates_for(design.size()));
  }
  return gains;
}

Recommendation greedy_next_design(const SecretDistribution& dist, const TestSpec& spec,
                                  const GreedyOptions& options) {
  const int n = dist.n();
  options.caps.check_patients(n);
  Recommendation rec;
  if (n > options.caps.max_greedy_n) {
    const ESResult es = es_optimize(
        n, 1,
        [&](const DesignMultiset& d) { return single_design_gain(dist, d.front(), spec); },
        options.fallback);
    rec.designs = es.best;
    rec.expected_gain_bits = es.score;
    rec.fallback = true;
    return rec;
  }
  const auto gains = single_design_gains(dist, spec);
  const Mask best = argmax_gain(gains);
  rec.designs = {PoolDesign(best)};
  rec.expected_gain_bits = gains[best];
  rec.alternatives = runners_up(gains, best, options.alternatives);
  return rec;
}

Recommendation k_greedy_batch(const SecretDistribution& dist, const TestSpec& spec,
                              int batch_size, const GreedyOptions& options) {
  if (batch_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be at least 1", "batch");
  }
  const int n = dist.n();
  options.caps.check_tests(n, batch_size);
  if (batch_size == 1) return greedy_next_design(dist, spec, options);
  if (n > options.caps.max_greedy_n) {
    throw Error(ErrorCode::kCapExceeded,
                "batch selection enumerates all designs; n exceeds " +
                    std::to_string(options.caps.max_greedy_n),
                "n");
  }

  // I(S; T_B, T_d) = I(S; T_B) + sum_t Pr[T_B = t] I(S; T_d | T_B = t), so
  // each augmentation step scores all designs from the prefix posteriors.
  DesignMultiset batch;
  while (static_cast<int>(batch.size()) < batch_size) {
    std::vector<double> gains(dist.size(), 0.0);
    for (const auto& [weight, post] : outcome_posteriors(dist, batch, spec)) {
      const auto conditional = single_design_gains(post, spec);
      for (std::size_t d = 0; d < gains.size(); ++d) gains[d] += weight * conditional[d];
    }
    batch.push_back(PoolDesign(argmax_gain(gains)));
  }

  Recommendation rec;
  rec.expected_gain_bits = mutual_information(dist, batch, spec, options.caps);
  rec.designs = std::move(batch);
  return rec;
}

Session::Session(Prior prior, TestSpec spec, int budget, const Caps& caps)
    : prior_(std::move(prior)),
      spec_(std::move(spec)),
      budget_(budget),
      caps_(caps),
      current_(prior_to_distribution(prior_, caps)) {
  if (budget < 0) throw Error(ErrorCode::kInvalidArgument, "test budget must be non-negative", "m");
}

Session Session::replay(Prior prior, TestSpec spec, int budget,
                        const std::vector<Observation>& history, const Caps& caps) {
  Session session(std::move(prior), std::move(spec), budget, caps);
  if (static_cast<int>(history.size()) > budget) {
    throw Error(ErrorCode::kBudgetExhausted, "history is longer than the test budget");
  }
  session.history_ = history;
  session.current_ = session.recompute();
  return session;
}

Session Session::observe(PoolDesign design, bool result) const {
  if (remaining_budget() <= 0) {
    throw Error(ErrorCode::kBudgetExhausted, "no tests left in the budget");
  }
  if (design.mask() >= (Mask{1} << n())) {
    throw Error(ErrorCode::kInvalidArgument, "design refers to patients beyond n", "design");
  }
  Session next = *this;
  next.current_ = posterior(current_, {design}, {result}, spec_);
  next.history_.push_back({design, result});
  return next;
}

Session Session::undo() const {
  if (history_.empty()) throw Error(ErrorCode::kEmptyHistory, "nothing to undo");
  Session previous = *this;
  previous.history_.pop_back();
  previous.current_ = previous.recompute();
  return previous;
}

DiagnosisReport Session::report() const { return diagnose(current_); }

SecretDistribution Session::recompute() const {
  DesignMultiset designs;
  OutcomeVector results;
  for (const auto& obs : history_) {
    designs.push_back(obs.design);
    results.push_back(obs.result);
  }
  return posterior(prior_to_distribution(prior_, caps_), designs, results, spec_);
}

PolicyTrace run_greedy_policy(const Prior& prior, const TestSpec& spec, int m,
                              const ResultSource& results, const GreedyOptions& options) {
  Session session(prior, spec, m, options.caps);
  const double initial_entropy = entropy(session.current());
  std::vector<PolicyStep> steps;
  while (session.remaining_budget() > 0) {
    const Recommendation rec = greedy_next_design(session.current(), spec, options);
    const PoolDesign design = rec.designs.front();
    const bool result = results(design);
    session = session.observe(design, result);
    const double h = entropy(session.current());
    steps.push_back({design, result, rec.expected_gain_bits, h, initial_entropy - h});
  }
  return {std::move(session), std::move(steps)};
}

namespace {

double greedy_leaf_entropy(const SecretDistribution& dist, const TestSpec& spec, int remaining,
                           const GreedyOptions& options) {
  if (remaining == 0) return entropy(dist);
  const PoolDesign design = greedy_next_design(dist, spec, options).designs.front();
  double acc = 0.0;
  for (int result = 0; result < 2; ++result) {
    double p = 0.0;
    for (std::size_t s = 0; s < dist.size(); ++s) {
      p += dist.mass()[s] *
           outcome_likelihood({result == 1}, SecretIndex(static_cast<Mask>(s)), {design}, spec);
    }
    if (p <= 0.0) continue;
    acc += p * greedy_leaf_entropy(posterior(dist, {design}, {result == 1}, spec), spec,
                                   remaining - 1, options);
  }
  return acc;
}

}  // namespace

double greedy_expected_information(const SecretDistribution& dist, const TestSpec& spec, int m,
                                   const GreedyOptions& options) {
  if (m < 0) throw Error(ErrorCode::kInvalidArgument, "test count must be non-negative");
  return entropy(dist) - greedy_leaf_entropy(dist, spec, m, options);
}

}  // namespace poolinfo
