#include "poolinfo/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "poolinfo/adaptive.hpp"
#include "poolinfo/error.hpp"
#include "poolinfo/format.hpp"
#include "poolinfo/scoring.hpp"

namespace poolinfo::sim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void finish(TrialRecord& record, const SecretDistribution& post) {
  const auto [ml, confidence] = ml_diagnosis(post);
  record.diagnosis = ml;
  record.confidence = confidence;
  record.correct = ml == record.truth;
  record.tests_used = static_cast<int>(record.designs.size());
  record.entropy_bits = entropy(post);
}

// Strategy state prepared once per scenario (the ES search, the prior table).
struct Prepared {
  const Scenario& scenario;
  SecretDistribution prior;
  DesignMultiset fixed;
};

TrialRecord run_fixed(const Prepared& p, const DesignMultiset& designs, Rng& rng) {
  TrialRecord record;
  record.truth = sample_secret(p.scenario.prior, rng);
  record.designs = designs;
  for (const auto& d : designs) record.outcomes.push_back(sample_outcome(d, record.truth, p.scenario.spec, rng));
  finish(record, posterior(p.prior, record.designs, record.outcomes, p.scenario.spec));
  return record;
}

TrialRecord run_adaptive(const Prepared& p, const std::vector<int>& batches, Rng& rng) {
  const auto& sc = p.scenario;
  GreedyOptions options;
  options.caps = sc.caps;
  TrialRecord record;
  record.truth = sample_secret(sc.prior, rng);
  int total = 0;
  for (int b : batches) total += b;
  Session session(sc.prior, sc.spec, total, sc.caps);
  for (int batch : batches) {
    const Recommendation rec = k_greedy_batch(session.current(), sc.spec, batch, options);
    for (const auto& d : rec.designs) {
      const bool result = sample_outcome(d, record.truth, sc.spec, rng);
      session = session.observe(d, result);
      record.designs.push_back(d);
      record.outcomes.push_back(result);
    }
  }
  finish(record, session.current());
  return record;
}

TrialRecord run_dorfman(const Prepared& p, const DorfmanPlan& plan, Rng& rng) {
  const auto& sc = p.scenario;
  TrialRecord record;
  record.truth = sample_secret(sc.prior, rng);
  std::vector<PoolDesign> pools;
  for (const auto& group : plan.groups()) {
    Mask mask = 0;
    for (int patient : group) mask |= Mask{1} << patient;
    pools.emplace_back(mask);
  }
  for (std::size_t g = 0; g < pools.size(); ++g) {
    const bool positive = sample_outcome(pools[g], record.truth, sc.spec, rng);
    record.designs.push_back(pools[g]);
    record.outcomes.push_back(positive);
  }
  for (std::size_t g = 0; g < pools.size(); ++g) {
    if (!record.outcomes[g]) continue;
    for (int patient : plan.groups()[g]) {
      const PoolDesign single(Mask{1} << patient);
      record.designs.push_back(single);
      record.outcomes.push_back(sample_outcome(single, record.truth, sc.spec, rng));
    }
  }
  finish(record, posterior(p.prior, record.designs, record.outcomes, sc.spec));
  return record;
}

TrialRecord run_trial(const Prepared& p, std::int64_t trial) {
  Rng rng = trial_rng(p.scenario.seed, static_cast<std::uint64_t>(trial));
  return std::visit(
      Overloaded{
          [&](const FixedDesigns&) { return run_fixed(p, p.fixed, rng); },
          [&](const EvolvedDesigns&) { return run_fixed(p, p.fixed, rng); },
          [&](const GreedyAdaptive& g) { return run_adaptive(p, std::vector<int>(static_cast<std::size_t>(g.m), 1), rng); },
          [&](const KGreedy& k) { return run_adaptive(p, k.batches, rng); },
          [&](const Dorfman& d) { return run_dorfman(p, d.plan, rng); },
      },
      p.scenario.strategy);
}

class RunningMean {
 public:
  void add(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }
  Estimate estimate() const {
    if (count_ < 2) return {mean_, 0.0};
    const double variance = m2_ / static_cast<double>(count_ - 1);
    return {mean_, std::sqrt(variance / static_cast<double>(count_))};
  }

 private:
  std::int64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

std::string optional_g6(const std::optional<double>& v) { return v ? format_g6(*v) : "NA"; }

}  // namespace

std::string strategy_name(const Strategy& strategy) {
  return std::visit(Overloaded{
                        [](const FixedDesigns&) { return std::string("fixed"); },
                        [](const EvolvedDesigns&) { return std::string("es"); },
                        [](const GreedyAdaptive&) { return std::string("greedy"); },
                        [](const KGreedy&) { return std::string("kgreedy"); },
                        [](const Dorfman&) { return std::string("dorfman"); },
                    },
                    strategy);
}

Rng trial_rng(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return Rng(seq);
}

SecretIndex sample_secret(const Prior& prior, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mask value = 0;
  for (int i = 0; i < prior.n(); ++i) {
    if (unit(rng) < prior[i]) value |= Mask{1} << i;
  }
  return SecretIndex(value);
}

bool sample_outcome(PoolDesign design, SecretIndex secret, const TestSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < positive_prob(design, secret, spec);
}

Report run_scenario(const Scenario& scenario, const TrialSink& sink, unsigned threads) {
  if (scenario.trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be at least 1", "trials");
  const int n = scenario.prior.n();
  Prepared prepared{scenario, prior_to_distribution(scenario.prior, scenario.caps), {}};

  std::visit(Overloaded{
                 [&](const FixedDesigns& f) {
                   for (const auto& d : f.designs) {
                     if (d.mask() >= (Mask{1} << n)) {
                       throw Error(ErrorCode::kInvalidArgument, "design refers to patients beyond n", "designs");
                     }
                   }
                   scenario.caps.check_tests(n, static_cast<int>(f.designs.size()));
                   prepared.fixed = f.designs;
                 },
                 [&](const EvolvedDesigns& e) {
                   prepared.fixed = es_run(n, e.m, prepared.prior, scenario.spec, e.es, scenario.caps).best;
                 },
                 [&](const GreedyAdaptive& g) { scenario.caps.check_tests(n, g.m); },
                 [&](const KGreedy& k) {
                   for (int b : k.batches) {
                     if (b < 1) throw Error(ErrorCode::kInvalidArgument, "batch sizes must be positive", "batches");
                     scenario.caps.check_tests(n, b);
                   }
                 },
                 [&](const Dorfman& d) {
                   if (d.plan.n() != n) {
                     throw Error(ErrorCode::kLengthMismatch, "Dorfman plan and prior disagree on n", "groups");
                   }
                 },
             },
             scenario.strategy);

  std::vector<TrialRecord> records(static_cast<std::size_t>(scenario.trials));
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, scenario.trials));
  if (threads <= 1) {
    for (std::int64_t t = 0; t < scenario.trials; ++t) records[static_cast<std::size_t>(t)] = run_trial(prepared, t);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> workers;
      for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
          try {
            for (std::int64_t t = w; t < scenario.trials; t += threads) {
              records[static_cast<std::size_t>(t)] = run_trial(prepared, t);
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  Report report;
  report.id = scenario.id;
  report.strategy = strategy_name(scenario.strategy);
  report.trials = scenario.trials;
  RunningMean accuracy, tests, entropy_bits, confidence;
  std::vector<std::int64_t> true_pos(static_cast<std::size_t>(n)), true_neg(static_cast<std::size_t>(n));
  report.patients.resize(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < scenario.trials; ++t) {
    const auto& r = records[static_cast<std::size_t>(t)];
    if (sink) sink(t, r);
    accuracy.add(r.correct ? 1.0 : 0.0);
    tests.add(r.tests_used);
    entropy_bits.add(r.entropy_bits);
    confidence.add(r.confidence);
    for (int i = 0; i < n; ++i) {
      auto& stats = report.patients[static_cast<std::size_t>(i)];
      if (r.truth.infected(i)) {
        ++stats.infected_trials;
        true_pos[static_cast<std::size_t>(i)] += r.diagnosis.infected(i);
      } else {
        ++stats.healthy_trials;
        true_neg[static_cast<std::size_t>(i)] += !r.diagnosis.infected(i);
      }
    }
  }
  report.accuracy = accuracy.estimate();
  report.tests_used = tests.estimate();
  report.entropy_bits = entropy_bits.estimate();
  report.confidence = confidence.estimate();
  for (int i = 0; i < n; ++i) {
    auto& stats = report.patients[static_cast<std::size_t>(i)];
    if (stats.infected_trials > 0) {
      stats.sensitivity = static_cast<double>(true_pos[static_cast<std::size_t>(i)]) / stats.infected_trials;
    }
    if (stats.healthy_trials > 0) {
      stats.specificity = static_cast<double>(true_neg[static_cast<std::size_t>(i)]) / stats.healthy_trials;
    }
  }
  return report;
}

std::string trial_csv_header(int n) {
  std::string out = "scenario_id,trial,tests_used,correct,entropy_bits,confidence";
  for (int i = 1; i <= n; ++i) out += ",marginal_pred_" + std::to_string(i);
  for (int i = 1; i <= n; ++i) out += ",true_" + std::to_string(i);
  return out;
}

std::string trial_csv_row(const std::string& scenario_id, std::int64_t trial,
                          const TrialRecord& record, int n) {
  std::string out = scenario_id + "," + std::to_string(trial) + "," +
                    std::to_string(record.tests_used) + "," + (record.correct ? "1" : "0") + "," +
                    format_g6(record.entropy_bits) + "," + format_g6(record.confidence);
  for (int i = 0; i < n; ++i) out += record.diagnosis.infected(i) ? ",1" : ",0";
  for (int i = 0; i < n; ++i) out += record.truth.infected(i) ? ",1" : ",0";
  return out;
}

std::string report_csv_header() {
  return "scenario_id,strategy,trials,accuracy,accuracy_se,tests_used,tests_used_se,"
         "entropy_bits,entropy_bits_se,confidence,confidence_se,mean_sensitivity,"
         "mean_specificity";
}

std::string report_csv_row(const Report& report) {
  auto mean_of = [&](auto member) -> std::optional<double> {
    double sum = 0.0;
    int count = 0;
    for (const auto& p : report.patients) {
      if (const auto& v = p.*member) {
        sum += *v;
        ++count;
      }
    }
    if (count == 0) return std::nullopt;
    return sum / count;
  };
  std::ostringstream out;
  out << report.id << ',' << report.strategy << ',' << report.trials;
  for (const Estimate* e : {&report.accuracy, &report.tests_used, &report.entropy_bits, &report.confidence}) {
    out << ',' << format_g6(e->mean) << ',' << format_g6(e->std_error);
  }
  out << ',' << optional_g6(mean_of(&PatientStats::sensitivity)) << ','
      << optional_g6(mean_of(&PatientStats::specificity));
  return out.str();
}

std::string compare(const std::vector<Scenario>& scenarios, unsigned threads) {
  std::string out = report_csv_header() + "\n";
  for (const auto& sc : scenarios) out += report_csv_row(run_scenario(sc, {}, threads)) + "\n";
  return out;
}

}  // namespace poolinfo::sim
