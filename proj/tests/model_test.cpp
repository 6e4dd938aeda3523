#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "poolinfo/error.hpp"
#include "poolinfo/oracles.hpp"
#include "poolinfo/scoring.hpp"
#include "test_support.hpp"

using namespace poolinfo;
using namespace poolinfo::testing;

namespace {

double total_mass(const SecretDistribution& d) {
  return std::accumulate(d.mass().begin(), d.mass().end(), 0.0);
}

const DesignMultiset kReferenceDesigns = {PoolDesign::parse("011"), PoolDesign::parse("101"),
                                         PoolDesign::parse("110")};

}  // namespace

TEST_CASE("bit strings put patient 1 leftmost") {
  CHECK(SecretIndex::parse("100").value() == 1U);
  CHECK(SecretIndex::parse("001").value() == 4U);
  CHECK(PoolDesign::parse("011").to_string(3) == "011");
  CHECK(PoolDesign::parse("110").size() == 2);
  CHECK_THROWS_AS(PoolDesign::parse("012"), Error);
  CHECK_THROWS_AS(PoolDesign::parse(""), Error);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = random_int(rng, 1, 16);
    const auto value = static_cast<Mask>(rng() % (std::uint64_t{1} << n));
    CHECK(SecretIndex::parse(SecretIndex(value).to_string(n)).value() == value);
  }
}

TEST_CASE("test spec validates rates and resolves pool sizes") {
  CHECK_THROWS_AS(TestSpec(1.1, 0.9), Error);
  CHECK_THROWS_AS(TestSpec(0.9, -0.1), Error);
  CHECK_THROWS_AS(TestSpec(0.9, 0.9, {{0, Rates{0.5, 0.5}}}), Error);
  CHECK_THROWS_AS(TestSpec(0.9, 0.9, {{2, Rates{1.5, 0.5}}}), Error);
  const TestSpec spec(0.95, 0.99, {{3, Rates{0.8, 0.97}}});
  CHECK(spec.rates_for(3) == Rates{0.8, 0.97});
  CHECK(spec.rates_for(2) == Rates{0.95, 0.99});
}

TEST_CASE("prior validation") {
  CHECK_THROWS_AS(Prior({}), Error);
  CHECK_THROWS_AS(Prior({0.5, 1.5}), Error);
  CHECK_THROWS_AS(Prior({std::nan("")}), Error);
}

TEST_CASE("prior_to_distribution builds the product law") {
  const auto zero = prior_to_distribution(Prior({0.0, 0.0, 0.0}));
  CHECK(zero[SecretIndex(0)] == 1.0);
  CHECK(total_mass(zero) == 1.0);

  const auto tenth = prior_to_distribution(reference_prior());
  CHECK(tenth[SecretIndex::parse("000")] == doctest::Approx(0.729).epsilon(1e-15));
  CHECK(tenth[SecretIndex::parse("110")] == doctest::Approx(0.009).epsilon(1e-12));

  const auto half = prior_to_distribution(Prior({0.5, 0.5}));
  for (double w : half.mass()) CHECK(w == 0.25);

  Caps small;
  small.max_n = 2;
  CHECK_THROWS_AS(prior_to_distribution(reference_prior(), small), Error);
  try {
    prior_to_distribution(reference_prior(), small);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCapExceeded);
  }
}

TEST_CASE("positive_prob follows the hit rule") {
  const TestSpec spec(0.95, 0.99);
  CHECK(positive_prob(PoolDesign::parse("110"), SecretIndex::parse("100"), spec) == 0.95);
  CHECK(positive_prob(PoolDesign::parse("000"), SecretIndex::parse("111"), spec) ==
        doctest::Approx(0.01).epsilon(1e-14));
  CHECK(positive_prob(PoolDesign::parse("011"), SecretIndex::parse("100"), spec) ==
        doctest::Approx(0.01).epsilon(1e-14));

  const TestSpec diluted(0.95, 0.99, {{2, Rates{0.7, 0.9}}});
  CHECK(positive_prob(PoolDesign::parse("110"), SecretIndex::parse("100"), diluted) == 0.7);
  CHECK(positive_prob(PoolDesign::parse("110"), SecretIndex::parse("001"), diluted) ==
        doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("outcome_likelihood multiplies independent tests") {
  const TestSpec spec(0.95, 0.99);
  CHECK(outcome_likelihood({true}, SecretIndex::parse("000"), {PoolDesign::parse("111")}, spec) ==
        doctest::Approx(0.01).epsilon(1e-14));
  const DesignMultiset twice = {PoolDesign::parse("111"), PoolDesign::parse("111")};
  CHECK(outcome_likelihood({true, true}, SecretIndex::parse("100"), twice, spec) ==
        doctest::Approx(0.9025).epsilon(1e-14));
  // 011 misses patient 1 (true negative), the other two hit.
  CHECK(outcome_likelihood({false, true, true}, SecretIndex::parse("100"), kReferenceDesigns,
                           spec) == doctest::Approx(0.99 * 0.95 * 0.95).epsilon(1e-14));
  CHECK_THROWS_AS(outcome_likelihood({true}, SecretIndex(0), twice, spec), Error);
}

TEST_CASE("posterior on the three-pool evaluation examples") {
  const auto prior = prior_to_distribution(reference_prior());
  const auto spec = reference_spec();

  const auto none = posterior(prior, kReferenceDesigns, parse_outcomes("000"), spec);
  for (double p : marginals(none)) CHECK(p == doctest::Approx(1.23414e-05).epsilon(1e-5));
  auto [ml0, conf0] = ml_diagnosis(none);
  CHECK(ml0.to_string(3) == "000");
  CHECK(conf0 == doctest::Approx(0.999963).epsilon(1e-6));

  const auto first = posterior(prior, kReferenceDesigns, parse_outcomes("011"), spec);
  auto [ml1, conf1] = ml_diagnosis(first);
  CHECK(ml1.to_string(3) == "100");
  CHECK(std::abs(conf1 - 0.973086) < 1e-6);
  const auto m1 = marginals(first);
  CHECK(std::abs(m1[0] - 0.975488) < 1e-6);
  CHECK(std::abs(m1[1] - 0.00292) < 1e-6);
  CHECK(std::abs(m1[2] - 0.00292) < 1e-6);

  const auto corrected = posterior(prior, kReferenceDesigns, parse_outcomes("001"), spec);
  auto [ml2, conf2] = ml_diagnosis(corrected);
  CHECK(ml2.to_string(3) == "000");
  CHECK(std::abs(conf2 - 0.955646) < 1e-6);

  // No evidence leaves the distribution untouched.
  const auto same = posterior(prior, {}, {}, spec);
  CHECK(std::equal(same.mass().begin(), same.mass().end(), prior.mass().begin()));
}

TEST_CASE("posterior rejects impossible outcomes") {
  const auto prior = prior_to_distribution(Prior({0.0, 0.0}));
  const TestSpec perfect(1.0, 1.0);
  try {
    posterior(prior, {PoolDesign::parse("11")}, {true}, perfect);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroProbabilityOutcome);
  }
  CHECK_THROWS_AS(posterior(prior, {PoolDesign::parse("11")}, {}, perfect), Error);
}

TEST_CASE("entropy") {
  CHECK(entropy(SecretDistribution::point_mass(3, SecretIndex(5))) == 0.0);
  CHECK(entropy(SecretDistribution::uniform(3)) == doctest::Approx(3.0).epsilon(1e-15));
  // Additivity for independent bits, against direct summation in the oracle script.
  const auto prior = prior_to_distribution(reference_prior());
  CHECK(std::abs(entropy(prior) - 3 * 0.4689955935892812) < 1e-12);
  CHECK(std::abs(entropy(prior) - 1.40698678076784) < 1e-12);
}

TEST_CASE("conditional entropy and mutual information") {
  const auto prior = prior_to_distribution(reference_prior());
  const TestSpec spec(0.95, 0.99);
  CHECK(conditional_entropy(prior, {}, spec) == doctest::Approx(entropy(prior)).epsilon(1e-14));
  CHECK(std::abs(conditional_entropy(prior, {PoolDesign(0)}, spec) - entropy(prior)) < 1e-12);
  CHECK(mutual_information(prior, {PoolDesign(0)}, spec) < 1e-12);

  const TestSpec perfect(1.0, 1.0);
  CHECK(mutual_information(SecretDistribution::uniform(1), {PoolDesign::parse("1")}, perfect) ==
        doctest::Approx(1.0).epsilon(1e-14));

  // Pr[positive] for the all-in pool.
  double p_positive = 0.0;
  for (std::size_t s = 0; s < prior.size(); ++s) {
    p_positive += prior.mass()[s] * positive_prob(PoolDesign::parse("111"), SecretIndex(static_cast<Mask>(s)), spec);
  }
  CHECK(std::abs(p_positive - 0.26474) < 1e-12);
  const double mi = mutual_information(prior, {PoolDesign::parse("111")}, spec);
  CHECK(std::abs(mi - 0.697303418514334) < 1e-12);
  const auto naive = oracle::naive_joint_scores(prior, {PoolDesign::parse("111")}, spec);
  CHECK(std::abs(mi - (entropy(prior) - naive.conditional_entropy)) < 1e-12);

  // Oracle script values for the reference triple under tpr=0.95, tnr=0.99.
  CHECK(std::abs(conditional_entropy(prior, kReferenceDesigns, spec) - 0.173423592398426) < 1e-12);
  CHECK(std::abs(expected_confidence(prior, kReferenceDesigns, spec) - 0.953613558) < 1e-9);
}

TEST_CASE("expected confidence") {
  const auto prior = prior_to_distribution(reference_prior());
  const auto spec = reference_spec();
  CHECK(std::abs(expected_confidence(prior, {PoolDesign::parse("110"), PoolDesign::parse("101"),
                                             PoolDesign::parse("011")},
                                     spec) -
                 0.958704) < 1e-6);
  CHECK(expected_confidence(prior, {}, spec) == doctest::Approx(0.729).epsilon(1e-14));

  const auto prior6 = prior_to_distribution(reference_prior(6));
  std::vector<std::string> six = {"110100", "100010", "001110", "101001", "000101", "010011"};
  CHECK(std::abs(expected_confidence(prior6, parse_designs(six), spec) - 0.937214) < 1e-6);
}

TEST_CASE("ml diagnosis and marginals") {
  auto [ml, p] = ml_diagnosis(SecretDistribution::uniform(2));
  CHECK(ml.value() == 0U);
  CHECK(p == 0.25);
  const auto point = SecretDistribution::point_mass(3, SecretIndex::parse("101"));
  CHECK(marginals(point) == std::vector<double>{1.0, 0.0, 1.0});
  for (double m : marginals(prior_to_distribution(reference_prior()))) {
    CHECK(m == doctest::Approx(0.1).epsilon(1e-14));
  }
  const auto report = diagnose(point);
  CHECK(report.confidence == 1.0);
  CHECK(report.entropy_bits == 0.0);
}

TEST_CASE("caps guard exact enumeration") {
  Caps caps;
  caps.max_m = 2;
  const auto prior = prior_to_distribution(reference_prior());
  CHECK_THROWS_AS(conditional_entropy(prior, kReferenceDesigns, reference_spec(), caps), Error);
  caps = Caps{};
  caps.max_joint = 5;
  CHECK_THROWS_AS(expected_confidence(prior, kReferenceDesigns, reference_spec(), caps), Error);
}

TEST_CASE("property: normalization, bounds and information never hurts") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = random_int(rng, 1, 5);
    const int m = random_int(rng, 0, 4);
    const auto dist = random_distribution(rng, n);
    const auto spec = random_spec(rng, n);
    const auto designs = random_designs(rng, n, m);
    const double h = entropy(dist);
    const auto scores = outcome_scores(dist, designs, spec);
    const double mi = mutual_information(dist, designs, spec);
    CHECK(h >= 0.0);
    CHECK(h <= n + 1e-12);
    CHECK(scores.conditional_entropy <= h + 1e-12);
    CHECK(mi >= 0.0);
    CHECK(mi <= std::min(h, static_cast<double>(m)) + 1e-12);
    CHECK(scores.expected_confidence >= ml_diagnosis(dist).second - 1e-12);
    CHECK(scores.expected_confidence <= 1.0);

    // A random outcome drawn from its marginal has positive probability.
    OutcomeVector t(static_cast<std::size_t>(m));
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = rng() % 2;
    double evidence = 0.0;
    for (std::size_t s = 0; s < dist.size(); ++s) {
      evidence += dist.mass()[s] * outcome_likelihood(t, SecretIndex(static_cast<Mask>(s)), designs, spec);
    }
    if (evidence > 0.0) {
      const auto post = posterior(dist, designs, t, spec);
      CHECK(std::abs(total_mass(post) - 1.0) < 1e-9);
      for (double p : marginals(post)) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
  }
}

TEST_CASE("property: scores are invariant under design permutation") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = random_int(rng, 1, 4);
    const int m = random_int(rng, 2, 4);
    const auto dist = random_distribution(rng, n);
    const auto spec = random_spec(rng, n);
    auto designs = random_designs(rng, n, m);
    const auto before = outcome_scores(dist, designs, spec);
    std::shuffle(designs.begin(), designs.end(), rng);
    const auto after = outcome_scores(dist, designs, spec);
    CHECK(std::abs(before.conditional_entropy - after.conditional_entropy) < 1e-12);
    CHECK(std::abs(before.expected_confidence - after.expected_confidence) < 1e-12);
  }
}

TEST_CASE("property: sequential updates commute and compose") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = random_int(rng, 1, 4);
    const auto dist = random_distribution(rng, n);
    const auto spec = random_spec(rng, n);
    const auto d = random_designs(rng, n, 2);
    const bool t1 = rng() % 2;
    const bool t2 = rng() % 2;
    try {
      const auto joint = posterior(dist, d, {t1, t2}, spec);
      const auto ab = posterior(posterior(dist, {d[0]}, {t1}, spec), {d[1]}, {t2}, spec);
      const auto ba = posterior(posterior(dist, {d[1]}, {t2}, spec), {d[0]}, {t1}, spec);
      for (std::size_t s = 0; s < dist.size(); ++s) {
        CHECK(std::abs(joint.mass()[s] - ab.mass()[s]) < 1e-12);
        CHECK(std::abs(joint.mass()[s] - ba.mass()[s]) < 1e-12);
      }
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kZeroProbabilityOutcome);
    }
  }
}

TEST_CASE("property: repeating a positive result strengthens every hitting secret") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = random_int(rng, 1, 3);
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (auto& p : probs) p = 0.05 + 0.9 * uniform01(rng);
    const auto dist = prior_to_distribution(Prior(probs));
    const TestSpec spec(0.5 + 0.49 * uniform01(rng) + 0.005, 0.5 + 0.49 * uniform01(rng) + 0.005);
    const PoolDesign d(static_cast<Mask>(1 + rng() % ((1U << n) - 1)));
    const auto once = posterior(dist, {d}, {true}, spec);
    const auto twice = posterior(dist, {d, d}, {true, true}, spec);
    for (std::size_t s = 0; s < dist.size(); ++s) {
      if (d.hits(SecretIndex(static_cast<Mask>(s)))) CHECK(twice.mass()[s] > once.mass()[s]);
    }
  }
}

TEST_CASE("property: perfect tests rule out inconsistent secrets") {
  std::mt19937_64 rng(15);
  const TestSpec perfect(1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = random_int(rng, 1, 4);
    const auto dist = SecretDistribution::uniform(n);
    const auto designs = random_designs(rng, n, random_int(rng, 1, 4));
    const SecretIndex truth(static_cast<Mask>(rng() % (1U << n)));
    OutcomeVector t;
    for (const auto& d : designs) t.push_back(d.hits(truth));
    const auto post = posterior(dist, designs, t, perfect);
    for (std::size_t s = 0; s < post.size(); ++s) {
      bool consistent = true;
      for (std::size_t j = 0; j < designs.size(); ++j) {
        consistent = consistent && designs[j].hits(SecretIndex(static_cast<Mask>(s))) == t[j];
      }
      if (!consistent) CHECK(post.mass()[s] == 0.0);
    }
    CHECK(post[truth] > 0.0);
  }
}
