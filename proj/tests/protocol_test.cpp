#include <string>

#include "doctest.h"
#include "poolinfo/error.hpp"
#include "poolinfo/format.hpp"
#include "poolinfo/protocol.hpp"
#include "poolinfo/scoring.hpp"
#include "test_support.hpp"

using namespace poolinfo;

namespace {

std::string eval_input(const std::string& results) {
  return "3 3\n\n0.99 0.95\n\n0.1 0.1 0.1\n\neval \n\n011\n101\n110\n\n" + results + "\n";
}

const char* kOptimInput = "3 3\n\n0.99 0.95\n\n0.1 0.1 0.1\n\noptim confidence\nga-luby 2 100\n1000\n";

std::string parse_error(const std::string& text) {
  try {
    parse_job(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("eval input parses to its structure") {
  const auto in = parse_job(eval_input("000"));
  CHECK(in.n == 3);
  CHECK(in.m == 3);
  CHECK(in.tpr == 0.99);
  CHECK(in.tnr == 0.95);
  CHECK(in.priors == std::vector<double>{0.1, 0.1, 0.1});
  CHECK(in.mode == JobMode::kEval);
  CHECK(in.eval.designs == DesignMultiset{PoolDesign::parse("011"), PoolDesign::parse("101"),
                                          PoolDesign::parse("110")});
  CHECK(in.eval.results == OutcomeVector{false, false, false});
  CHECK(parse_job(eval_input("011")).eval.results == OutcomeVector{false, true, true});
}

TEST_CASE("eval golden outputs") {
  CHECK(run_eval(parse_job(eval_input("000"))) ==
        "most probable diagnosis: 000\nconfidence: 0.999963\n\nmarginals: 1.23414e-05 1.23414e-05 1.23414e-05 \n");
  CHECK(run_eval(parse_job(eval_input("011"))) ==
        "most probable diagnosis: 100\nconfidence: 0.973086\n\nmarginals: 0.975488 0.00292 0.00292 \n");
  CHECK(run_eval(parse_job(eval_input("001"))) ==
        "most probable diagnosis: 000\nconfidence: 0.955646\n\nmarginals: 0.0221854 0.0221854 6.64093e-05 \n");
}

TEST_CASE("optim stanza parses") {
  const auto in = parse_job(kOptimInput);
  CHECK(in.mode == JobMode::kOptim);
  CHECK(in.optim.objective == Objective::kExpectedConfidence);
  CHECK(in.optim.optimizer == OptimizerKind::kEvolution);
  CHECK(in.optim.lambda == 2);
  CHECK(in.optim.base == 100);
  CHECK(in.optim.budget == 1000);
}

TEST_CASE("optim golden output") {
  const auto in = parse_job(kOptimInput);
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
    const std::string out = run_optim(in, seed);
    CHECK(out.rfind("expected confidence:\n0.958704\n\ntests (one per line):\n", 0) == 0);
  }
  auto exhaustive = in;
  exhaustive.optim.optimizer = OptimizerKind::kExhaustive;
  CHECK(run_optim(exhaustive, 0) == "expected confidence:\n0.958704\n\ntests (one per line):\n110\n101\n011\n");

  auto mi = in;
  mi.optim.objective = Objective::kMutualInformation;
  CHECK(run_optim(mi, 0).rfind("expected mutual information:\n", 0) == 0);
}

TEST_CASE("optim with budget 1 returns the zero designs") {
  auto in = parse_job(kOptimInput);
  in.optim.budget = 1;
  CHECK(run_optim(in, 5) == "expected confidence:\n0.729\n\ntests (one per line):\n000\n000\n000\n");
}

TEST_CASE("six-patient optim finds a good multiset") {
  const auto in = parse_job("6 6\n0.99 0.95\n0.1 0.1 0.1 0.1 0.1 0.1\noptim confidence\nga-luby 2 100\n1000\n");
  CHECK(optimize(in, 3).score >= 0.93);
}

TEST_CASE("six-patient listed multiset scores 0.937214") {
  const auto in = parse_job(
      "6 6\n0.99 0.95\n0.1 0.1 0.1 0.1 0.1 0.1\neval\n110100\n100010\n001110\n101001\n000101\n010011\n000000\n");
  const double score = expected_confidence(prior_to_distribution(in.prior()), in.eval.designs, in.spec());
  CHECK(format_g6(score) == "0.937214");
}

TEST_CASE("json output carries the same fields") {
  const auto j = run_eval_json(parse_job(eval_input("011")));
  CHECK(j.find("\"diagnosis\": \"100\"") != std::string::npos);
  CHECK(j.find("\"confidence\": 0.97308") != std::string::npos);
  const auto o = run_optim_json(parse_job(kOptimInput), 0);
  CHECK(o.find("\"score\": 0.95870") != std::string::npos);
  CHECK(o.find("\"designs\"") != std::string::npos);
}

TEST_CASE("parse errors name the line") {
  CHECK(parse_error(eval_input("00")).find("line 13") != std::string::npos);
  CHECK(parse_error(eval_input("0a0")).find("line 13") != std::string::npos);
  CHECK(parse_error("3 3\n0.99 0.95\n0.1 0.1 0.1\neval\n011\n1x1\n110\n000\n").find("line 6") != std::string::npos);
  CHECK(parse_error("3 3\n0.99 0.95\n0.1 0.1 0.1\neval\n011\n10\n110\n000\n").find("line 6") != std::string::npos);
  CHECK(parse_error("3 3\n1.5 0.95\n0.1 0.1 0.1\neval\n").find("line 2") != std::string::npos);
  CHECK(parse_error("3 3\n0.9 0.95\n0.1 -0.1 0.1\neval\n").find("line 3") != std::string::npos);
  CHECK(parse_error("3 3\n0.9 0.95\n0.1 0.1\neval\n").find("line 3") != std::string::npos);
  CHECK(parse_error("3 3\n0.9 0.95\n0.1 0.1 0.1\nguess\n").find("line 4") != std::string::npos);
  CHECK(parse_error("3 3\n0.9 0.95\n0.1 0.1 0.1\noptim luck\nga-luby 2 100\n10\n").find("line 4") !=
        std::string::npos);
  CHECK(parse_error("3 3\n0.9 0.95\n0.1 0.1 0.1\noptim mi\nanneal 2 100\n10\n").find("line 5") != std::string::npos);
  CHECK(parse_error("3 3\n0.9 0.95\n0.1 0.1 0.1\noptim mi\nga-luby 2 100\n").find("line 6") != std::string::npos);
  CHECK(parse_error(eval_input("000") + "extra\n").find("line 14") != std::string::npos);
  CHECK_THROWS_AS(parse_job("40 1\n0.9 0.9\n"), Error);
}

TEST_CASE("parse and format round-trip") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    JobInput in;
    in.n = testing::random_int(rng, 1, 6);
    in.m = testing::random_int(rng, 0, 5);
    in.tpr = testing::uniform01(rng);
    in.tnr = testing::uniform01(rng);
    for (int i = 0; i < in.n; ++i) in.priors.push_back(testing::uniform01(rng));
    if (trial % 2 == 0) {
      in.mode = JobMode::kEval;
      in.eval.designs = testing::random_designs(rng, in.n, in.m);
      for (int j = 0; j < in.m; ++j) in.eval.results.push_back(rng() & 1U);
    } else {
      in.mode = JobMode::kOptim;
      in.optim.objective = trial % 4 == 1 ? Objective::kMutualInformation : Objective::kExpectedConfidence;
      in.optim.optimizer = trial % 3 == 0 ? OptimizerKind::kExhaustive : OptimizerKind::kEvolution;
      if (in.optim.optimizer == OptimizerKind::kEvolution) {
        in.optim.lambda = testing::random_int(rng, 1, 9);
        in.optim.base = testing::random_int(rng, 1, 500);
      }
      in.optim.budget = testing::random_int(rng, 1, 100000);
    }
    const auto text = format_job(in);
    CHECK(parse_job(text) == in);
  }
}

TEST_CASE("impossible observations are a domain error") {
  const auto in = parse_job("1 1\n1 1\n0\neval\n1\n1\n");
  CHECK_THROWS_WITH_AS(run_eval(in), doctest::Contains("probability"), Error);
}
