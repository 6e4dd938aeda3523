#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "poolinfo/adaptive.hpp"
#include "poolinfo/dorfman.hpp"
#include "poolinfo/format.hpp"
#include "poolinfo/oracles.hpp"
#include "poolinfo/protocol.hpp"

using namespace poolinfo;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(POOLINFO_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Run r;
  char buf[4096];
  for (std::size_t got; (got = fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("poolinfo_cli_" + std::to_string(::getpid()) + "_" + name);
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("run reproduces the eval text format") {
  const auto job = write_temp("job", "3 3\n\n0.99 0.95\n\n0.1 0.1 0.1\n\neval \n\n011\n101\n110\n\n011\n");
  const auto r = run("run " + job.string());
  CHECK(r.status == 0);
  CHECK(r.out == "most probable diagnosis: 100\nconfidence: 0.973086\n\nmarginals: 0.975488 0.00292 0.00292 \n");
  const auto j = run("run " + job.string() + " --format json");
  CHECK(j.out.find("\"diagnosis\": \"100\"") != std::string::npos);
}

TEST_CASE("run writes to an output file") {
  const auto job = write_temp("optim", "3 3\n0.99 0.95\n0.1 0.1 0.1\noptim confidence\nexhaustive\n1\n");
  const auto out = write_temp("optim_out", "");
  CHECK(run("run " + job.string() + " -o " + out.string()).status == 0);
  CHECK(slurp(out) == "expected confidence:\n0.958704\n\ntests (one per line):\n110\n101\n011\n");
}

TEST_CASE("exit codes") {
  CHECK(run("").status == 1);
  CHECK(run("--help").status == 0);
  CHECK(run("run " + write_temp("bad", "3 3\n0.9 0.9\n0.1 0.1\neval\n").string()).status == 1);
  CHECK(run("run " + write_temp("zero", "1 1\n1 1\n0\neval\n1\n1\n").string()).status == 2);
  CHECK(run("run " + write_temp("big", "20 1\n1 1\n").string()).status == 3);
  CHECK(run("run " + write_temp("capped", "5 1\n1 1\n0 0 0 0 0\neval\n10000\n0\n").string() + " --max-n 4").status == 3);
}

TEST_CASE("scripted adaptive run matches the library trace byte for byte") {
  const std::vector<bool> answers{true, false, true, true};
  std::string script;
  for (bool a : answers) script += a ? "1\n" : "0\n";
  const auto path = write_temp("script", script);
  const Prior prior({0.1, 0.2, 0.05, 0.15});
  const TestSpec spec(0.95, 0.99);

  std::size_t next = 0;
  const auto trace = run_greedy_policy(prior, spec, 4, [&](PoolDesign) { return answers.at(next++); });
  const auto r = run("adaptive --priors \"0.1 0.2 0.05 0.15\" --tpr 0.95 --tnr 0.99 -m 4 --script " + path.string());
  CHECK(r.status == 0);
  CHECK(r.out == format_trace(trace));
}

TEST_CASE("adaptive script errors are usage errors") {
  const auto path = write_temp("bad_script", "2\n");
  CHECK(run("adaptive --priors \"0.1 0.1\" --tpr 0.9 --tnr 0.9 -m 1 --script " + path.string()).status == 1);
}

TEST_CASE("oracle dorfman passes the analytic value through") {
  const auto r = run("oracle dorfman --priors \"0.1 0.1 0.1 0.1 0.1 0.1\" --tpr 0.95 --tnr 0.99 --groups 3 3");
  const Prior prior(std::vector<double>(6, 0.1));
  const double expected = oracle::dorfman_expected_tests(DorfmanPlan::from_sizes(6, {3, 3}), prior, TestSpec(0.95, 0.99));
  CHECK(r.status == 0);
  CHECK(r.out == "expected tests: " + format_g6(expected) + "\n");
  CHECK(run("oracle dorfman --priors \"0.1 0.1\" --tpr 0.95 --tnr 0.99 --groups 3").status == 2);
}

TEST_CASE("oracle naive and policy") {
  const auto job = write_temp("naive", "3 3\n0.99 0.95\n0.1 0.1 0.1\neval\n110\n101\n011\n000\n");
  const auto r = run("oracle naive " + job.string());
  CHECK(r.out.find("expected confidence: 0.958704") != std::string::npos);
  const auto p = run("oracle policy --priors \"0.1 0.1 0.1\" --tpr 0.95 --tnr 0.99 --budget 2");
  CHECK(p.status == 0);
  CHECK(p.out.find("optimal adaptive information:") == 0);
  CHECK(run("oracle policy --priors \"0.1 0.1 0.1 0.1\" --tpr 0.95 --tnr 0.99").status == 3);
}

TEST_CASE("simulate is deterministic in the seed") {
  const auto config = write_temp("scenarios", R"(tpr = 0.99
tnr = 0.95
priors = 0.1 0.1 0.1
trials = 500
seed = 11
[fixed]
strategy = fixed
designs = 110 101 011
[greedy]
strategy = greedy
m = 3
)");
  const auto csv1 = write_temp("trials1.csv", "");
  const auto csv2 = write_temp("trials2.csv", "");
  const auto a = run("simulate --config " + config.string() + " --csv " + csv1.string() + " --threads 1");
  const auto b = run("simulate --config " + config.string() + " --csv " + csv2.string() + " --threads 3");
  CHECK(a.status == 0);
  CHECK(a.out == b.out);
  CHECK(slurp(csv1) == slurp(csv2));
  CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 3);
  const auto text = slurp(csv1);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1001);
  CHECK(run("simulate --config " + write_temp("bad.ini", "bogus = 1\n").string()).status == 1);
}
