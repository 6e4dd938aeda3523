#include <map>
#include <set>
#include <sstream>

#include "poolinfo/error.hpp"
#include "poolinfo/simulator.hpp"

namespace poolinfo::sim {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

using Section = std::map<std::string, Entry>;

const std::set<std::string> kKnownKeys = {
    "id",       "strategy", "priors", "n",      "prior",     "tpr",     "tnr",
    "pool_rates", "trials", "seed",   "designs", "m",        "lambda",  "base",
    "budget",   "es_seed",  "objective", "batches", "groups"};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(int line, const std::string& message) {
  throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + message);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

class Reader {
 public:
  explicit Reader(const Section& section) : section_(section) {}

  bool has(const std::string& key) const { return section_.count(key) != 0; }
  int line(const std::string& key) const { return has(key) ? section_.at(key).line : 0; }

  const Entry& require(const std::string& key) const {
    auto it = section_.find(key);
    if (it == section_.end()) throw Error(ErrorCode::kParse, "missing key '" + key + "'", key);
    return it->second;
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? section_.at(key).value : fallback;
  }

  double real(const std::string& key) const {
    const auto& e = require(key);
    return parse_real(e.value, e.line, key);
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& e = section_.at(key);
    return parse_integer(e.value, e.line, key);
  }

  std::vector<double> reals(const std::string& key) const {
    const auto& e = require(key);
    std::vector<double> out;
    for (const auto& w : words(e.value)) out.push_back(parse_real(w, e.line, key));
    return out;
  }

  std::vector<int> integers(const std::string& key) const {
    const auto& e = require(key);
    std::vector<int> out;
    for (const auto& w : words(e.value)) out.push_back(static_cast<int>(parse_integer(w, e.line, key)));
    return out;
  }

  static double parse_real(const std::string& s, int line, const std::string& key) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    fail(line, "'" + key + "' expects a number, got '" + s + "'");
  }

  static std::int64_t parse_integer(const std::string& s, int line, const std::string& key) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    fail(line, "'" + key + "' expects an integer, got '" + s + "'");
  }

 private:
  const Section& section_;
};

Scenario build(const std::string& id, const Section& section) {
  Reader r(section);
  std::vector<double> probs;
  if (r.has("priors")) {
    probs = r.reals("priors");
  } else {
    const auto n = r.integer("n", 0);
    if (n < 1) throw Error(ErrorCode::kParse, "give either 'priors' or 'n' with 'prior'", "priors");
    probs.assign(static_cast<std::size_t>(n), r.real("prior"));
  }

  std::map<int, Rates> by_size;
  if (r.has("pool_rates")) {
    const auto& e = r.require("pool_rates");
    for (const auto& w : words(e.value)) {
      const auto a = w.find(':');
      const auto b = w.find(':', a == std::string::npos ? a : a + 1);
      if (a == std::string::npos || b == std::string::npos) fail(e.line, "pool_rates entries are size:tpr:tnr");
      const int k = static_cast<int>(Reader::parse_integer(w.substr(0, a), e.line, "pool_rates"));
      by_size[k] = Rates{Reader::parse_real(w.substr(a + 1, b - a - 1), e.line, "pool_rates"),
                         Reader::parse_real(w.substr(b + 1), e.line, "pool_rates")};
    }
  }

  Prior prior(probs);
  TestSpec spec(r.real("tpr"), r.real("tnr"), by_size);
  const int n = prior.n();
  const std::string kind = r.text("strategy", "");
  Strategy strategy = GreedyAdaptive{};
  if (kind == "fixed") {
    DesignMultiset designs;
    const auto& e = r.require("designs");
    for (const auto& w : words(e.value)) {
      if (static_cast<int>(w.size()) != n) fail(e.line, "design '" + w + "' must have n characters");
      try {
        designs.push_back(PoolDesign::parse(w));
      } catch (const Error& err) {
        fail(e.line, err.what());
      }
    }
    strategy = FixedDesigns{designs};
  } else if (kind == "es") {
    EvolvedDesigns es;
    es.m = static_cast<int>(r.integer("m", 0));
    es.es.lambda = static_cast<int>(r.integer("lambda", 2));
    es.es.base = static_cast<int>(r.integer("base", 100));
    es.es.budget = r.integer("budget", 1000);
    es.es.seed = static_cast<std::uint64_t>(r.integer("es_seed", 0));
    const std::string objective = r.text("objective", "confidence");
    if (objective == "confidence") {
      es.es.objective = Objective::kExpectedConfidence;
    } else if (objective == "mi" || objective == "mutual_information") {
      es.es.objective = Objective::kMutualInformation;
    } else {
      fail(r.line("objective"), "objective must be 'confidence' or 'mi'");
    }
    strategy = es;
  } else if (kind == "greedy") {
    strategy = GreedyAdaptive{static_cast<int>(r.integer("m", 0))};
  } else if (kind == "kgreedy") {
    strategy = KGreedy{r.integers("batches")};
  } else if (kind == "dorfman") {
    strategy = Dorfman{DorfmanPlan::from_sizes(n, r.integers("groups"))};
  } else {
    fail(r.line("strategy"), "strategy must be one of fixed, es, greedy, kgreedy, dorfman");
  }

  return Scenario{.id = r.text("id", id),
                  .prior = prior,
                  .spec = spec,
                  .strategy = strategy,
                  .trials = r.integer("trials", 1000),
                  .seed = static_cast<std::uint64_t>(r.integer("seed", 0)),
                  .caps = Caps{}};
}

}  // namespace

std::vector<Scenario> parse_scenarios(const std::string& text) {
  Section defaults;
  std::vector<std::pair<std::string, Section>> sections;
  Section* target = &defaults;

  std::istringstream in(text);
  std::string raw;
  for (int line = 1; std::getline(in, raw); ++line) {
    std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) fail(line, "malformed section header");
      sections.emplace_back(trim(s.substr(1, s.size() - 2)), Section{});
      target = &sections.back().second;
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    if (kKnownKeys.count(key) == 0) fail(line, "unknown key '" + key + "'");
    (*target)[key] = Entry{trim(s.substr(eq + 1)), line};
  }

  std::vector<Scenario> out;
  if (sections.empty()) {
    out.push_back(build("scenario", defaults));
    return out;
  }
  for (auto& [name, section] : sections) {
    Section merged = defaults;
    for (auto& [k, v] : section) merged[k] = v;
    out.push_back(build(name, merged));
  }
  return out;
}

}  // namespace poolinfo::sim
