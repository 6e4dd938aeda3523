#include "poolinfo/model.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>

#include "poolinfo/error.hpp"

namespace poolinfo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kLengthMismatch: return "length_mismatch";
    case ErrorCode::kZeroProbabilityOutcome: return "zero_probability_outcome";
    case ErrorCode::kCapExceeded: return "cap_exceeded";
    case ErrorCode::kBudgetExhausted: return "budget_exhausted";
    case ErrorCode::kEmptyHistory: return "empty_history";
    case ErrorCode::kParse: return "parse_error";
  }
  return "unknown";
}

namespace {

constexpr int kMaskBits = 30;

void read_env_cap(const char* name, int& target) {
  if (const char* value = std::getenv(name); value != nullptr && *value != '\0') {
    char* end = nullptr;
    long parsed = std::strtol(value, &end, 10);
    if (*end != '\0' || parsed < 0 || parsed > kMaskBits) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(name) + " must be an integer in [0, 30]", name);
    }
    target = static_cast<int>(parsed);
  }
}

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

Caps Caps::from_env() {
  Caps caps;
  read_env_cap("POOLINFO_MAX_N", caps.max_n);
  read_env_cap("POOLINFO_MAX_M", caps.max_m);
  read_env_cap("POOLINFO_MAX_JOINT", caps.max_joint);
  read_env_cap("POOLINFO_MAX_GREEDY_N", caps.max_greedy_n);
  return caps;
}

void Caps::check_patients(int n) const {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "patient count must be at least 1", "n");
  if (n > max_n || n > kMaskBits) {
    throw Error(ErrorCode::kCapExceeded,
                "patient count " + std::to_string(n) + " exceeds cap " + std::to_string(max_n),
                "n");
  }
}

void Caps::check_tests(int n, int m) const {
  check_patients(n);
  if (m < 0) throw Error(ErrorCode::kInvalidArgument, "test count must be non-negative", "m");
  if (m > max_m) {
    throw Error(ErrorCode::kCapExceeded,
                "test count " + std::to_string(m) + " exceeds cap " + std::to_string(max_m), "m");
  }
  if (n + m > max_joint) {
    throw Error(ErrorCode::kCapExceeded,
                "n + m = " + std::to_string(n + m) + " exceeds joint cap " +
                    std::to_string(max_joint),
                "m");
  }
}

Mask parse_bits(std::string_view bits) {
  if (bits.empty() || bits.size() > kMaskBits) {
    throw Error(ErrorCode::kParse, "bit string must have 1 to 30 characters");
  }
  Mask mask = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      mask |= Mask{1} << i;
    } else if (bits[i] != '0') {
      throw Error(ErrorCode::kParse, "bit string may only contain '0' and '1': \"" +
                                         std::string(bits) + "\"");
    }
  }
  return mask;
}

std::string format_bits(Mask mask, int n) {
  std::string out(static_cast<std::size_t>(n), '0');
  for (int i = 0; i < n; ++i) {
    if ((mask >> i) & 1U) out[static_cast<std::size_t>(i)] = '1';
  }
  return out;
}

SecretIndex SecretIndex::parse(std::string_view bits) { return SecretIndex(parse_bits(bits)); }
std::string SecretIndex::to_string(int n) const { return format_bits(value_, n); }

PoolDesign PoolDesign::parse(std::string_view bits) { return PoolDesign(parse_bits(bits)); }
std::string PoolDesign::to_string(int n) const { return format_bits(mask_, n); }

DesignMultiset parse_designs(std::span<const std::string> bits) {
  DesignMultiset out;
  out.reserve(bits.size());
  for (const auto& b : bits) out.push_back(PoolDesign::parse(b));
  return out;
}

OutcomeVector parse_outcomes(std::string_view bits) {
  OutcomeVector out;
  out.reserve(bits.size());
  for (char c : bits) {
    if (c != '0' && c != '1') {
      throw Error(ErrorCode::kParse, "results may only contain '0' and '1'");
    }
    out.push_back(c == '1');
  }
  return out;
}

TestSpec::TestSpec(double tpr, double tnr, std::map<int, Rates> by_pool_size)
    : defaults_{tpr, tnr}, by_pool_size_(std::move(by_pool_size)) {
  if (!is_probability(tpr)) throw Error(ErrorCode::kInvalidArgument, "tpr must lie in [0, 1]", "tpr");
  if (!is_probability(tnr)) throw Error(ErrorCode::kInvalidArgument, "tnr must lie in [0, 1]", "tnr");
  for (const auto& [size, rates] : by_pool_size_) {
    if (size < 1) {
      throw Error(ErrorCode::kInvalidArgument, "pool size keys must be at least 1",
                  "by_pool_size");
    }
    if (!is_probability(rates.tpr) || !is_probability(rates.tnr)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "rates for pool size " + std::to_string(size) + " must lie in [0, 1]",
                  "by_pool_size");
    }
  }
}

Rates TestSpec::rates_for(int pool_size) const {
  if (auto it = by_pool_size_.find(pool_size); it != by_pool_size_.end()) return it->second;
  return defaults_;
}

Prior::Prior(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(ErrorCode::kInvalidArgument, "prior needs at least one patient", "priors");
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (!is_probability(probs_[i])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "prior of patient " + std::to_string(i + 1) + " must lie in [0, 1]", "priors");
    }
  }
}

SecretDistribution::SecretDistribution(int n, std::vector<double> mass)
    : n_(n), mass_(std::move(mass)) {
  if (n < 1 || n > kMaskBits) throw Error(ErrorCode::kInvalidArgument, "bad patient count", "n");
  if (mass_.size() != (std::size_t{1} << n)) {
    throw Error(ErrorCode::kLengthMismatch, "distribution must have 2^n entries");
  }
  double total = 0.0;
  for (double w : mass_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidArgument, "distribution entries must be non-negative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "distribution must sum to 1");
  }
}

SecretDistribution SecretDistribution::point_mass(int n, SecretIndex s) {
  std::vector<double> mass(std::size_t{1} << n, 0.0);
  mass.at(s.value()) = 1.0;
  return SecretDistribution(n, std::move(mass));
}

SecretDistribution SecretDistribution::uniform(int n) {
  const std::size_t size = std::size_t{1} << n;
  return SecretDistribution(n, std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

SecretDistribution prior_to_distribution(const Prior& prior, const Caps& caps) {
  const int n = prior.n();
  caps.check_patients(n);
  // Doubling construction: after step i the table covers patients 1..i+1.
  std::vector<double> mass(std::size_t{1} << n, 0.0);
  mass[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    const std::size_t half = std::size_t{1} << i;
    const double p = prior[i];
    for (std::size_t s = 0; s < half; ++s) {
      mass[s | half] = mass[s] * p;
      mass[s] *= 1.0 - p;
    }
  }
  return SecretDistribution(n, std::move(mass));
}

}  // namespace poolinfo
