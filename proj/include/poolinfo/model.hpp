#pragma once

// Exact representation of the pooled-testing model: patients, secrets,
// pool designs, the noisy test channel and probability tables over all
// 2^n infection secrets.

#include <bit>
#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace poolinfo {

using Mask = std::uint32_t;

/// Size limits for exact enumeration. Score evaluation touches 2^(n+m)
/// table entries, so every cap is on an exponent.
struct Caps {
  int max_n = 16;          // patients in a probability table
  int max_m = 16;          // tests in one scored multiset
  int max_joint = 28;      // n + m for exact outcome enumeration
  int max_greedy_n = 12;   // exhaustive design argmax in the greedy planner

  /// Defaults overridden by POOLINFO_MAX_N, POOLINFO_MAX_M,
  /// POOLINFO_MAX_JOINT and POOLINFO_MAX_GREEDY_N when set.
  static Caps from_env();

  void check_patients(int n) const;
  void check_tests(int n, int m) const;
};

/// Infection state of all patients. Bit (i-1) is patient i; the string
/// form puts patient 1 leftmost.
class SecretIndex {
 public:
  constexpr SecretIndex() = default;
  constexpr explicit SecretIndex(Mask value) : value_(value) {}

  constexpr Mask value() const { return value_; }
  constexpr bool infected(int patient) const { return (value_ >> patient) & 1U; }

  static SecretIndex parse(std::string_view bits);
  std::string to_string(int n) const;

  friend constexpr auto operator<=>(SecretIndex, SecretIndex) = default;

 private:
  Mask value_ = 0;
};

/// Set of patients mixed into one pooled sample, same bit layout as
/// SecretIndex. The empty pool is legal.
class PoolDesign {
 public:
  constexpr PoolDesign() = default;
  constexpr explicit PoolDesign(Mask mask) : mask_(mask) {}

  constexpr Mask mask() const { return mask_; }
  constexpr int size() const { return std::popcount(mask_); }
  constexpr bool contains(int patient) const { return (mask_ >> patient) & 1U; }
  constexpr bool hits(SecretIndex s) const { return (mask_ & s.value()) != 0; }

  static PoolDesign parse(std::string_view bits);
  std::string to_string(int n) const;

  friend constexpr auto operator<=>(PoolDesign, PoolDesign) = default;

 private:
  Mask mask_ = 0;
};

/// Ordered for bookkeeping only; every score is invariant under permutation.
using DesignMultiset = std::vector<PoolDesign>;

/// Lab results; position j belongs to design j of the paired multiset.
using OutcomeVector = std::vector<bool>;

/// Parses "0"/"1" characters into a mask, patient 1 leftmost.
Mask parse_bits(std::string_view bits);
std::string format_bits(Mask mask, int n);

DesignMultiset parse_designs(std::span<const std::string> bits);
OutcomeVector parse_outcomes(std::string_view bits);

struct Rates {
  double tpr = 1.0;
  double tnr = 1.0;

  friend bool operator==(const Rates&, const Rates&) = default;
};

/// Test error model. Sensitivity/specificity may be overridden for pools
/// of an exact size (dilution effects); otherwise the defaults apply.
class TestSpec {
 public:
  TestSpec(double tpr, double tnr, std::map<int, Rates> by_pool_size = {});

  double tpr() const { return defaults_.tpr; }
  double tnr() const { return defaults_.tnr; }
  const std::map<int, Rates>& by_pool_size() const { return by_pool_size_; }

  Rates rates_for(int pool_size) const;

  friend bool operator==(const TestSpec&, const TestSpec&) = default;

 private:
  Rates defaults_;
  std::map<int, Rates> by_pool_size_;
};

/// Independent per-patient infection probabilities; index i-1 is patient i.
class Prior {
 public:
  explicit Prior(std::vector<double> probs);

  int n() const { return static_cast<int>(probs_.size()); }
  double operator[](int patient) const { return probs_[patient]; }
  const std::vector<double>& probs() const { return probs_; }

  friend bool operator==(const Prior&, const Prior&) = default;

 private:
  std::vector<double> probs_;
};

/// Probability table over all 2^n secrets.
class SecretDistribution {
 public:
  /// Validates length 2^n, non-negativity and total mass within 1e-9 of 1.
  SecretDistribution(int n, std::vector<double> mass);

  static SecretDistribution point_mass(int n, SecretIndex s);
  static SecretDistribution uniform(int n);

  int n() const { return n_; }
  std::size_t size() const { return mass_.size(); }
  double operator[](SecretIndex s) const { return mass_[s.value()]; }
  std::span<const double> mass() const { return mass_; }

 private:
  int n_;
  std::vector<double> mass_;
};

SecretDistribution prior_to_distribution(const Prior& prior, const Caps& caps = {});

struct DiagnosisReport {
  SecretIndex ml_secret;
  double confidence = 0.0;
  std::vector<double> marginals;
  double entropy_bits = 0.0;
};

}  // namespace poolinfo
