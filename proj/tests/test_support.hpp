#pragma once

// Random instance generators shared by the property-style tests.

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "poolinfo/model.hpp"

namespace poolinfo::testing {

inline TestSpec reference_spec() { return TestSpec(0.99, 0.95); }
inline Prior reference_prior(int n = 3) { return Prior(std::vector<double>(static_cast<std::size_t>(n), 0.1)); }

inline double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Either a product prior or an arbitrary (correlated) table, so the
/// scoring paths are exercised beyond independent patients.
inline SecretDistribution random_distribution(std::mt19937_64& rng, int n) {
  std::vector<double> mass(std::size_t{1} << n);
  if (rng() % 2 == 0) {
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (auto& p : probs) p = uniform01(rng);
    return prior_to_distribution(Prior(probs));
  }
  double total = 0.0;
  for (auto& w : mass) {
    w = rng() % 5 == 0 ? 0.0 : -std::log(1.0 - uniform01(rng));
    total += w;
  }
  if (total == 0.0) {
    mass[0] = 1.0;
    total = 1.0;
  }
  for (auto& w : mass) w /= total;
  return SecretDistribution(n, mass);
}

inline TestSpec random_spec(std::mt19937_64& rng, int n) {
  auto rate = [&] { return 0.5 + 0.5 * uniform01(rng); };
  std::map<int, Rates> by_size;
  if (rng() % 3 == 0) {
    for (int k = 1; k <= n; ++k) {
      if (rng() % 2 == 0) by_size[k] = Rates{rate(), rate()};
    }
  }
  return TestSpec(rate(), rate(), by_size);
}

inline DesignMultiset random_designs(std::mt19937_64& rng, int n, int m) {
  DesignMultiset d(static_cast<std::size_t>(m));
  for (auto& x : d) x = PoolDesign(static_cast<Mask>(rng() % (std::uint64_t{1} << n)));
  return d;
}

inline int random_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace poolinfo::testing
