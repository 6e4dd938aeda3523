#include "poolinfo/dorfman.hpp"

#include <numeric>
#include <string>

#include "poolinfo/error.hpp"

namespace poolinfo {

DorfmanPlan::DorfmanPlan(int n, std::vector<std::vector<int>> groups)
    : n_(n), groups_(std::move(groups)) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "plan needs at least one patient", "n");
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& group : groups_) {
    if (group.empty()) throw Error(ErrorCode::kInvalidArgument, "empty Dorfman group", "groups");
    for (int patient : group) {
      if (patient < 0 || patient >= n) {
        throw Error(ErrorCode::kInvalidArgument,
                    "patient " + std::to_string(patient) + " out of range", "groups");
      }
      if (seen[static_cast<std::size_t>(patient)]++ != 0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "patient " + std::to_string(patient) + " assigned twice", "groups");
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (seen[static_cast<std::size_t>(i)] == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "patient " + std::to_string(i) + " not assigned to any group", "groups");
    }
  }
}

DorfmanPlan DorfmanPlan::equal_groups(int n, int g) {
  if (g < 1 || g > n) throw Error(ErrorCode::kInvalidArgument, "group count must be in [1, n]", "groups");
  std::vector<int> sizes(static_cast<std::size_t>(g), n / g);
  for (int i = 0; i < n % g; ++i) ++sizes[static_cast<std::size_t>(i)];
  return from_sizes(n, sizes);
}

DorfmanPlan DorfmanPlan::from_sizes(int n, const std::vector<int>& sizes) {
  if (std::accumulate(sizes.begin(), sizes.end(), 0) != n) {
    throw Error(ErrorCode::kInvalidArgument, "group sizes must add up to n", "groups");
  }
  std::vector<std::vector<int>> groups;
  int next = 0;
  for (int size : sizes) {
    if (size < 1) throw Error(ErrorCode::kInvalidArgument, "group sizes must be positive", "groups");
    std::vector<int> group(static_cast<std::size_t>(size));
    std::iota(group.begin(), group.end(), next);
    next += size;
    groups.push_back(std::move(group));
  }
  return DorfmanPlan(n, std::move(groups));
}

}  // namespace poolinfo
