#pragma once

#include <vector>

namespace poolinfo {

/// Two-stage pooling plan: every group is tested as one pool, members of
/// positive pools are then retested one by one. Patients are 0-based.
class DorfmanPlan {
 public:
  /// Validates that the groups are non-empty, disjoint and cover 0..n-1.
  DorfmanPlan(int n, std::vector<std::vector<int>> groups);

  /// Splits n patients into g contiguous groups of near-equal size.
  static DorfmanPlan equal_groups(int n, int g);
  /// Contiguous groups with the listed sizes.
  static DorfmanPlan from_sizes(int n, const std::vector<int>& sizes);

  int n() const { return n_; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }

 private:
  int n_;
  std::vector<std::vector<int>> groups_;
};

}  // namespace poolinfo
