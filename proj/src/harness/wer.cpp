#include <algorithm>

#include "lecb/error.hpp"
#include "lecb/harness.hpp"

namespace lecb::harness {

EditCounts edit_counts(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  // Two-row DP carrying the operation counts of the cheapest path. Among
  // equal-cost paths substitutions are preferred, then deletions.
  struct Cell {
    std::size_t cost;
    EditCounts ops;
  };
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {j, {0, 0, j}};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {i, {0, i, 0}};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = ref[i - 1] == hyp[j - 1];
      Cell best = prev[j - 1];
      best.cost += same ? 0 : 1;
      if (!same) ++best.ops.substitutions;
      if (prev[j].cost + 1 < best.cost) {
        best = prev[j];
        best.cost += 1;
        ++best.ops.deletions;
      }
      if (cur[j - 1].cost + 1 < best.cost) {
        best = cur[j - 1];
        best.cost += 1;
        ++best.ops.insertions;
      }
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[m].ops;
}

std::size_t edit_distance(const std::vector<std::string>& ref,
                          const std::vector<std::string>& hyp) {
  return edit_counts(ref, hyp).total();
}

double wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) throw ConfigError("wer: reference is empty");
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

}  // namespace lecb::harness
