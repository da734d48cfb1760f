#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace segdiscover {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kUnmatched = -1;

/// Injective map from predicted symbols to ground-truth classes.
struct Mapping {
  std::vector<int> to_class;  // indexed by predicted symbol; kUnmatched when unassigned

  /// Class of a predicted symbol, kUnmatched for unassigned or
  /// out-of-range symbols (including null).
  int operator()(int symbol) const {
    if (symbol < 0 || symbol >= static_cast<int>(to_class.size())) return kUnmatched;
    return to_class[static_cast<std::size_t>(symbol)];
  }

  friend bool operator==(const Mapping&, const Mapping&) = default;
};

struct Assignment {
  Mapping mapping;
  std::int64_t total = 0;  // summed overlap of the assigned pairs
};

/// Maximum-overlap assignment of rows (predicted symbols) to columns
/// (ground-truth classes) by Kuhn-Munkres with integer potentials on the
/// zero-padded square of the negated matrix. O(n^3).
Assignment hungarian_match(const CountMatrix& overlap);

}  // namespace segdiscover
