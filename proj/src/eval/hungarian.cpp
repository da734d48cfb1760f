#include "segdiscover/eval/hungarian.hpp"

#include <algorithm>
#include <limits>

#include "segdiscover/numcore/errors.hpp"

namespace segdiscover {

Assignment hungarian_match(const CountMatrix& overlap) {
  const auto rows = static_cast<std::size_t>(overlap.rows());
  const auto cols = static_cast<std::size_t>(overlap.cols());
  if ((overlap.array() < 0).any()) throw InvalidArgument("hungarian_match: negative overlap entry");
  Assignment out;
  out.mapping.to_class.assign(rows, kUnmatched);
  if (rows == 0 || cols == 0) return out;

  const std::size_t n = std::max(rows, cols);
  auto cost = [&](std::size_t i, std::size_t j) -> std::int64_t {
    // 1-based indices into the padded square.
    if (i > rows || j > cols) return 0;
    return -overlap(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
  };

  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0), way(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0);  // p[j]: row assigned to column j
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<std::int64_t>(j0);
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const auto j1 = static_cast<std::size_t>(way[j0]);
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= cols; ++j) {
    const std::size_t i = p[j];
    if (i >= 1 && i <= rows) {
      out.mapping.to_class[i - 1] = static_cast<int>(j - 1);
      out.total += overlap(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
    }
  }
  return out;
}

}  // namespace segdiscover
