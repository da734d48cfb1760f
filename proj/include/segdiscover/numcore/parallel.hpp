#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace segdiscover {

/// Runs f(i) for i in [0, n) across OpenMP threads. Exceptions cannot
/// cross the parallel region, so each is captured and the one from the
/// lowest index is rethrown afterwards.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace segdiscover
