#pragma once

// Thread configuration and reductions whose result does not depend on the
// number of threads: work is cut into fixed-size blocks, each block is summed
// serially, and block partials are combined in index order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace polyproj {

/// Set the OpenMP thread count. `n <= 0` selects hardware parallelism.
void set_thread_count(int n);
int thread_count();

/// Thread count from the POLYPROJ_THREADS environment variable, or 0 if unset.
int thread_count_from_env();

inline constexpr std::size_t kReductionBlock = 1024;

template <class F>
double ordered_sum(std::size_t n, F&& term) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

template <class F>
double ordered_max(std::size_t n, F&& term) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks, -std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i < hi; ++i) m = std::max(m, term(i));
    partial[static_cast<std::size_t>(b)] = m;
  }
  double best = -std::numeric_limits<double>::infinity();
  for (double p : partial) best = std::max(best, p);
  return best;
}

template <class F>
double ordered_min(std::size_t n, F&& term) {
  return -ordered_max(n, [&](std::size_t i) { return -term(i); });
}

}  // namespace polyproj
