#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace lps::par {

// Fixed block length used by every parallel reduction in the library.
// Partial results are accumulated serially within a block and the blocks are
// combined in index order, so every sum is bit-identical for any thread count.
inline constexpr std::ptrdiff_t kBlock = 1024;

int max_threads();
void set_threads(int n);

inline std::ptrdiff_t block_count(std::ptrdiff_t n, std::ptrdiff_t block = kBlock) {
  return n <= 0 ? 0 : (n + block - 1) / block;
}

/// fn(b, lo, hi) once per block b covering [lo, hi).
template <class F>
void for_blocks(std::ptrdiff_t n, F&& fn, std::ptrdiff_t block = kBlock) {
  const std::ptrdiff_t nb = block_count(n, block);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const std::ptrdiff_t lo = b * block;
    fn(b, lo, std::min(n, lo + block));
  }
}

/// Deterministic blocked sum of fn(i) over [0, n).
template <class F>
double blocked_sum(std::ptrdiff_t n, F&& fn, std::ptrdiff_t block = kBlock) {
  const std::ptrdiff_t nb = block_count(n, block);
  std::vector<double> partial(static_cast<std::size_t>(nb), 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const std::ptrdiff_t lo = b * block;
    const std::ptrdiff_t hi = std::min(n, lo + block);
    double s = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) s += fn(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

/// Deterministic blocked accumulation of arbitrary partials: `make` fills the
/// partial for one block, `combine` folds them in index order.
template <class Partial, class Make, class Combine>
Partial blocked_reduce(std::ptrdiff_t n, Partial init, Make&& make, Combine&& combine,
                       std::ptrdiff_t block = kBlock) {
  const std::ptrdiff_t nb = block_count(n, block);
  std::vector<Partial> partial(static_cast<std::size_t>(nb), init);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const std::ptrdiff_t lo = b * block;
    make(partial[static_cast<std::size_t>(b)], lo, std::min(n, lo + block));
  }
  Partial total = init;
  for (const Partial& p : partial) combine(total, p);
  return total;
}

}  // namespace lps::par
