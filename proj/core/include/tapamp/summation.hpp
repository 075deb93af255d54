#pragma once

#include <cstddef>
#include <span>

namespace tapamp {

// Cascade (pairwise) summation of f(i) over [begin, end). Error grows like
// O(log n) in ulps instead of O(n) for a running sum, which matters for the
// sqrt(N)-scaled field sums. The evaluation tree is a function of the index
// range only, so results are identical regardless of caller threading.
template <class F>
double pairwise_sum_indexed(std::size_t begin, std::size_t end, F&& f) {
  const std::size_t n = end - begin;
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += f(i);
    return s;
  }
  const std::size_t mid = begin + n / 2;
  return pairwise_sum_indexed(begin, mid, f) + pairwise_sum_indexed(mid, end, f);
}

double pairwise_sum(std::span<const double> xs);

}  // namespace tapamp
