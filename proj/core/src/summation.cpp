#include "tapamp/summation.hpp"

namespace tapamp {

double pairwise_sum(std::span<const double> xs) {
  return pairwise_sum_indexed(0, xs.size(), [&](std::size_t i) { return xs[i]; });
}

}  // namespace tapamp
