#pragma once

#include <utility>
#include <vector>

#include "tapamp/summation.hpp"

namespace tapamp {

// Gauss-Hermite rule normalized against the standard normal density:
//   sum_i weights[i] * f(nodes[i])  ~  E[f(Z)],  Z ~ N(0,1),
// exact for polynomials up to degree 2*order - 1. Nodes are ascending and
// exactly symmetric about 0; matching weights are exactly equal; weights sum
// to 1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int order() const { return static_cast<int>(nodes.size()); }

  // E[f(Z)]. Mirror nodes are combined before accumulation so odd integrands
  // cancel exactly in floating point.
  template <class F>
  double expect(F&& f) const {
    const int n = order();
    const int half = n / 2;
    double acc = pairwise_sum_indexed(0, static_cast<std::size_t>(half), [&](std::size_t i) {
      const int lo = static_cast<int>(i);
      const int hi = n - 1 - lo;
      return weights[lo] * (f(nodes[lo]) + f(nodes[hi]));
    });
    if (n % 2 != 0) acc += weights[half] * f(nodes[half]);
    return acc;
  }
};

// Golub-Welsch on the probabilists' Hermite Jacobi matrix.
QuadratureRule gauss_hermite(int order);

}  // namespace tapamp
