#include "tapamp/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace tapamp {

QuadratureRule gauss_hermite(int order) {
  if (order < 2) throw std::invalid_argument("gauss_hermite: order must be >= 2");

  // Probabilists' Hermite recurrence: zero diagonal, off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite: eigensolver failed");

  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = solver.eigenvalues()(i);  // ascending
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;  // total mass mu_0 = 1
  }

  // Enforce exact mirror symmetry so odd integrands cancel bit-for-bit.
  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[j] = x;
    rule.nodes[i] = -x;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (order % 2 != 0) rule.nodes[order / 2] = 0.0;

  const double total = pairwise_sum(rule.weights);
  for (double& w : rule.weights) w /= total;
  return rule;
}

}  // namespace tapamp
