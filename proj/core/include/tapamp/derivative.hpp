#pragma once

#include <Eigen/Core>

#include "tapamp/disorder.hpp"
#include "tapamp/dynamics.hpp"
#include "tapamp/params.hpp"

namespace tapamp {

inline constexpr int kFiniteDifferenceGuardN = 64;
inline constexpr double kDefaultFiniteDifferenceStep = 1e-5;
inline constexpr int kDerivativeTensorGuardN = 400;

int pair_count(int n);
// Column index of the unordered pair {y,z}, y != z, 0-based sites.
int pair_index(int y, int z, int n);

// First derivatives of all magnetizations with respect to all couplings:
// d(j, p({y,z})) = d m_j^(k) / d g_{yz}. Pair-major layout so the inner
// contraction sum_l g_jl d(l, p) is a single matrix product.
struct DerivativeTensor {
  int iterate = 1;
  int n = 0;
  Eigen::MatrixXd d;  // n rows, n(n-1)/2 columns

  double at(int j, int y, int z) const { return d(j, pair_index(y, z, n)); }
};

// Tensor for iterate 1 (identically zero: the start is disorder-free).
DerivativeTensor zero_tensor(int n, int iterate = 1);

// Delta error functional for the iterate of d_cur, captured as a byproduct
// of propagation: delta(x, p) = (beta/sqrt(N)) (G d_cur)(x, p) - dOn(x, p).
struct PropagationCapture {
  Eigen::MatrixXd delta;
};

// Chain rule through one TAP update. d_prev / d_cur are the tensors for
// iterates k-1 and k; state must already hold m^(k+1). The reaction-term
// derivative uses the analytic classical expression; for the re-centering
// choice that same expression acts as a first-order closure (the exact
// derivative would recurse into higher-order tensors).
DerivativeTensor propagate_derivatives(const DerivativeTensor& d_prev,
                                       const DerivativeTensor& d_cur,
                                       const IterationState& state,
                                       const DisorderMatrix& g,
                                       const ModelParams& params,
                                       PropagationCapture* capture = nullptr,
                                       int threads = 1);

// On_i = (beta/sqrt(N)) sum_{j != i} d(j, {i,j}).
Eigen::VectorXd onsager_stein(const DerivativeTensor& d, const ModelParams& params);

// E_x = (beta/sqrt(N)) sum_{l != x} d(l, {x,l}) - On_x^(k), with On^(k) taken
// from the state (so the state must sit one step past d's iterate).
Eigen::VectorXd compute_epsilon(const DerivativeTensor& d, const IterationState& state,
                                const ModelParams& params);

// d On_x^(k) / d g_{yz} as an n x P matrix (classical expression):
// beta^2 (1-q^(k)) d_prev - (2 beta^2 / N) m^(k-1) (m^(k)^T d_cur).
Eigen::MatrixXd onsager_derivative(const DerivativeTensor& d_prev,
                                   const DerivativeTensor& d_cur,
                                   const Eigen::VectorXd& m_cur,
                                   const Eigen::VectorXd& m_prev,
                                   const ModelParams& params);

// Delta_{x;y,z} = (beta/sqrt(N)) sum_l g_xl d(l, {y,z}) - ons_deriv(x, {y,z}).
double compute_delta(const DerivativeTensor& d, const Eigen::MatrixXd& ons_deriv,
                     const DisorderMatrix& g, const ModelParams& params, int x, int y,
                     int z);

// Central differences of the full iteration over every coupling pair; the
// reference oracle for the propagated tensor. For the re-centering choice the
// perturbed runs nest the tensor propagation, so this is the exact derivative
// of the map the engine actually computes. Guarded to n <= 64.
DerivativeTensor finite_difference_tensor(const DisorderMatrix& g, const Eigen::VectorXd& m1,
                                          const ModelParams& params, OnsagerChoice choice,
                                          int k, double step = kDefaultFiniteDifferenceStep);

}  // namespace tapamp
