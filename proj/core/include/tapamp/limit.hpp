#pragma once

#include <vector>

#include "tapamp/params.hpp"
#include "tapamp/quadrature.hpp"

namespace tapamp {

// Defaults: the tanh-type integrands have poles at Im z = pi/(2 beta sqrt(q)),
// so Gauss-Hermite converges like exp(-c sqrt(order) / (beta sqrt(q))). 128
// nodes hold the order-doubling drift below 1e-9 across beta <= 2 (64 does
// not). The fixed-point solvers stop at a 1e-12 map residual, then Newton
// polish runs the iterate to the fixed point itself.
inline constexpr int kDefaultQuadratureOrder = 128;
inline constexpr double kDefaultFixedPointTol = 1e-12;
inline constexpr int kFixedPointBudget = 100000;

// phi(x)   = E tanh^2(h + beta sqrt(x) Z)
// chi(t)   = E tanh(h + beta sqrt(t) Z)
// psi(t,t1,t2) = E tanh(h + beta Z') tanh(h + beta Z''),
//   (Z',Z'') centered Gaussian, Var t1 / t2, Cov t.
double phi(double x, const ModelParams& params, const QuadratureRule& rule);
double chi(double t, const ModelParams& params, const QuadratureRule& rule);
double psi(double t, double t1, double t2, const ModelParams& params,
           const QuadratureRule& rule);

// d phi / dx = (beta^2/2) E (tanh^2)''(h + beta sqrt(x) Z).
double phi_prime(double x, const ModelParams& params, const QuadratureRule& rule);

// Partial derivatives of psi via the Gaussian identities
//   d/dCov  E f(X)g(Y) = E f'(X) g'(Y),
//   d/dVarX E f(X)g(Y) = (1/2) E f''(X) g(Y).
// `boundary` flags |t| = sqrt(t1 t2), where only one-sided derivatives exist.
struct PsiPartials {
  double d_t = 0.0;
  double d_t1 = 0.0;
  double d_t2 = 0.0;
  bool boundary = false;
};
PsiPartials psi_partials(double t, double t1, double t2, const ModelParams& params,
                         const QuadratureRule& rule);

// beta^2 E sech^4(h + beta sqrt(q) Z) - 1; <= 0 means the AT condition holds.
double at_residual(const ModelParams& params, double q, const QuadratureRule& rule);

// Fixed point of phi reached from x0 = 1 (the positive fixed point in the
// h = 0, |beta| > 1 phase), refined by guarded Newton polish.
double solve_q(const ModelParams& params, const QuadratureRule& rule,
               double tol = kDefaultFixedPointTol);

// Smallest non-negative fixed point of t -> psi(t, q, q), by monotone
// iteration from 0 plus Newton polish.
double solve_q_tilde(const ModelParams& params, double q, const QuadratureRule& rule,
                     double tol = kDefaultFixedPointTol);

struct LimitSolution {
  ModelParams params;
  double q = 0.0;
  double q_tilde = 0.0;
  double chi_q = 0.0;
  double at_residual = 0.0;
  bool at_satisfied = false;
};
LimitSolution solve_limit(const ModelParams& params, const QuadratureRule& rule,
                          double tol = kDefaultFixedPointTol);

// Deterministic overlap table: diagonal by phi, first column by chi * m_bar,
// interior by psi, from the exact (q1, m_bar) implied by the start vector.
struct CovariancePropagation {
  double q1 = 0.0;
  double m_bar = 0.0;
  int k_max = 0;
  std::vector<double> table;  // row-major k_max x k_max, iterates 1-based

  double at(int k, int kp) const { return table[static_cast<std::size_t>(k - 1) * k_max + (kp - 1)]; }
  double& at(int k, int kp) { return table[static_cast<std::size_t>(k - 1) * k_max + (kp - 1)]; }
};
CovariancePropagation propagate_covariance(double q1, double m_bar, int k_max,
                                           const ModelParams& params,
                                           const QuadratureRule& rule);

// One-step map of the correlation functional kappa = q^(k,k') / sqrt(q^(k) q^(k')):
//   f(x) = psi(x sqrt(qk qk1), qk, qk1) / sqrt(phi(qk) phi(qk1)).
double kappa_map(double x, double qk, double qk1, const ModelParams& params,
                 const QuadratureRule& rule);

}  // namespace tapamp
