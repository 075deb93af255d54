#include "tapamp/limit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tapamp {

namespace {

double sq(double x) { return x * x; }

// tanh and its first two derivatives, as functions of the tanh value.
double d1_tanh(double t) { return 1.0 - t * t; }
double d2_tanh(double t) { return -2.0 * t * (1.0 - t * t); }

// Cholesky-type factors of [[t1, t], [t, t2]]: Z' = a U, Z'' = c U + d V.
struct PairFactor {
  double a, c, d;
};

PairFactor factor_covariance(double t, double t1, double t2) {
  const double a = std::sqrt(t1);
  const double c = t / a;
  const double rem = std::max(t2 - (t / t1) * t, 0.0);
  return {a, c, std::sqrt(rem)};
}

void check_psi_domain(double t, double t1, double t2) {
  if (t1 < 0.0 || t2 < 0.0)
    throw std::domain_error("psi: variances must be non-negative");
  const double bound = std::sqrt(t1 * t2);
  if (std::abs(t) > bound * (1.0 + 1e-9) + 1e-15)
    throw std::domain_error("psi: covariance exceeds the Cauchy-Schwarz bound");
}

double clamp_cov(double t, double t1, double t2) {
  const double bound = std::sqrt(t1 * t2);
  return std::clamp(t, -bound, bound);
}

}  // namespace

double phi(double x, const ModelParams& params, const QuadratureRule& rule) {
  if (x < 0.0) throw std::domain_error("phi: argument must be non-negative");
  const double scale = params.beta * std::sqrt(x);
  return rule.expect([&](double z) { return sq(std::tanh(params.h + scale * z)); });
}

double chi(double t, const ModelParams& params, const QuadratureRule& rule) {
  if (t < 0.0) throw std::domain_error("chi: argument must be non-negative");
  const double scale = params.beta * std::sqrt(t);
  return rule.expect([&](double z) { return std::tanh(params.h + scale * z); });
}

double phi_prime(double x, const ModelParams& params, const QuadratureRule& rule) {
  if (x < 0.0) throw std::domain_error("phi_prime: argument must be non-negative");
  const double scale = params.beta * std::sqrt(x);
  // (tanh^2)'' = 2 (1 - 4 tanh^2 + 3 tanh^4)
  const double e = rule.expect([&](double z) {
    const double t2 = sq(std::tanh(params.h + scale * z));
    return 1.0 - 4.0 * t2 + 3.0 * t2 * t2;
  });
  return params.beta * params.beta * e;
}

double psi(double t, double t1, double t2, const ModelParams& params,
           const QuadratureRule& rule) {
  check_psi_domain(t, t1, t2);
  t = clamp_cov(t, t1, t2);
  const double beta = params.beta, h = params.h;
  if (t1 == 0.0 && t2 == 0.0) return sq(std::tanh(h));
  if (t1 == 0.0) return std::tanh(h) * chi(t2, params, rule);
  if (t2 == 0.0) return std::tanh(h) * chi(t1, params, rule);
  const PairFactor f = factor_covariance(t, t1, t2);
  return rule.expect([&](double v) {
    return rule.expect([&](double u) {
      return std::tanh(h + beta * f.a * u) * std::tanh(h + beta * (f.c * u + f.d * v));
    });
  });
}

PsiPartials psi_partials(double t, double t1, double t2, const ModelParams& params,
                         const QuadratureRule& rule) {
  check_psi_domain(t, t1, t2);
  const double bound = std::sqrt(t1 * t2);
  PsiPartials out;
  out.boundary = (bound - std::abs(t)) <= 1e-12 * std::max(1.0, bound);
  t = clamp_cov(t, t1, t2);
  const double beta = params.beta, h = params.h;
  const double b2 = beta * beta;

  auto expect_pair = [&](auto&& f) -> double {
    if (t1 == 0.0 && t2 == 0.0) return f(std::tanh(h), std::tanh(h));
    if (t1 == 0.0) {
      const double ta = std::tanh(h);
      const double s2 = beta * std::sqrt(t2);
      return rule.expect([&](double v) { return f(ta, std::tanh(h + s2 * v)); });
    }
    if (t2 == 0.0) {
      const double tb = std::tanh(h);
      const double s1 = beta * std::sqrt(t1);
      return rule.expect([&](double u) { return f(std::tanh(h + s1 * u), tb); });
    }
    const PairFactor fac = factor_covariance(t, t1, t2);
    return rule.expect([&](double v) {
      return rule.expect([&](double u) {
        return f(std::tanh(h + beta * fac.a * u),
                 std::tanh(h + beta * (fac.c * u + fac.d * v)));
      });
    });
  };

  out.d_t = b2 * expect_pair([](double ta, double tb) { return d1_tanh(ta) * d1_tanh(tb); });
  out.d_t1 =
      0.5 * b2 * expect_pair([](double ta, double tb) { return d2_tanh(ta) * tb; });
  out.d_t2 =
      0.5 * b2 * expect_pair([](double ta, double tb) { return ta * d2_tanh(tb); });
  return out;
}

double at_residual(const ModelParams& params, double q, const QuadratureRule& rule) {
  if (q < 0.0) throw std::domain_error("at_residual: q must be non-negative");
  const double scale = params.beta * std::sqrt(q);
  const double e = rule.expect([&](double z) {
    const double s = d1_tanh(std::tanh(params.h + scale * z));  // sech^2
    return s * s;
  });
  return params.beta * params.beta * e - 1.0;
}

namespace {

// Plain fixed-point steps with guarded Newton acceleration, then a polish
// phase that keeps taking Newton steps while they strictly shrink the map
// residual. The polish drives the iterate to the fixed point itself, not
// just below the residual tolerance, which matters near criticality where
// |f(x) - x| ~ (x - x*)^2.
template <class F, class DF>
double fixed_point(F&& f, DF&& df, double x0, double lo, double hi, double tol,
                   const char* who) {
  if (tol <= 0.0) throw std::invalid_argument(std::string(who) + ": tol must be positive");
  double x = x0;
  double r = f(x) - x;
  int it = 0;
  for (; it < kFixedPointBudget; ++it) {
    if (std::abs(r) < tol) break;
    bool accepted = false;
    const double d = df(x) - 1.0;
    if (d < -1e-14) {
      const double y = x - r / d;
      if (y >= lo && y <= hi) {
        const double ry = f(y) - y;
        if (std::abs(ry) < 0.5 * std::abs(r)) {
          x = y;
          r = ry;
          accepted = true;
        }
      }
    }
    if (!accepted) {
      x = x + r;  // plain step x <- f(x)
      r = f(x) - x;
    }
  }
  if (std::abs(r) >= tol)
    throw std::runtime_error(std::string(who) + ": iteration budget exhausted");
  for (int p = 0; p < 80 && r != 0.0; ++p) {
    const double d = df(x) - 1.0;
    if (!(d < -1e-14)) break;
    const double y = x - r / d;
    if (!(y >= lo && y <= hi)) break;
    const double ry = f(y) - y;
    if (!(std::abs(ry) < std::abs(r))) break;
    x = y;
    r = ry;
  }
  return x;
}

}  // namespace

double solve_q(const ModelParams& params, const QuadratureRule& rule, double tol) {
  return fixed_point([&](double x) { return phi(x, params, rule); },
                     [&](double x) { return phi_prime(x, params, rule); },
                     /*x0=*/1.0, /*lo=*/0.0, /*hi=*/1.5, tol, "solve_q");
}

double solve_q_tilde(const ModelParams& params, double q, const QuadratureRule& rule,
                     double tol) {
  if (q < 0.0) throw std::domain_error("solve_q_tilde: q must be non-negative");
  // t -> psi(t,q,q) is increasing with psi(0,q,q) = chi(q)^2 >= 0, so the
  // iterates from 0 climb to the smallest non-negative fixed point.
  return fixed_point(
      [&](double t) { return psi(std::min(t, q), q, q, params, rule); },
      [&](double t) { return psi_partials(std::min(t, q), q, q, params, rule).d_t; },
      /*x0=*/0.0, /*lo=*/0.0, /*hi=*/q, tol, "solve_q_tilde");
}

LimitSolution solve_limit(const ModelParams& params, const QuadratureRule& rule,
                          double tol) {
  LimitSolution out;
  out.params = params;
  out.q = solve_q(params, rule, tol);
  out.q_tilde = solve_q_tilde(params, out.q, rule, tol);
  out.chi_q = chi(out.q, params, rule);
  out.at_residual = at_residual(params, out.q, rule);
  out.at_satisfied = out.at_residual <= 0.0;
  return out;
}

CovariancePropagation propagate_covariance(double q1, double m_bar, int k_max,
                                           const ModelParams& params,
                                           const QuadratureRule& rule) {
  if (k_max < 1) throw std::invalid_argument("propagate_covariance: k_max must be >= 1");
  if (q1 < 0.0 || q1 > 1.0)
    throw std::invalid_argument("propagate_covariance: q1 must lie in [0,1]");
  if (std::abs(m_bar) > std::sqrt(q1) + 1e-12)
    throw std::invalid_argument("propagate_covariance: |m_bar| exceeds sqrt(q1)");

  CovariancePropagation cp;
  cp.q1 = q1;
  cp.m_bar = m_bar;
  cp.k_max = k_max;
  cp.table.assign(static_cast<std::size_t>(k_max) * k_max, 0.0);
  cp.at(1, 1) = q1;
  for (int k = 1; k < k_max; ++k) {
    cp.at(k + 1, k + 1) = phi(cp.at(k, k), params, rule);
    const double first = chi(cp.at(k, k), params, rule) * m_bar;
    cp.at(k + 1, 1) = first;
    cp.at(1, k + 1) = first;
    for (int kp = 2; kp <= k; ++kp) {
      const double t = clamp_cov(cp.at(k, kp - 1), cp.at(k, k), cp.at(kp - 1, kp - 1));
      const double v = psi(t, cp.at(k, k), cp.at(kp - 1, kp - 1), params, rule);
      cp.at(k + 1, kp) = v;
      cp.at(kp, k + 1) = v;
    }
  }
  return cp;
}

double kappa_map(double x, double qk, double qk1, const ModelParams& params,
                 const QuadratureRule& rule) {
  if (qk <= 0.0 || qk1 <= 0.0)
    throw std::domain_error("kappa_map: diagonal overlaps must be positive");
  if (std::abs(x) > 1.0 + 1e-12)
    throw std::domain_error("kappa_map: correlation argument must lie in [-1,1]");
  const double t = clamp_cov(x * std::sqrt(qk * qk1), qk, qk1);
  const double denom = std::sqrt(phi(qk, params, rule) * phi(qk1, params, rule));
  if (denom == 0.0) throw std::domain_error("kappa_map: phi vanishes at the arguments");
  return psi(t, qk, qk1, params, rule) / denom;
}

}  // namespace tapamp
