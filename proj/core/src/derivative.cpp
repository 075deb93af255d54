#include "tapamp/derivative.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tapamp/errors.hpp"
#include "tapamp/parallel.hpp"
#include "tapamp/runner.hpp"
#include "tapamp/summation.hpp"

namespace tapamp {

int pair_count(int n) { return n * (n - 1) / 2; }

int pair_index(int y, int z, int n) {
  if (y == z) throw std::invalid_argument("pair_index: y and z must differ");
  if (y < 0 || z < 0 || y >= n || z >= n)
    throw std::out_of_range("pair_index: site out of range");
  if (y > z) std::swap(y, z);
  return y * n - y * (y + 1) / 2 + (z - y - 1);
}

DerivativeTensor zero_tensor(int n, int iterate) {
  DerivativeTensor t;
  t.iterate = iterate;
  t.n = n;
  t.d = Eigen::MatrixXd::Zero(n, pair_count(n));
  return t;
}

namespace {

// Column block size for the contraction. Fixed boundaries keep results
// bit-identical for any worker count.
constexpr int kColumnBlock = 256;

void pair_sites(int n, std::vector<int>& ys, std::vector<int>& zs) {
  const int p = pair_count(n);
  ys.resize(p);
  zs.resize(p);
  int idx = 0;
  for (int y = 0; y < n; ++y)
    for (int z = y + 1; z < n; ++z, ++idx) {
      ys[idx] = y;
      zs[idx] = z;
    }
}

}  // namespace

DerivativeTensor propagate_derivatives(const DerivativeTensor& d_prev,
                                       const DerivativeTensor& d_cur,
                                       const IterationState& state,
                                       const DisorderMatrix& g,
                                       const ModelParams& params,
                                       PropagationCapture* capture, int threads) {
  const int n = d_cur.n;
  const int k = d_cur.iterate;
  if (state.k != k + 1)
    throw std::logic_error("propagate_derivatives: state must hold iterate k+1");
  if (d_prev.iterate != k - 1 || d_prev.n != n)
    throw std::logic_error("propagate_derivatives: window tensors out of order");
  if (g.n != n || state.n() != n)
    throw std::invalid_argument("propagate_derivatives: dimension mismatch");

  const int p = pair_count(n);
  const double beta = params.beta;
  const double field_scale = beta / std::sqrt(static_cast<double>(n));
  const double q_k = state.q(k, k);
  const double ons_scale = beta * beta * (1.0 - q_k);
  const double rank1_scale = 2.0 * beta * beta / static_cast<double>(n);

  const Eigen::VectorXd& m_next = state.m(state.k);
  const Eigen::VectorXd& m_cur = state.m(k);
  // m^(k-1): the classical history always has it; the re-centering choice
  // starts at iterate 1, where the closure term carries a zero factor anyway.
  Eigen::VectorXd m_prev;
  if (state.choice == OnsagerChoice::Classical || k >= 2)
    m_prev = state.m(k - 1);
  else
    m_prev = Eigen::VectorXd::Zero(n);

  std::vector<int> ys, zs;
  pair_sites(n, ys, zs);

  DerivativeTensor out;
  out.iterate = k + 1;
  out.n = n;
  out.d.resize(n, p);
  if (capture) capture->delta.resize(n, p);

  const Eigen::VectorXd damp = (1.0 - m_next.array().square()).matrix();
  const bool cur_is_zero = (k <= 1);  // iterate-1 tensor is identically zero

  const int blocks = (p + kColumnBlock - 1) / kColumnBlock;
  parallel_for(static_cast<std::size_t>(blocks), threads, [&](std::size_t bi) {
    const int c0 = static_cast<int>(bi) * kColumnBlock;
    const int len = std::min(kColumnBlock, p - c0);
    auto r = out.d.middleCols(c0, len);
    if (cur_is_zero) {
      r.setZero();
    } else {
      r.noalias() = field_scale * (g.entries * d_cur.d.middleCols(c0, len));
    }
    if (ons_scale != 0.0) r.noalias() -= ons_scale * d_prev.d.middleCols(c0, len);
    if (!cur_is_zero && rank1_scale != 0.0) {
      const Eigen::RowVectorXd u = m_cur.transpose() * d_cur.d.middleCols(c0, len);
      r.noalias() += rank1_scale * (m_prev * u);
    }
    // r now equals Delta^(k) on this block: (beta/sqrt N) G D - dOn.
    if (capture) capture->delta.middleCols(c0, len) = r;
    for (int c = 0; c < len; ++c) {
      const int idx = c0 + c;
      r(ys[idx], c) += field_scale * m_cur[zs[idx]];
      r(zs[idx], c) += field_scale * m_cur[ys[idx]];
    }
    r.array().colwise() *= damp.array();
  });
  return out;
}

Eigen::VectorXd onsager_stein(const DerivativeTensor& d, const ModelParams& params) {
  const int n = d.n;
  const double scale = params.beta / std::sqrt(static_cast<double>(n));
  Eigen::VectorXd on(n);
  for (int i = 0; i < n; ++i) {
    const double s = pairwise_sum_indexed(0, static_cast<std::size_t>(n), [&](std::size_t j) {
      const int jj = static_cast<int>(j);
      return jj == i ? 0.0 : d.d(jj, pair_index(i, jj, n));
    });
    on[i] = scale * s;
  }
  return on;
}

Eigen::VectorXd compute_epsilon(const DerivativeTensor& d, const IterationState& state,
                                const ModelParams& params) {
  if (state.k != d.iterate + 1)
    throw std::logic_error("compute_epsilon: tensor is stale for this state");
  if (state.onsager_current.size() != d.n)
    throw std::logic_error("compute_epsilon: state holds no reaction term yet");
  return onsager_stein(d, params) - state.onsager_current;
}

Eigen::MatrixXd onsager_derivative(const DerivativeTensor& d_prev,
                                   const DerivativeTensor& d_cur,
                                   const Eigen::VectorXd& m_cur,
                                   const Eigen::VectorXd& m_prev,
                                   const ModelParams& params) {
  const int n = d_cur.n;
  if (d_prev.n != n || m_cur.size() != n || m_prev.size() != n)
    throw std::invalid_argument("onsager_derivative: dimension mismatch");
  const double q_k = overlap(m_cur, m_cur);
  const double beta2 = params.beta * params.beta;
  Eigen::MatrixXd out = (beta2 * (1.0 - q_k)) * d_prev.d;
  const Eigen::RowVectorXd u = m_cur.transpose() * d_cur.d;
  out.noalias() -= (2.0 * beta2 / static_cast<double>(n)) * (m_prev * u);
  return out;
}

double compute_delta(const DerivativeTensor& d, const Eigen::MatrixXd& ons_deriv,
                     const DisorderMatrix& g, const ModelParams& params, int x, int y,
                     int z) {
  if (y == z) throw std::invalid_argument("compute_delta: y and z must differ");
  const int n = d.n;
  const int p = pair_index(y, z, n);
  const double scale = params.beta / std::sqrt(static_cast<double>(n));
  const double s = pairwise_sum_indexed(0, static_cast<std::size_t>(n), [&](std::size_t l) {
    return g.entries(x, static_cast<int>(l)) * d.d(static_cast<int>(l), p);
  });
  return scale * s - ons_deriv(x, p);
}

DerivativeTensor finite_difference_tensor(const DisorderMatrix& g, const Eigen::VectorXd& m1,
                                          const ModelParams& params, OnsagerChoice choice,
                                          int k, double step) {
  const int n = g.n;
  if (n > kFiniteDifferenceGuardN)
    throw ResourceGuardError("finite_difference_tensor: n exceeds the cost guard");
  if (step <= 0.0) throw std::invalid_argument("finite_difference_tensor: step must be > 0");
  if (k < 1) throw std::invalid_argument("finite_difference_tensor: k must be >= 1");

  DerivativeTensor out = zero_tensor(n, k);
  if (k == 1) return out;  // the start is disorder-free

  TrajectoryOptions opt;
  opt.steps = k - 1;
  opt.with_tensors = (choice == OnsagerChoice::SteinRecentering);

  std::vector<int> ys, zs;
  pair_sites(n, ys, zs);
  const int p = pair_count(n);
  parallel_for(static_cast<std::size_t>(p), resolve_threads(0), [&](std::size_t idx) {
    const int y = ys[idx], z = zs[idx];
    const DisorderMatrix gp = perturb_entry(g, y, z, step);
    const DisorderMatrix gm = perturb_entry(g, y, z, -step);
    const Eigen::VectorXd mp = run_trajectory(gp, m1, params, choice, opt).state.m(k);
    const Eigen::VectorXd mm = run_trajectory(gm, m1, params, choice, opt).state.m(k);
    out.d.col(static_cast<Eigen::Index>(idx)) = (mp - mm) / (2.0 * step);
  });
  return out;
}

}  // namespace tapamp
