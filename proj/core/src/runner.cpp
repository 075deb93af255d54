#include "tapamp/runner.hpp"

#include <stdexcept>

#include "tapamp/errors.hpp"

namespace tapamp {

TrajectoryResult run_trajectory(const DisorderMatrix& g, const Eigen::VectorXd& m1,
                                const ModelParams& params, OnsagerChoice choice,
                                const TrajectoryOptions& options) {
  const int n = g.n;
  if (options.steps < 1) throw std::invalid_argument("run_trajectory: steps must be >= 1");
  const bool tensors =
      options.with_tensors || choice == OnsagerChoice::SteinRecentering ||
      options.error_iterate > 0;
  if (tensors && n > kDerivativeTensorGuardN)
    throw ResourceGuardError("run_trajectory: derivative tracking is limited to n <= 400");
  if (options.error_iterate > options.steps)
    throw std::invalid_argument("run_trajectory: error_iterate exceeds the step count");
  for (std::size_t i = 0; i + 1 < options.record_y.size(); ++i)
    if (options.record_y[i] >= options.record_y[i + 1])
      throw std::invalid_argument("run_trajectory: record_y must be strictly ascending");
  if (!options.record_y.empty() &&
      (options.record_y.front() < 1 || options.record_y.back() > options.steps))
    throw std::invalid_argument("run_trajectory: record_y labels out of range");

  TrajectoryResult res;
  res.state = init_state(m1, choice);

  DerivativeTensor d_prev, d_cur;
  if (tensors) {
    d_prev = zero_tensor(n, 0);
    d_cur = zero_tensor(n, 1);
  }

  std::size_t rec = 0;
  const bool stein = (choice == OnsagerChoice::SteinRecentering);
  for (int k = 1; k <= options.steps; ++k) {
    step(res.state, g, params, stein ? &d_cur : nullptr);
    if (rec < options.record_y.size() && options.record_y[rec] == k) {
      res.y_records.push_back(res.state.y_current);
      ++rec;
    }
    if (tensors) {
      const bool want_errors = (options.error_iterate == k);
      if (want_errors) res.epsilon = compute_epsilon(d_cur, res.state, params);
      PropagationCapture capture;
      DerivativeTensor d_next =
          propagate_derivatives(d_prev, d_cur, res.state, g, params,
                                want_errors ? &capture : nullptr, options.threads);
      if (want_errors) {
        res.mean_eps_sq = res.epsilon.squaredNorm() / static_cast<double>(n);
        res.mean_delta_sq =
            capture.delta.squaredNorm() / static_cast<double>(capture.delta.size());
        res.errors_evaluated = true;
      }
      d_prev = std::move(d_cur);
      d_cur = std::move(d_next);
    }
  }
  res.d_prev = std::move(d_prev);
  res.d_cur = std::move(d_cur);
  return res;
}

}  // namespace tapamp
