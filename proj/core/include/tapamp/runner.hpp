#pragma once

#include <vector>

#include <Eigen/Core>

#include "tapamp/derivative.hpp"
#include "tapamp/disorder.hpp"
#include "tapamp/dynamics.hpp"
#include "tapamp/params.hpp"

namespace tapamp {

// One replica: `steps` TAP updates from m^(1), so magnetizations reach
// iterate steps+1 and re-centered fields Y^(1)..Y^(steps) exist.
struct TrajectoryOptions {
  int steps = 1;
  bool with_tensors = false;        // forced on for SteinRecentering
  std::vector<int> record_y;        // ascending Y-iterate labels to record
  int error_iterate = 0;            // k at which to evaluate E and Delta (0 = skip)
  int threads = 1;
};

struct TrajectoryResult {
  IterationState state;
  std::vector<Eigen::VectorXd> y_records;  // parallel to options.record_y
  Eigen::VectorXd epsilon;                 // E^(k) at error_iterate, empty if skipped
  double mean_eps_sq = 0.0;
  double mean_delta_sq = 0.0;
  bool errors_evaluated = false;
  DerivativeTensor d_prev, d_cur;          // final tensor window when tracked
};

TrajectoryResult run_trajectory(const DisorderMatrix& g, const Eigen::VectorXd& m1,
                                const ModelParams& params, OnsagerChoice choice,
                                const TrajectoryOptions& options);

}  // namespace tapamp
