#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tapamp/limit.hpp"
#include "tapamp/params.hpp"

namespace tapamp {

// Start specification. A constant c implies the exact limit inputs
// m_bar = c, q1 = c^2; an explicit vector implies its exact mean and mean
// square. Default (neither set): the library start vector.
struct InitSpec {
  std::optional<double> constant;
  std::optional<Eigen::VectorXd> vector;  // single-size configs only

  Eigen::VectorXd start_vector(int n, const ModelParams& params) const;
  double m_bar(const ModelParams& params) const;
  double q1(const ModelParams& params) const;
};

struct EnsembleConfig {
  ModelParams params;
  std::vector<int> n_list{1000};
  int k_max = 10;
  int replicas = 20;
  std::uint64_t base_seed = 1;
  OnsagerChoice choice = OnsagerChoice::Classical;
  InitSpec init;
  bool track_derivatives = false;
  int error_iterate = 3;                          // k for the E/Delta functionals
  std::vector<std::pair<int, int>> track_fields;  // (site, Y-iterate); empty = default
  int threads = 0;                                // 0 = hardware concurrency
  int quadrature_order = kDefaultQuadratureOrder;
};

// Default tracked fields: sites {1,2} x iterates {k_max-2, k_max-1, k_max}
// (1-based sites), covering all three limiting covariance cases.
std::vector<std::pair<int, int>> default_track_fields(int k_max);

void validate(const EnsembleConfig& cfg);

struct QTableStat {
  int k_max = 0;
  Eigen::MatrixXd mean;  // k_max x k_max
  Eigen::MatrixXd se;    // standard error across replicas
};

// Per-size aggregate plus the raw per-replica material the CLT checks need.
struct SizeResult {
  int n = 0;
  QTableStat q_mc;
  std::vector<double> pseudo_conv;       // pd(k, k-1) replica means, k = 2..k_max
  std::vector<int> tracked_iterates;     // ascending Y-iterate labels
  std::vector<Eigen::MatrixXd> y_samples;  // per iterate: replicas x n
  double mean_eps_sq = 0.0;
  double mean_delta_sq = 0.0;
  double se_eps_sq = 0.0;
  double se_delta_sq = 0.0;
  bool errors_evaluated = false;
};

struct CltRow {
  std::string kind;  // pooled_moments | variance | cov_same_site | cov_cross_site
  int k = 0;
  int kp = 0;
  double observed = 0.0;
  double expected = 0.0;
  double se = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  long samples = 0;
};

struct EnsembleReport {
  EnsembleConfig config;
  CovariancePropagation q_det;
  std::vector<SizeResult> per_n;
  std::vector<CltRow> clt;  // filled by clt_check when requested
};

// Runs replicas r = 0..replicas-1 with disorder seeds base_seed ^ r for each
// size; aggregation is a fixed-order reduction, independent of scheduling.
EnsembleReport run_ensemble(const EnsembleConfig& cfg);

// Moment and covariance diagnostics of the recorded fields on the largest
// size, against the deterministic table. k_pairs lists same-site iterate
// pairs; empty = all pairs of tracked iterates.
std::vector<CltRow> clt_check(const EnsembleReport& report, const LimitSolution& limit,
                              std::vector<std::pair<int, int>> k_pairs = {});

struct AtDichotomy {
  double plateau = 0.0;    // replica-mean pd(k_max, k_max-1) at the largest size
  double predicted = 0.0;  // 2 (q - q_tilde)
  bool at_satisfied = false;
};
AtDichotomy at_dichotomy_check(const EnsembleReport& report, const LimitSolution& limit);

enum class ScalingQuantity { Epsilon, Delta, ChoiceGap };
std::string to_string(ScalingQuantity q);

struct SlopeFit {
  ScalingQuantity quantity{};
  std::vector<double> n_values;
  std::vector<double> means;  // mean squared quantity (or mean max-gap) per size
  std::vector<double> ses;
  double slope = 0.0;
  double half_width = 0.0;  // 1.96 x OLS standard error of the slope
  bool degenerate = false;  // all means zero (e.g. beta = 0); no fit possible
};

// log-log OLS of the mean squared functional (or the choice gap) against N.
// Requires >= 3 sizes spanning at least a factor of 4. The two error
// functionals come from the same trajectories, so requesting both costs one
// ensemble pass.
std::vector<SlopeFit> scaling_study_all(const EnsembleConfig& cfg,
                                        const std::vector<ScalingQuantity>& quantities);
SlopeFit scaling_study(const EnsembleConfig& cfg, ScalingQuantity quantity);

}  // namespace tapamp
