#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tapamp/disorder.hpp"
#include "tapamp/params.hpp"

namespace tapamp {

struct DerivativeTensor;

// Magnetization history plus the symmetric overlap table
// q(a,b) = (1/N) <m^(a), m^(b)>. One writer at a time; distinct replicas are
// independent.
struct IterationState {
  OnsagerChoice choice = OnsagerChoice::Classical;
  int k = 0;  // latest magnetization iterate

  // m^(0), m^(1), ..., m^(k) for Classical (m^(0) = 0 per the starting
  // convention); m^(1), ..., m^(k) for SteinRecentering.
  std::vector<Eigen::VectorXd> m_hist;

  // Re-centered field and reaction term of the most recent step, i.e.
  // Y^(k-1) and On^(k-1), the pair that produced m^(k). Empty before the
  // first step.
  Eigen::VectorXd y_current;
  Eigen::VectorXd onsager_current;

  // Packed symmetric table over iterates 1..k.
  std::vector<double> overlaps;

  int n() const { return m_hist.empty() ? 0 : static_cast<int>(m_hist.back().size()); }
  const Eigen::VectorXd& m(int a) const;
  double q(int a, int b) const;
};

// Start vector per the library defaults: constant tanh(h) for h != 0,
// constant 0.5 for h = 0 (keeps q^(1) bounded away from zero in the
// zero-field low-temperature phase).
Eigen::VectorXd default_start(int n, const ModelParams& params);

// State at k = 1. All entries of m1 must lie in [-1, 1]; m1 must not depend
// on the disorder.
IterationState init_state(const Eigen::VectorXd& m1, OnsagerChoice choice);

// Entry i: (beta / sqrt(N)) sum_j g_ij m_j, pairwise-summed.
Eigen::VectorXd effective_field(const DisorderMatrix& g, const Eigen::VectorXd& m,
                                const ModelParams& params);

// beta^2 (1 - q_N(m_k)) m_prev, with q_N = (1/N) sum m_k[i]^2.
Eigen::VectorXd onsager_classical(const Eigen::VectorXd& m_k, const Eigen::VectorXd& m_prev,
                                  const ModelParams& params);

// One update m^(k+1) = tanh(h + Y^(k)). For SteinRecentering a current
// derivative tensor (iterate == state.k) must be supplied.
void step(IterationState& state, const DisorderMatrix& g, const ModelParams& params,
          const DerivativeTensor* d = nullptr);

double overlap(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// q(k,k) + q(l,l) - 2 q(k,l) = (1/N) sum_i (m^(k)_i - m^(l)_i)^2.
double pseudo_distance(const IterationState& state, int k, int l);

// JSON snapshot {schema_version, k, q_table, final_m_summary, params, seed,
// choice} with 17-significant-digit numbers.
std::string snapshot_json(const IterationState& state, const ModelParams& params,
                          std::uint64_t seed);

// Verification-suite mutation hook: flips the sign of the reaction term
// inside step(). Never set outside fault-injection runs.
namespace fault_injection {
void set_flip_onsager_sign(bool on);
bool flip_onsager_sign();
}  // namespace fault_injection

}  // namespace tapamp
