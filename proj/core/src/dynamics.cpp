#include "tapamp/dynamics.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "tapamp/derivative.hpp"
#include "tapamp/errors.hpp"
#include "tapamp/report_io.hpp"
#include "tapamp/summation.hpp"

namespace tapamp {

std::string to_string(OnsagerChoice choice) {
  return choice == OnsagerChoice::Classical ? "classical" : "stein";
}

OnsagerChoice onsager_choice_from_string(const std::string& name) {
  if (name == "classical") return OnsagerChoice::Classical;
  if (name == "stein") return OnsagerChoice::SteinRecentering;
  throw std::invalid_argument("unknown Onsager choice: " + name);
}

namespace fault_injection {
namespace {
std::atomic<bool> g_flip{false};
}
void set_flip_onsager_sign(bool on) { g_flip.store(on); }
bool flip_onsager_sign() { return g_flip.load(std::memory_order_relaxed); }
}  // namespace fault_injection

const Eigen::VectorXd& IterationState::m(int a) const {
  const int lo = (choice == OnsagerChoice::Classical) ? 0 : 1;
  if (a < lo || a > k) throw std::out_of_range("IterationState::m: iterate out of range");
  return m_hist[static_cast<std::size_t>(a - lo)];
}

double IterationState::q(int a, int b) const {
  if (a < 1 || b < 1 || a > k || b > k)
    throw std::out_of_range("IterationState::q: iterate out of range");
  if (a > b) std::swap(a, b);
  return overlaps[static_cast<std::size_t>(b - 1) * b / 2 + (a - 1)];
}

Eigen::VectorXd default_start(int n, const ModelParams& params) {
  const double c = (params.h != 0.0) ? std::tanh(params.h) : 0.5;
  return Eigen::VectorXd::Constant(n, c);
}

IterationState init_state(const Eigen::VectorXd& m1, OnsagerChoice choice) {
  for (Eigen::Index i = 0; i < m1.size(); ++i)
    if (!(m1[i] >= -1.0 && m1[i] <= 1.0))
      throw std::domain_error("init_state: start entries must lie in [-1,1]");
  if (m1.size() == 0) throw std::invalid_argument("init_state: empty start vector");

  IterationState s;
  s.choice = choice;
  s.k = 1;
  if (choice == OnsagerChoice::Classical)
    s.m_hist.push_back(Eigen::VectorXd::Zero(m1.size()));  // m^(0) := 0
  s.m_hist.push_back(m1);
  s.overlaps.push_back(overlap(m1, m1));
  return s;
}

Eigen::VectorXd effective_field(const DisorderMatrix& g, const Eigen::VectorXd& m,
                                const ModelParams& params) {
  const int n = g.n;
  if (m.size() != n) throw std::invalid_argument("effective_field: dimension mismatch");
  const double scale = params.beta / std::sqrt(static_cast<double>(n));
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    const double s = pairwise_sum_indexed(
        0, static_cast<std::size_t>(n),
        [&](std::size_t j) { return g.entries(i, static_cast<int>(j)) * m[static_cast<Eigen::Index>(j)]; });
    out[i] = scale * s;
  }
  return out;
}

Eigen::VectorXd onsager_classical(const Eigen::VectorXd& m_k, const Eigen::VectorXd& m_prev,
                                  const ModelParams& params) {
  if (m_k.size() != m_prev.size())
    throw std::invalid_argument("onsager_classical: length mismatch");
  const double q_n = overlap(m_k, m_k);
  return (params.beta * params.beta * (1.0 - q_n)) * m_prev;
}

void step(IterationState& state, const DisorderMatrix& g, const ModelParams& params,
          const DerivativeTensor* d) {
  const int n = state.n();
  if (n != g.n) throw std::invalid_argument("step: state/disorder dimension mismatch");

  Eigen::VectorXd on;
  if (state.choice == OnsagerChoice::Classical) {
    on = onsager_classical(state.m(state.k), state.m(state.k - 1), params);
  } else {
    if (d == nullptr)
      throw ConfigError("step: re-centering choice requires a derivative tensor");
    if (d->iterate != state.k || d->n != n)
      throw std::logic_error("step: derivative tensor is stale for this state");
    on = onsager_stein(*d, params);
  }
  if (fault_injection::flip_onsager_sign()) on = -on;

  Eigen::VectorXd y = effective_field(g, state.m(state.k), params) - on;
  Eigen::VectorXd next(n);
  for (int i = 0; i < n; ++i) next[i] = std::tanh(params.h + y[i]);

  state.m_hist.push_back(std::move(next));
  state.k += 1;
  state.overlaps.reserve(state.overlaps.size() + state.k);
  for (int a = 1; a <= state.k; ++a)
    state.overlaps.push_back(overlap(state.m(state.k), state.m(a)));
  state.y_current = std::move(y);
  state.onsager_current = std::move(on);
}

double overlap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("overlap: length mismatch");
  const std::size_t n = static_cast<std::size_t>(a.size());
  const double s = pairwise_sum_indexed(0, n, [&](std::size_t i) {
    return a[static_cast<Eigen::Index>(i)] * b[static_cast<Eigen::Index>(i)];
  });
  return s / static_cast<double>(n);
}

double pseudo_distance(const IterationState& state, int k, int l) {
  return state.q(k, k) + state.q(l, l) - 2.0 * state.q(k, l);
}

std::string snapshot_json(const IterationState& state, const ModelParams& params,
                          std::uint64_t seed) {
  JsonWriter w;
  w.begin_object();
  w.key("schema_version").value(kSchemaVersion);
  w.key("k").value(state.k);
  w.key("q_table").begin_array();
  for (int a = 1; a <= state.k; ++a) {
    w.begin_array();
    for (int b = 1; b <= state.k; ++b) w.value(state.q(a, b));
    w.end_array();
  }
  w.end_array();
  const Eigen::VectorXd& m = state.m(state.k);
  w.key("final_m_summary").begin_object();
  w.key("mean").value(pairwise_sum_indexed(0, static_cast<std::size_t>(m.size()),
                                           [&](std::size_t i) { return m[static_cast<Eigen::Index>(i)]; }) /
                      static_cast<double>(m.size()));
  w.key("q_kk").value(state.q(state.k, state.k));
  w.end_object();
  w.key("params").begin_object();
  w.key("beta").value(params.beta);
  w.key("h").value(params.h);
  w.end_object();
  w.key("seed").value(seed);
  w.key("choice").value(to_string(state.choice));
  w.end_object();
  return w.str();
}

}  // namespace tapamp
