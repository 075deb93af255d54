#include "tapamp/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>

#include "tapamp/derivative.hpp"
#include "tapamp/disorder.hpp"
#include "tapamp/dynamics.hpp"
#include "tapamp/ensemble.hpp"
#include "tapamp/limit.hpp"
#include "tapamp/parallel.hpp"
#include "tapamp/report_io.hpp"
#include "tapamp/runner.hpp"

namespace tapamp::acceptance {

namespace {

// Parameter points with runtime-verified AT status: residual -0.51 at the
// satisfied point, +0.13 at the violated one.
constexpr ModelParams kAtSatisfied{0.8, 0.3};
constexpr ModelParams kAtViolated{1.5, 0.1};
// The covariance-propagation / CLT workhorse point.
constexpr ModelParams kMcPoint{1.0, 0.5};

struct Check {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << "FAILED " << what;
    }
  }
  void note(const std::string& what) {
    if (detail.tellp() > 0) detail << "; ";
    detail << what;
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// Shared context so the heavy MC ensemble at kMcPoint is run once and reused
// by the covariance and CLT criteria.
struct Context {
  int threads;
  QuadratureRule rule;
  std::optional<EnsembleReport> mc_report;
  std::optional<LimitSolution> mc_limit;

  explicit Context(int t) : threads(t), rule(gauss_hermite(kDefaultQuadratureOrder)) {}

  const EnsembleReport& mc() {
    if (!mc_report) {
      EnsembleConfig cfg;
      cfg.params = kMcPoint;
      cfg.n_list = {1000};
      cfg.k_max = 15;
      cfg.replicas = 20;
      cfg.base_seed = 1;
      cfg.init.constant = std::tanh(0.5);
      cfg.threads = threads;
      mc_report = run_ensemble(cfg);
    }
    return *mc_report;
  }
  const LimitSolution& mc_lim() {
    if (!mc_limit) mc_limit = solve_limit(kMcPoint, rule);
    return *mc_limit;
  }
};

// 1. Gaussian moments at the default order and order-doubling stability of
// phi/chi/psi. Moment tolerance is relative: 1e-12 absolute on E[Z^8] = 105
// sits below eigensolver accuracy at any order.
void c_quadrature(Context& ctx, Check& c) {
  const QuadratureRule& r1 = ctx.rule;
  const QuadratureRule r2 = gauss_hermite(2 * kDefaultQuadratureOrder);
  const double fact2[] = {1.0, 3.0, 15.0, 105.0};  // (2m-1)!!
  for (int m = 1; m <= 4; ++m) {
    const double got = r1.expect([&](double z) { return std::pow(z, 2 * m); });
    c.expect(std::abs(got - fact2[m - 1]) < 1e-12 * fact2[m - 1],
             "E[Z^" + std::to_string(2 * m) + "] err=" + fmt(got - fact2[m - 1]));
  }
  double worst = 0.0;
  for (double beta : {0.5, 1.0, 1.5, 2.0}) {
    for (double h : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const ModelParams p{beta, h};
      worst = std::max(worst, std::abs(phi(0.4, p, r1) - phi(0.4, p, r2)));
      worst = std::max(worst, std::abs(chi(0.35, p, r1) - chi(0.35, p, r2)));
      worst = std::max(worst, std::abs(psi(0.2, 0.5, 0.4, p, r1) - psi(0.2, 0.5, 0.4, p, r2)));
    }
  }
  c.expect(worst < 1e-9, "order-doubling drift " + fmt(worst));
  c.note("max order-doubling drift " + fmt(worst));
}

// 2. Fixed-point identities on the (beta, h) grid.
void c_fixed_points(Context& ctx, Check& c) {
  for (double beta : {0.0, 0.5, 1.0, 1.5, 2.0}) {
    for (double h : {0.0, 0.1, 0.3, 0.5, 1.0}) {
      const ModelParams p{beta, h};
      const double q = solve_q(p, ctx.rule);
      const double qt = solve_q_tilde(p, q, ctx.rule);
      const std::string at = " at (" + fmt(beta) + "," + fmt(h) + ")";
      c.expect(std::abs(phi(q, p, ctx.rule) - q) < 1e-12, "|phi(q)-q|" + at);
      c.expect(std::abs(psi(qt, q, q, p, ctx.rule) - qt) < 1e-12,
               "|psi(qt,q,q)-qt|" + at);
      c.expect(qt <= q + 1e-10, "qt <= q" + at);
      if (beta == 0.0) {
        const double t2 = std::tanh(h) * std::tanh(h);
        c.expect(std::abs(q - t2) < 1e-12 && std::abs(qt - t2) < 1e-12,
                 "beta=0 closed form" + at);
      }
    }
  }
}

// 3. Zero-field AT boundary: residual sign flips exactly at |beta| = 1.
void c_at_boundary(Context& ctx, Check& c) {
  for (double beta : {0.5, 0.99, 1.01, 2.0}) {
    const ModelParams p{beta, 0.0};
    const double q = solve_q(p, ctx.rule);
    const double res = at_residual(p, q, ctx.rule);
    const double want = beta * beta - 1.0;
    c.expect(res * want > 0.0, "sign of residual at beta=" + fmt(beta) +
                                   " (res=" + fmt(res) + ")");
  }
  const ModelParams crit{1.0, 0.0};
  const double res1 = at_residual(crit, solve_q(crit, ctx.rule), ctx.rule);
  c.expect(std::abs(res1) < 1e-8, "residual at beta=1 (" + fmt(res1) + ")");
  c.note("residual(beta=1,h=0) = " + fmt(res1));
}

// 4. q = q_tilde under AT; a definite gap when AT fails.
void c_at_dichotomy(Context& ctx, Check& c) {
  const LimitSolution sat = solve_limit(kAtSatisfied, ctx.rule);
  c.expect(sat.at_residual < -0.05, "satisfied point residual " + fmt(sat.at_residual));
  c.expect(std::abs(sat.q_tilde - sat.q) < 1e-8,
           "|qt-q| = " + fmt(std::abs(sat.q_tilde - sat.q)) + " under AT");
  const LimitSolution vio = solve_limit(kAtViolated, ctx.rule);
  c.expect(vio.at_residual > 0.05, "violated point residual " + fmt(vio.at_residual));
  c.expect(vio.q - vio.q_tilde > 1e-3, "q-qt gap " + fmt(vio.q - vio.q_tilde));
  c.note("gap at violated point " + fmt(vio.q - vio.q_tilde));
}

// 5. Monte Carlo overlap table vs the deterministic propagation.
void c_covariance(Context& ctx, Check& c) {
  const EnsembleReport& rep = ctx.mc();
  const SizeResult& sz = rep.per_n.front();
  const double rate_tol = 5.0 / std::sqrt(static_cast<double>(sz.n));
  double worst = 0.0, worst_z = 0.0;
  for (int a = 1; a <= sz.q_mc.k_max; ++a) {
    for (int b = 1; b <= sz.q_mc.k_max; ++b) {
      const double diff = std::abs(sz.q_mc.mean(a - 1, b - 1) - rep.q_det.at(a, b));
      worst = std::max(worst, diff);
      // 1e-12 floor: deterministic entries (e.g. q(1,1)) have zero spread.
      const double se_bound = std::max(8.0 * sz.q_mc.se(a - 1, b - 1), 1e-12);
      worst_z = std::max(worst_z, diff / se_bound);
      c.expect(diff < se_bound,
               "entry (" + std::to_string(a) + "," + std::to_string(b) + ") off by " +
                   fmt(diff) + " vs 8se=" + fmt(se_bound));
    }
  }
  c.expect(worst < rate_tol, "max |q_mc - q_det| = " + fmt(worst));
  c.note("max |q_mc - q_det| = " + fmt(worst) + " (tol " + fmt(rate_tol) + ")");
}

// 6. Pseudo-convergence plateau on both sides of the AT line.
void c_pseudo_convergence(Context& ctx, Check& c) {
  EnsembleConfig cfg;
  cfg.n_list = {1000};
  cfg.k_max = 20;
  cfg.replicas = 20;
  cfg.base_seed = 2;
  cfg.threads = ctx.threads;

  cfg.params = kAtSatisfied;
  const EnsembleReport sat_rep = run_ensemble(cfg);
  const LimitSolution sat_lim = solve_limit(kAtSatisfied, ctx.rule);
  const AtDichotomy sat = at_dichotomy_check(sat_rep, sat_lim);
  c.expect(sat_lim.at_residual < -0.05, "satisfied point residual");
  c.expect(sat.plateau < 0.02, "AT-satisfied plateau " + fmt(sat.plateau));

  cfg.params = kAtViolated;
  const EnsembleReport vio_rep = run_ensemble(cfg);
  const LimitSolution vio_lim = solve_limit(kAtViolated, ctx.rule);
  const AtDichotomy vio = at_dichotomy_check(vio_rep, vio_lim);
  c.expect(vio_lim.at_residual > 0.05, "violated point residual");
  c.expect(std::abs(vio.plateau - vio.predicted) < 0.05,
           "violated plateau " + fmt(vio.plateau) + " vs 2(q-qt)=" + fmt(vio.predicted));
  c.note("plateaus: " + fmt(sat.plateau) + " (AT), " + fmt(vio.plateau) + " vs " +
         fmt(vio.predicted) + " (no AT)");
}

// 7. Gaussianity and covariance structure of the re-centered fields.
void c_clt(Context& ctx, Check& c) {
  const EnsembleReport& rep = ctx.mc();
  const std::vector<CltRow> rows = clt_check(rep, ctx.mc_lim());
  for (const auto& r : rows) {
    const std::string tag = r.kind + " k=" + std::to_string(r.k) + ",kp=" + std::to_string(r.kp);
    if (r.kind == "pooled_moments") {
      c.expect(r.samples >= 20000, "sample count " + tag);
      c.expect(std::abs(r.skewness) < 0.15, "skewness " + fmt(r.skewness) + " " + tag);
      c.expect(std::abs(r.excess_kurtosis) < 0.3,
               "excess kurtosis " + fmt(r.excess_kurtosis) + " " + tag);
    } else if (r.kind == "variance") {
      c.expect(std::abs(r.observed - r.expected) < 5.0 * r.se,
               tag + " off by " + fmt(r.observed - r.expected) + " (se " + fmt(r.se) + ")");
    } else if (r.kind == "cov_same_site") {
      c.expect(std::abs(r.observed - r.expected) < 5.0 * r.se,
               tag + " off by " + fmt(r.observed - r.expected) + " (se " + fmt(r.se) + ")");
    } else if (r.kind == "cov_cross_site") {
      c.expect(std::abs(r.observed) < 4.0 * r.se,
               tag + " = " + fmt(r.observed) + " (se " + fmt(r.se) + ")");
    }
  }
}

// 8. Propagated tensor vs central finite differences.
void c_derivative_exact(Context& ctx, Check& c) {
  const ModelParams p{1.2, 0.3};
  const int n = 20, k = 4;
  const DisorderMatrix g = sample_disorder(n, 11);
  const Eigen::VectorXd m1 = default_start(n, p);

  TrajectoryOptions opt;
  opt.steps = k - 1;
  opt.with_tensors = true;
  opt.threads = ctx.threads;
  const TrajectoryResult tr = run_trajectory(g, m1, p, OnsagerChoice::Classical, opt);
  const DerivativeTensor fd =
      finite_difference_tensor(g, m1, p, OnsagerChoice::Classical, k, 1e-5);
  const double worst = (tr.d_cur.d - fd.d).cwiseAbs().maxCoeff();
  c.expect(worst < 1e-6, "max |propagated - finite difference| = " + fmt(worst));
  c.note("max tensor discrepancy " + fmt(worst));
}

// 9. E and Delta decay rates across sizes.
void c_error_scaling(Context& ctx, Check& c) {
  EnsembleConfig cfg;
  cfg.params = {1.2, 0.3};
  cfg.n_list = {50, 100, 200, 400};
  cfg.k_max = 3;
  cfg.replicas = 30;
  cfg.base_seed = 3;
  cfg.track_derivatives = true;
  cfg.error_iterate = 3;
  cfg.threads = ctx.threads;
  const auto fits =
      scaling_study_all(cfg, {ScalingQuantity::Epsilon, ScalingQuantity::Delta});
  const SlopeFit& eps = fits[0];
  const SlopeFit& del = fits[1];
  c.expect(!eps.degenerate && eps.slope > -1.4 && eps.slope < -0.6,
           "epsilon slope " + fmt(eps.slope));
  c.expect(!del.degenerate && del.slope > -2.5 && del.slope < -1.5,
           "delta slope " + fmt(del.slope));
  c.note("slopes: eps " + fmt(eps.slope) + " +/- " + fmt(eps.half_width) + ", delta " +
         fmt(del.slope) + " +/- " + fmt(del.half_width));
}

// 10. psi partial derivatives vs finite differences of psi.
void c_gaussian_identities(Context& ctx, Check& c) {
  const ModelParams p{1.2, 0.3};
  const double pts[][3] = {{0.1, 0.4, 0.5},
                           {0.0, 0.3, 0.3},
                           {-0.15, 0.5, 0.25},
                           {0.2, 0.6, 0.6},
                           {0.05, 0.2, 0.7}};
  const double step = 1e-6;
  double worst = 0.0;
  for (const auto& pt : pts) {
    const double t = pt[0], t1 = pt[1], t2 = pt[2];
    const PsiPartials an = psi_partials(t, t1, t2, p, ctx.rule);
    const double fd_t =
        (psi(t + step, t1, t2, p, ctx.rule) - psi(t - step, t1, t2, p, ctx.rule)) / (2 * step);
    const double fd_t1 =
        (psi(t, t1 + step, t2, p, ctx.rule) - psi(t, t1 - step, t2, p, ctx.rule)) / (2 * step);
    const double fd_t2 =
        (psi(t, t1, t2 + step, p, ctx.rule) - psi(t, t1, t2 - step, p, ctx.rule)) / (2 * step);
    worst = std::max({worst, std::abs(an.d_t - fd_t), std::abs(an.d_t1 - fd_t1),
                      std::abs(an.d_t2 - fd_t2)});
  }
  c.expect(worst < 1e-6, "max partials discrepancy " + fmt(worst));
  c.note("max partials discrepancy " + fmt(worst));
}

// 11. Monotonicity and sandwich bounds of the limit functions on grids.
void c_structural(Context& ctx, Check& c) {
  const ModelParams points[] = {{0.8, 0.2}, {1.2, 0.4}, {2.0, 0.05}, {1.5, 0.0}};
  for (const ModelParams& p : points) {
    const std::string at = " at (" + fmt(p.beta) + "," + fmt(p.h) + ")";
    // phi(x)/x strictly decreasing on [1e-3, 3].
    double prev_ratio = 0.0;
    bool ratio_ok = true;
    for (int i = 0; i < 200; ++i) {
      const double x = 1e-3 + (3.0 - 1e-3) * i / 199.0;
      const double ratio = phi(x, p, ctx.rule) / x;
      if (i > 0 && !(prev_ratio - ratio > 1e-10)) ratio_ok = false;
      prev_ratio = ratio;
    }
    c.expect(ratio_ok, "phi(x)/x strictly decreasing" + at);

    // phi([q, 3]) inside [q/2, 1].
    const double q = solve_q(p, ctx.rule);
    bool range_ok = true;
    for (int i = 0; i < 100; ++i) {
      const double x = q + (3.0 - q) * i / 99.0;
      const double v = phi(x, p, ctx.rule);
      if (!(v >= q / 2 - 1e-10 && v <= 1.0)) range_ok = false;
    }
    c.expect(range_ok, "phi([q,3]) within [q/2,1]" + at);

    // psi(t,q,q) >= chi(q)^2 + t on [-q, 0].
    const double chi2 = chi(q, p, ctx.rule) * chi(q, p, ctx.rule);
    bool neg_ok = true;
    for (int i = 0; i < 50; ++i) {
      const double t = -q + q * i / 49.0;
      if (!(psi(t, q, q, p, ctx.rule) >= chi2 + t - 1e-10)) neg_ok = false;
    }
    c.expect(neg_ok, "psi(t,q,q) >= chi(q)^2 + t on [-q,0]" + at);
  }
}

// 12. Byte-identical replay across thread counts.
void c_determinism(Context& ctx, Check& c) {
  EnsembleConfig cfg;
  cfg.params = kMcPoint;
  cfg.n_list = {200};
  cfg.k_max = 8;
  cfg.replicas = 6;
  cfg.base_seed = 7;

  cfg.threads = 1;
  EnsembleReport a = run_ensemble(cfg);
  a.clt = clt_check(a, ctx.mc_lim());
  cfg.threads = 2;
  EnsembleReport b = run_ensemble(cfg);
  b.clt = clt_check(b, ctx.mc_lim());
  cfg.threads = 3;
  EnsembleReport d = run_ensemble(cfg);
  d.clt = clt_check(d, ctx.mc_lim());

  const std::string sa = serialize_report(a), sb = serialize_report(b), sd = serialize_report(d);
  c.expect(sa == sb, "threads=1 vs threads=2 reports differ");
  c.expect(sa == sd, "threads=1 vs threads=3 reports differ");
  c.note("report bytes " + std::to_string(sa.size()) + ", identical across 1/2/3 threads");
}

struct Entry {
  const char* id;
  void (*fn)(Context&, Check&);
};

constexpr Entry kCriteria[] = {
    {"quadrature-exactness", c_quadrature},
    {"fixed-point-identities", c_fixed_points},
    {"at-boundary-zero-field", c_at_boundary},
    {"at-dichotomy-limits", c_at_dichotomy},
    {"covariance-propagation", c_covariance},
    {"pseudo-convergence-dichotomy", c_pseudo_convergence},
    {"clt-effective-fields", c_clt},
    {"derivative-exactness", c_derivative_exact},
    {"error-functional-scaling", c_error_scaling},
    {"gaussian-derivative-identities", c_gaussian_identities},
    {"structural-lemmas", c_structural},
    {"determinism-replay", c_determinism},
};

}  // namespace

std::vector<std::string> criterion_ids() {
  std::vector<std::string> out;
  for (const Entry& e : kCriteria) out.emplace_back(e.id);
  return out;
}

std::vector<CriterionResult> run(const Options& options) {
  Context ctx(resolve_threads(options.threads));
  fault_injection::set_flip_onsager_sign(options.flip_onsager_sign);

  std::vector<CriterionResult> results;
  for (const Entry& e : kCriteria) {
    if (!options.only.empty() &&
        std::find(options.only.begin(), options.only.end(), e.id) == options.only.end())
      continue;
    CriterionResult res;
    res.id = e.id;
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      e.fn(ctx, check);
    } catch (const std::exception& ex) {
      check.pass = false;
      check.detail << "exception: " << ex.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    res.pass = check.pass;
    res.seconds = std::chrono::duration<double>(t1 - t0).count();
    res.detail = check.detail.str();
    results.push_back(std::move(res));
  }
  fault_injection::set_flip_onsager_sign(false);
  return results;
}

}  // namespace tapamp::acceptance
