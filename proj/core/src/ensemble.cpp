#include "tapamp/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "tapamp/disorder.hpp"
#include "tapamp/dynamics.hpp"
#include "tapamp/errors.hpp"
#include "tapamp/parallel.hpp"
#include "tapamp/runner.hpp"
#include "tapamp/summation.hpp"

namespace tapamp {

std::string to_string(ScalingQuantity q) {
  switch (q) {
    case ScalingQuantity::Epsilon: return "epsilon";
    case ScalingQuantity::Delta: return "delta";
    case ScalingQuantity::ChoiceGap: return "choice_gap";
  }
  return "?";
}

Eigen::VectorXd InitSpec::start_vector(int n, const ModelParams& params) const {
  if (vector) {
    if (vector->size() != n)
      throw ConfigError("init vector length does not match the system size");
    return *vector;
  }
  if (constant) {
    if (!(*constant >= -1.0 && *constant <= 1.0))
      throw ConfigError("init constant must lie in [-1,1]");
    return Eigen::VectorXd::Constant(n, *constant);
  }
  return default_start(n, params);
}

double InitSpec::m_bar(const ModelParams& params) const {
  if (vector) {
    const auto& v = *vector;
    return pairwise_sum_indexed(0, static_cast<std::size_t>(v.size()),
                                [&](std::size_t i) { return v[static_cast<Eigen::Index>(i)]; }) /
           static_cast<double>(v.size());
  }
  if (constant) return *constant;
  return params.h != 0.0 ? std::tanh(params.h) : 0.5;
}

double InitSpec::q1(const ModelParams& params) const {
  if (vector) return overlap(*vector, *vector);
  const double c = constant ? *constant : (params.h != 0.0 ? std::tanh(params.h) : 0.5);
  return c * c;
}

std::vector<std::pair<int, int>> default_track_fields(int k_max) {
  std::vector<std::pair<int, int>> out;
  for (int site : {1, 2})
    for (int it : {k_max - 2, k_max - 1, k_max})
      if (it >= 1) out.emplace_back(site, it);
  return out;
}

void validate(const EnsembleConfig& cfg) {
  if (cfg.n_list.empty()) throw ConfigError("config: n_list must not be empty");
  for (int n : cfg.n_list)
    if (n < 2) throw ConfigError("config: every system size must be >= 2");
  if (cfg.k_max < 2) throw ConfigError("config: k must be >= 2");
  if (cfg.replicas < 2) throw ConfigError("config: replicas must be >= 2");
  if (cfg.track_derivatives) {
    for (int n : cfg.n_list)
      if (n > kDerivativeTensorGuardN)
        throw ResourceGuardError("config: derivative tracking is limited to n <= 400");
    if (cfg.error_iterate < 1 || cfg.error_iterate > cfg.k_max)
      throw ConfigError("config: error_iterate must lie in [1, k]");
  }
  if (cfg.init.vector && cfg.n_list.size() > 1)
    throw ConfigError("config: an explicit init vector requires a single system size");
  const int n_min = *std::min_element(cfg.n_list.begin(), cfg.n_list.end());
  const auto fields = cfg.track_fields.empty() ? default_track_fields(cfg.k_max) : cfg.track_fields;
  for (const auto& [site, it] : fields) {
    if (site < 1 || site > n_min) throw ConfigError("config: tracked site out of range");
    if (it < 1 || it > cfg.k_max) throw ConfigError("config: tracked iterate out of range");
  }
}

namespace {

struct ReplicaRecord {
  Eigen::MatrixXd q;                      // k_max x k_max
  std::vector<double> pd;                 // pd(k,k-1), k=2..k_max
  std::vector<Eigen::VectorXd> y;         // per tracked iterate
  double mean_eps_sq = 0.0;
  double mean_delta_sq = 0.0;
  bool errors_evaluated = false;
};

std::vector<int> tracked_iterates_of(const EnsembleConfig& cfg) {
  const auto fields =
      cfg.track_fields.empty() ? default_track_fields(cfg.k_max) : cfg.track_fields;
  std::set<int> labels;
  for (const auto& [site, it] : fields) labels.insert(it);
  return {labels.begin(), labels.end()};
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double se_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) /
                   static_cast<double>(xs.size()));
}

}  // namespace

EnsembleReport run_ensemble(const EnsembleConfig& cfg) {
  validate(cfg);
  const QuadratureRule rule = gauss_hermite(cfg.quadrature_order);

  EnsembleReport report;
  report.config = cfg;
  if (report.config.track_fields.empty())
    report.config.track_fields = default_track_fields(cfg.k_max);
  report.q_det = propagate_covariance(cfg.init.q1(cfg.params), cfg.init.m_bar(cfg.params),
                                      cfg.k_max, cfg.params, rule);

  const std::vector<int> tracked = tracked_iterates_of(cfg);
  const int threads = resolve_threads(cfg.threads);
  const int r_count = cfg.replicas;

  for (int n : cfg.n_list) {
    std::vector<ReplicaRecord> recs(r_count);
    parallel_for(static_cast<std::size_t>(r_count), threads, [&](std::size_t r) {
      const DisorderMatrix g =
          sample_disorder(n, cfg.base_seed ^ static_cast<std::uint64_t>(r));
      const Eigen::VectorXd m1 = cfg.init.start_vector(n, cfg.params);

      TrajectoryOptions opt;
      opt.steps = cfg.k_max;
      opt.record_y = tracked;
      opt.with_tensors = cfg.track_derivatives;
      opt.error_iterate = cfg.track_derivatives ? cfg.error_iterate : 0;
      opt.threads = 1;  // replicas already fill the pool
      TrajectoryResult tr = run_trajectory(g, m1, cfg.params, cfg.choice, opt);

      ReplicaRecord& rec = recs[r];
      rec.q.resize(cfg.k_max, cfg.k_max);
      for (int a = 1; a <= cfg.k_max; ++a)
        for (int b = 1; b <= cfg.k_max; ++b) rec.q(a - 1, b - 1) = tr.state.q(a, b);
      rec.pd.reserve(cfg.k_max - 1);
      for (int k = 2; k <= cfg.k_max; ++k)
        rec.pd.push_back(pseudo_distance(tr.state, k, k - 1));
      rec.y = std::move(tr.y_records);
      rec.mean_eps_sq = tr.mean_eps_sq;
      rec.mean_delta_sq = tr.mean_delta_sq;
      rec.errors_evaluated = tr.errors_evaluated;
    });

    // Fixed-order reduction over replicas; independent of scheduling.
    SizeResult sz;
    sz.n = n;
    sz.q_mc.k_max = cfg.k_max;
    sz.q_mc.mean = Eigen::MatrixXd::Zero(cfg.k_max, cfg.k_max);
    sz.q_mc.se = Eigen::MatrixXd::Zero(cfg.k_max, cfg.k_max);
    for (const auto& rec : recs) sz.q_mc.mean += rec.q;
    sz.q_mc.mean /= static_cast<double>(r_count);
    for (const auto& rec : recs) {
      const Eigen::MatrixXd d = rec.q - sz.q_mc.mean;
      sz.q_mc.se += d.cwiseProduct(d);
    }
    sz.q_mc.se = (sz.q_mc.se / (static_cast<double>(r_count) - 1.0) /
                  static_cast<double>(r_count))
                     .cwiseSqrt();

    sz.pseudo_conv.assign(cfg.k_max - 1, 0.0);
    for (const auto& rec : recs)
      for (std::size_t i = 0; i < rec.pd.size(); ++i) sz.pseudo_conv[i] += rec.pd[i];
    for (double& v : sz.pseudo_conv) v /= static_cast<double>(r_count);

    sz.tracked_iterates = tracked;
    sz.y_samples.reserve(tracked.size());
    for (std::size_t t = 0; t < tracked.size(); ++t) {
      Eigen::MatrixXd m(r_count, n);
      for (int r = 0; r < r_count; ++r) m.row(r) = recs[r].y[t].transpose();
      sz.y_samples.push_back(std::move(m));
    }

    if (cfg.track_derivatives) {
      std::vector<double> eps, del;
      for (const auto& rec : recs) {
        eps.push_back(rec.mean_eps_sq);
        del.push_back(rec.mean_delta_sq);
      }
      sz.mean_eps_sq = mean_of(eps);
      sz.se_eps_sq = se_of(eps, sz.mean_eps_sq);
      sz.mean_delta_sq = mean_of(del);
      sz.se_delta_sq = se_of(del, sz.mean_delta_sq);
      sz.errors_evaluated = true;
    }
    report.per_n.push_back(std::move(sz));
  }
  return report;
}

namespace {

struct PooledMoments {
  double mean = 0.0, var = 0.0, skew = 0.0, kurt = 0.0;
  long count = 0;
};

PooledMoments pooled_moments(const Eigen::MatrixXd& samples) {
  PooledMoments m;
  m.count = static_cast<long>(samples.size());
  m.mean = samples.mean();
  const Eigen::ArrayXXd c = samples.array() - m.mean;
  const double n = static_cast<double>(m.count);
  m.var = c.square().sum() / n;
  const double sd = std::sqrt(m.var);
  m.skew = (c / sd).cube().sum() / n;
  m.kurt = (c / sd).pow(4).sum() / n - 3.0;
  return m;
}

}  // namespace

std::vector<CltRow> clt_check(const EnsembleReport& report, const LimitSolution& limit,
                              std::vector<std::pair<int, int>> k_pairs) {
  if (report.per_n.empty()) throw ConfigError("clt_check: empty report");
  const SizeResult& sz = report.per_n.back();
  if (sz.y_samples.empty()) throw ConfigError("clt_check: no recorded fields");
  const int r_count = static_cast<int>(sz.y_samples.front().rows());
  const int n = sz.n;
  if (static_cast<long>(r_count) * n < 1000)
    throw ConfigError("clt_check: insufficient statistical power (< 1000 pooled samples)");

  const double beta2 = report.config.params.beta * report.config.params.beta;
  const auto& iters = sz.tracked_iterates;
  auto sample_of = [&](int iterate) -> const Eigen::MatrixXd& {
    const auto it = std::find(iters.begin(), iters.end(), iterate);
    if (it == iters.end()) throw ConfigError("clt_check: iterate was not tracked");
    return sz.y_samples[static_cast<std::size_t>(it - iters.begin())];
  };

  if (k_pairs.empty())
    for (std::size_t a = 0; a < iters.size(); ++a)
      for (std::size_t b = a + 1; b < iters.size(); ++b)
        k_pairs.emplace_back(iters[a], iters[b]);

  std::vector<CltRow> rows;

  for (int k : iters) {
    const Eigen::MatrixXd& y = sample_of(k);
    const PooledMoments pm = pooled_moments(y);
    CltRow mr;
    mr.kind = "pooled_moments";
    mr.k = k;
    mr.skewness = pm.skew;
    mr.excess_kurtosis = pm.kurt;
    mr.samples = pm.count;
    rows.push_back(mr);

    std::vector<double> vr(r_count);
    for (int r = 0; r < r_count; ++r) {
      const Eigen::RowVectorXd row = y.row(r);
      const double mu = row.mean();
      vr[r] = (row.array() - mu).square().sum() / (n - 1.0);
    }
    CltRow v;
    v.kind = "variance";
    v.k = k;
    v.kp = k;
    v.observed = mean_of(vr);
    v.se = se_of(vr, v.observed);
    v.expected = beta2 * report.q_det.at(k, k);
    v.samples = static_cast<long>(r_count) * n;
    rows.push_back(v);

    CltRow vl = v;
    vl.kind = "variance_limit";
    vl.expected = beta2 * limit.q;
    rows.push_back(vl);
  }

  for (const auto& [k, kp] : k_pairs) {
    const Eigen::MatrixXd& ya = sample_of(k);
    const Eigen::MatrixXd& yb = sample_of(kp);

    std::vector<double> cr(r_count), xr(r_count);
    const int half = n / 2;
    for (int r = 0; r < r_count; ++r) {
      const Eigen::RowVectorXd a = ya.row(r);
      const Eigen::RowVectorXd b = yb.row(r);
      const double mu_a = a.mean(), mu_b = b.mean();
      cr[r] = ((a.array() - mu_a) * (b.array() - mu_b)).sum() / (n - 1.0);
      double s = 0.0;
      for (int i = 0; i < half; ++i)
        s += (a[2 * i] - mu_a) * (b[2 * i + 1] - mu_b);
      xr[r] = s / (half - 1.0);
    }

    CltRow c;
    c.kind = "cov_same_site";
    c.k = k;
    c.kp = kp;
    c.observed = mean_of(cr);
    c.se = se_of(cr, c.observed);
    c.expected = beta2 * report.q_det.at(k, kp);
    c.samples = static_cast<long>(r_count) * n;
    rows.push_back(c);

    CltRow cl = c;
    cl.kind = "cov_same_site_limit";
    cl.expected = beta2 * limit.q_tilde;
    rows.push_back(cl);

    CltRow x;
    x.kind = "cov_cross_site";
    x.k = k;
    x.kp = kp;
    x.observed = mean_of(xr);
    x.se = se_of(xr, x.observed);
    x.expected = 0.0;
    x.samples = static_cast<long>(r_count) * half;
    rows.push_back(x);
  }
  return rows;
}

AtDichotomy at_dichotomy_check(const EnsembleReport& report, const LimitSolution& limit) {
  if (report.per_n.empty() || report.per_n.back().pseudo_conv.empty())
    throw ConfigError("at_dichotomy_check: report lacks a pseudo-convergence trajectory");
  AtDichotomy out;
  out.plateau = report.per_n.back().pseudo_conv.back();
  out.predicted = 2.0 * (limit.q - limit.q_tilde);
  out.at_satisfied = limit.at_satisfied;
  return out;
}

namespace {

void fit_loglog(SlopeFit& fit) {
  fit.degenerate = std::any_of(fit.means.begin(), fit.means.end(),
                               [](double m) { return m <= 0.0; });
  if (fit.degenerate) return;
  const std::size_t m = fit.means.size();
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += std::log(fit.n_values[i]);
    sy += std::log(fit.means[i]);
  }
  const double xbar = sx / m, ybar = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = std::log(fit.n_values[i]) - xbar;
    sxx += dx * dx;
    sxy += dx * (std::log(fit.means[i]) - ybar);
  }
  fit.slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double pred = ybar + fit.slope * (std::log(fit.n_values[i]) - xbar);
    const double res = std::log(fit.means[i]) - pred;
    rss += res * res;
  }
  const double sigma2 = m > 2 ? rss / (m - 2.0) : 0.0;
  fit.half_width = 1.96 * std::sqrt(sigma2 / sxx);
}

void append_size_stats(SlopeFit& fit, int n, const std::vector<double>& vals) {
  const double mean = mean_of(vals);
  fit.n_values.push_back(static_cast<double>(n));
  fit.means.push_back(mean);
  fit.ses.push_back(se_of(vals, mean));
}

}  // namespace

std::vector<SlopeFit> scaling_study_all(const EnsembleConfig& cfg,
                                        const std::vector<ScalingQuantity>& quantities) {
  if (quantities.empty()) throw ConfigError("scaling_study: no quantities requested");
  if (cfg.n_list.size() < 3)
    throw ConfigError("scaling_study: need at least 3 system sizes");
  const auto [mn, mx] = std::minmax_element(cfg.n_list.begin(), cfg.n_list.end());
  if (static_cast<double>(*mx) < 4.0 * static_cast<double>(*mn))
    throw ConfigError("scaling_study: sizes must span at least a factor of 4");
  const bool wants_errors =
      std::any_of(quantities.begin(), quantities.end(),
                  [](ScalingQuantity q) { return q != ScalingQuantity::ChoiceGap; });
  const bool wants_gap =
      std::any_of(quantities.begin(), quantities.end(),
                  [](ScalingQuantity q) { return q == ScalingQuantity::ChoiceGap; });
  if (wants_errors && !cfg.track_derivatives)
    throw ConfigError("scaling_study: error functionals require track_derivatives");
  if (cfg.replicas < 2) throw ConfigError("scaling_study: replicas must be >= 2");
  for (int n : cfg.n_list)
    if (n > kDerivativeTensorGuardN)
      throw ResourceGuardError("scaling_study: derivative tracking is limited to n <= 400");

  const int threads = resolve_threads(cfg.threads);
  SlopeFit eps_fit, delta_fit, gap_fit;
  eps_fit.quantity = ScalingQuantity::Epsilon;
  delta_fit.quantity = ScalingQuantity::Delta;
  gap_fit.quantity = ScalingQuantity::ChoiceGap;

  for (int n : cfg.n_list) {
    if (wants_errors) {
      std::vector<double> eps(cfg.replicas), del(cfg.replicas);
      parallel_for(static_cast<std::size_t>(cfg.replicas), threads, [&](std::size_t r) {
        const DisorderMatrix g =
            sample_disorder(n, cfg.base_seed ^ static_cast<std::uint64_t>(r));
        const Eigen::VectorXd m1 = cfg.init.start_vector(n, cfg.params);
        TrajectoryOptions opt;
        opt.steps = std::max(cfg.error_iterate, 2);
        opt.with_tensors = true;
        opt.error_iterate = cfg.error_iterate;
        const auto tr = run_trajectory(g, m1, cfg.params, cfg.choice, opt);
        eps[r] = tr.mean_eps_sq;
        del[r] = tr.mean_delta_sq;
      });
      append_size_stats(eps_fit, n, eps);
      append_size_stats(delta_fit, n, del);
    }
    if (wants_gap) {
      std::vector<double> gap(cfg.replicas);
      parallel_for(static_cast<std::size_t>(cfg.replicas), threads, [&](std::size_t r) {
        const DisorderMatrix g =
            sample_disorder(n, cfg.base_seed ^ static_cast<std::uint64_t>(r));
        const Eigen::VectorXd m1 = cfg.init.start_vector(n, cfg.params);
        TrajectoryOptions opt;
        opt.steps = cfg.k_max;
        const auto a = run_trajectory(g, m1, cfg.params, OnsagerChoice::Classical, opt);
        const auto b =
            run_trajectory(g, m1, cfg.params, OnsagerChoice::SteinRecentering, opt);
        gap[r] = (a.state.m(a.state.k) - b.state.m(b.state.k)).cwiseAbs().maxCoeff();
      });
      append_size_stats(gap_fit, n, gap);
    }
  }
  fit_loglog(eps_fit);
  fit_loglog(delta_fit);
  fit_loglog(gap_fit);

  std::vector<SlopeFit> out;
  for (ScalingQuantity q : quantities) {
    switch (q) {
      case ScalingQuantity::Epsilon: out.push_back(eps_fit); break;
      case ScalingQuantity::Delta: out.push_back(delta_fit); break;
      case ScalingQuantity::ChoiceGap: out.push_back(gap_fit); break;
    }
  }
  return out;
}

SlopeFit scaling_study(const EnsembleConfig& cfg, ScalingQuantity quantity) {
  return scaling_study_all(cfg, {quantity}).front();
}

}  // namespace tapamp
