#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "tapamp/derivative.hpp"
#include "tapamp/dynamics.hpp"
#include "tapamp/errors.hpp"

using namespace tapamp;

namespace {
Eigen::VectorXd constant_vec(int n, double c) { return Eigen::VectorXd::Constant(n, c); }
}  // namespace

TEST_CASE("init_state overlap seeding") {
  CHECK(init_state(constant_vec(4, 0.5), OnsagerChoice::Classical).q(1, 1) == doctest::Approx(0.25));
  CHECK(init_state(constant_vec(4, 0.0), OnsagerChoice::Classical).q(1, 1) == 0.0);
  CHECK(init_state(constant_vec(4, 1.0), OnsagerChoice::Classical).q(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("init_state guards and history layout") {
  CHECK_THROWS_AS(init_state(constant_vec(3, 1.5), OnsagerChoice::Classical), std::domain_error);
  Eigen::VectorXd with_nan = constant_vec(3, 0.0);
  with_nan[1] = std::nan("");
  CHECK_THROWS_AS(init_state(with_nan, OnsagerChoice::Classical), std::domain_error);

  const IterationState cl = init_state(constant_vec(3, 0.2), OnsagerChoice::Classical);
  CHECK(cl.m(0).isZero());  // m^(0) := 0
  CHECK(cl.m(1)[0] == 0.2);
  const IterationState st = init_state(constant_vec(3, 0.2), OnsagerChoice::SteinRecentering);
  CHECK_THROWS_AS(st.m(0), std::out_of_range);
  CHECK(st.m(1)[0] == 0.2);
}

TEST_CASE("effective_field") {
  DisorderMatrix g = sample_disorder(3, 2);
  const ModelParams p{0.7, 0.0};
  SUBCASE("zero magnetization gives zero field") {
    CHECK(effective_field(g, constant_vec(3, 0.0), p).isZero());
  }
  SUBCASE("beta = 0 gives zero field") {
    CHECK(effective_field(g, constant_vec(3, 0.5), {0.0, 0.3}).isZero());
  }
  SUBCASE("matches direct summation on a fixed matrix") {
    g.entries << 0.0, 1.5, -0.5,
                 1.5, 0.0, 2.0,
                -0.5, 2.0, 0.0;
    const Eigen::VectorXd m = constant_vec(3, 1.0);
    const Eigen::VectorXd f = effective_field(g, m, p);
    const double s = 0.7 / std::sqrt(3.0);
    CHECK(f[0] == doctest::Approx(s * (1.5 - 0.5)).epsilon(1e-15));
    CHECK(f[1] == doctest::Approx(s * (1.5 + 2.0)).epsilon(1e-15));
    CHECK(f[2] == doctest::Approx(s * (-0.5 + 2.0)).epsilon(1e-15));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(effective_field(g, constant_vec(4, 0.0), p), std::invalid_argument);
  }
}

TEST_CASE("onsager_classical") {
  CHECK(onsager_classical(constant_vec(5, 0.3), constant_vec(5, 0.0), {1.0, 0.0}).isZero());
  CHECK(onsager_classical(constant_vec(5, 1.0), constant_vec(5, 0.4), {1.3, 0.0}).isZero());
  const Eigen::VectorXd on = onsager_classical(constant_vec(4, 0.6), constant_vec(4, 0.2), {1.0, 0.0});
  for (int i = 0; i < 4; ++i) CHECK(on[i] == doctest::Approx(0.128).epsilon(1e-15));
  CHECK_THROWS_AS(onsager_classical(constant_vec(4, 0.1), constant_vec(3, 0.1), {1.0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("step at beta = 0 reaches tanh(h) and stays") {
  const DisorderMatrix g = sample_disorder(8, 3);
  const ModelParams p{0.0, 0.7};
  IterationState s = init_state(constant_vec(8, 0.1), OnsagerChoice::Classical);
  step(s, g, p);
  volatile double h_rt = 0.7;  // defeat compile-time folding of tanh
  const double want = std::tanh(h_rt);
  for (int i = 0; i < 8; ++i) CHECK(s.m(2)[i] == want);
  CHECK(s.q(2, 2) == doctest::Approx(want * want).epsilon(1e-15));
  step(s, g, p);
  CHECK(s.m(3) == s.m(2));  // exact fixed point
}

TEST_CASE("zero field and zero start is an exact fixed point") {
  const DisorderMatrix g = sample_disorder(16, 9);
  IterationState s = init_state(constant_vec(16, 0.0), OnsagerChoice::Classical);
  for (int k = 0; k < 5; ++k) step(s, g, {1.7, 0.0});
  for (int a = 1; a <= s.k; ++a) CHECK(s.m(a).isZero());
}

TEST_CASE("one classical step matches the direct formula at n = 3") {
  const int n = 3;
  const ModelParams p{0.9, 0.2};
  const DisorderMatrix g = sample_disorder(n, 17);
  IterationState s = init_state(constant_vec(n, 0.5), OnsagerChoice::Classical);
  step(s, g, p);
  step(s, g, p);

  // Independent re-evaluation with plain loops.
  double m1[n], m2[n], m3[n];
  for (int i = 0; i < n; ++i) m1[i] = 0.5;
  {
    const double qn = (3 * 0.25) / 3.0;
    (void)qn;
    for (int i = 0; i < n; ++i) {
      double field = 0.0;
      for (int j = 0; j < n; ++j) field += g.entries(i, j) * m1[j];
      field *= p.beta / std::sqrt(3.0);
      // first step: On = beta^2 (1 - q) m^(0) = 0
      m2[i] = std::tanh(p.h + field);
    }
  }
  {
    double qn = 0.0;
    for (int i = 0; i < n; ++i) qn += m2[i] * m2[i];
    qn /= n;
    for (int i = 0; i < n; ++i) {
      double field = 0.0;
      for (int j = 0; j < n; ++j) field += g.entries(i, j) * m2[j];
      field *= p.beta / std::sqrt(3.0);
      const double on = p.beta * p.beta * (1.0 - qn) * m1[i];
      m3[i] = std::tanh(p.h + field - on);
    }
  }
  for (int i = 0; i < n; ++i) {
    CHECK(s.m(2)[i] == doctest::Approx(m2[i]).epsilon(1e-14));
    CHECK(s.m(3)[i] == doctest::Approx(m3[i]).epsilon(1e-14));
  }
}

TEST_CASE("step guards for the re-centering choice") {
  const DisorderMatrix g = sample_disorder(5, 1);
  IterationState s = init_state(constant_vec(5, 0.3), OnsagerChoice::SteinRecentering);
  CHECK_THROWS_AS(step(s, g, {1.0, 0.1}), ConfigError);
  DerivativeTensor stale = zero_tensor(5, 2);
  CHECK_THROWS_AS(step(s, g, {1.0, 0.1}, &stale), std::logic_error);
  DerivativeTensor ok = zero_tensor(5, 1);
  step(s, g, {1.0, 0.1}, &ok);  // k=1 tensor is zero: plain field update
  CHECK(s.k == 2);
}

TEST_CASE("overlap") {
  CHECK(overlap(constant_vec(6, 1.0), constant_vec(6, 1.0)) == 1.0);
  Eigen::VectorXd a(2), b(2);
  a << 1.0, -1.0;
  b << 1.0, 1.0;
  CHECK(overlap(a, b) == 0.0);
  CHECK(overlap(constant_vec(10, 0.3), constant_vec(10, 0.7)) == doctest::Approx(0.21).epsilon(1e-15));
  CHECK_THROWS_AS(overlap(constant_vec(3, 0.0), constant_vec(4, 0.0)), std::invalid_argument);
}

TEST_CASE("pseudo_distance") {
  const DisorderMatrix g = sample_disorder(12, 5);
  const ModelParams p{1.1, 0.3};
  IterationState s = init_state(constant_vec(12, 0.4), OnsagerChoice::Classical);
  for (int k = 0; k < 4; ++k) step(s, g, p);

  SUBCASE("k == l is exactly zero") {
    for (int k = 1; k <= s.k; ++k) CHECK(pseudo_distance(s, k, k) == 0.0);
  }
  SUBCASE("matches the direct mean-square difference") {
    for (int k = 1; k <= s.k; ++k) {
      for (int l = 1; l <= s.k; ++l) {
        const double direct = (s.m(k) - s.m(l)).squaredNorm() / 12.0;
        CHECK(pseudo_distance(s, k, l) == doctest::Approx(direct).epsilon(1e-12));
        CHECK(pseudo_distance(s, k, l) == pseudo_distance(s, l, k));
        CHECK(pseudo_distance(s, k, l) >= -1e-15);
      }
    }
  }
  SUBCASE("opposite constant vectors") {
    IterationState t = init_state(constant_vec(4, 0.3), OnsagerChoice::Classical);
    t.m_hist.push_back(constant_vec(4, -0.3));
    t.k = 2;
    t.overlaps.push_back(overlap(t.m(2), t.m(1)));
    t.overlaps.push_back(overlap(t.m(2), t.m(2)));
    CHECK(pseudo_distance(t, 1, 2) == doctest::Approx(4 * 0.09).epsilon(1e-15));
  }
  SUBCASE("range check") { CHECK_THROWS_AS(pseudo_distance(s, 1, s.k + 1), std::out_of_range); }
}

TEST_CASE("iteration invariants on a generic run") {
  const DisorderMatrix g = sample_disorder(40, 21);
  const ModelParams p{1.4, 0.25};
  IterationState s = init_state(default_start(40, p), OnsagerChoice::Classical);
  for (int k = 0; k < 8; ++k) step(s, g, p);
  for (int a = 1; a <= s.k; ++a) {
    for (int i = 0; i < 40; ++i) {
      CHECK(s.m(a)[i] > -1.0);
      CHECK(s.m(a)[i] < 1.0);
    }
    CHECK(s.q(a, a) >= 0.0);
    CHECK(s.q(a, a) <= 1.0);
    for (int b = 1; b <= s.k; ++b) {
      CHECK(s.q(a, b) == s.q(b, a));
      CHECK(std::abs(s.q(a, b)) <= std::sqrt(s.q(a, a) * s.q(b, b)) + 1e-14);
    }
  }
}

TEST_CASE("snapshot JSON shape") {
  const DisorderMatrix g = sample_disorder(6, 4);
  const ModelParams p{0.8, 0.2};
  IterationState s = init_state(default_start(6, p), OnsagerChoice::Classical);
  step(s, g, p);
  step(s, g, p);
  const std::string snap = snapshot_json(s, p, 4);
  const nlohmann::json j = nlohmann::json::parse(snap);
  CHECK(j.at("schema_version") == "1.0");
  CHECK(j.at("k") == 3);
  CHECK(j.at("q_table").size() == 3);
  CHECK(j.at("q_table")[0].size() == 3);
  CHECK(j.at("params").at("beta") == 0.8);
  CHECK(j.at("seed") == 4);
  CHECK(j.at("choice") == "classical");
  CHECK(j.at("final_m_summary").at("q_kk").get<double>() == doctest::Approx(s.q(3, 3)));
}

TEST_CASE("fault injection hook flips the reaction term") {
  const DisorderMatrix g = sample_disorder(10, 6);
  const ModelParams p{1.2, 0.4};
  IterationState a = init_state(constant_vec(10, 0.5), OnsagerChoice::Classical);
  step(a, g, p);
  step(a, g, p);

  fault_injection::set_flip_onsager_sign(true);
  IterationState b = init_state(constant_vec(10, 0.5), OnsagerChoice::Classical);
  step(b, g, p);
  step(b, g, p);
  fault_injection::set_flip_onsager_sign(false);

  CHECK(a.m(2) == b.m(2));       // first step has zero reaction term
  CHECK(a.m(3) != b.m(3));
  CHECK(a.onsager_current == -b.onsager_current);
}
