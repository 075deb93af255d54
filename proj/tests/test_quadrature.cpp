#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "tapamp/quadrature.hpp"

using namespace tapamp;

namespace {

// (2m-1)!! for E[Z^(2m)]
double double_factorial_odd(int m) {
  double v = 1.0;
  for (int k = 1; k <= m; ++k) v *= 2.0 * k - 1.0;
  return v;
}

}  // namespace

TEST_CASE("order guard") {
  CHECK_THROWS_AS(gauss_hermite(1), std::invalid_argument);
  CHECK_THROWS_AS(gauss_hermite(0), std::invalid_argument);
}

TEST_CASE("weights sum to one, nodes mirror exactly") {
  for (int order : {2, 3, 16, 64, 65, 128}) {
    const QuadratureRule r = gauss_hermite(order);
    CHECK(std::abs(pairwise_sum(r.weights) - 1.0) < 1e-14);
    for (int i = 0; i < order / 2; ++i) {
      CHECK(r.nodes[i] == -r.nodes[order - 1 - i]);
      CHECK(r.weights[i] == r.weights[order - 1 - i]);
    }
    if (order % 2 != 0) CHECK(r.nodes[order / 2] == 0.0);
  }
}

TEST_CASE("gaussian moments") {
  const QuadratureRule r16 = gauss_hermite(16);
  CHECK(std::abs(r16.expect([](double z) { return z; })) < 1e-15);
  CHECK(r16.expect([](double z) { return z * z; }) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(r16.expect([](double z) { return std::pow(z, 6); }) ==
        doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("polynomial exactness up to degree 8") {
  const QuadratureRule r = gauss_hermite(5);  // exact through degree 9
  for (int d = 0; d <= 8; ++d) {
    const double got = r.expect([d](double z) { return std::pow(z, d); });
    const double want = (d % 2 != 0) ? 0.0 : double_factorial_odd(d / 2);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("odd integrands cancel to exactly zero") {
  const QuadratureRule r = gauss_hermite(64);
  CHECK(r.expect([](double z) { return std::tanh(1.3 * z); }) == 0.0);
  CHECK(r.expect([](double z) { return z * z * z; }) == 0.0);
}
