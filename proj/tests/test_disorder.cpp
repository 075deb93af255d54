#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "tapamp/disorder.hpp"

using namespace tapamp;

TEST_CASE("n=2 has the forced shape") {
  const DisorderMatrix g = sample_disorder(2, 123);
  CHECK(g.entries(0, 0) == 0.0);
  CHECK(g.entries(1, 1) == 0.0);
  CHECK(g.entries(0, 1) == g.entries(1, 0));
  CHECK(g.entries(0, 1) == disorder_entry(123, 0, 1));
}

TEST_CASE("symmetry and zero diagonal hold exactly") {
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    for (int n : {3, 17, 64}) {
      const DisorderMatrix g = sample_disorder(n, seed);
      for (int i = 0; i < n; ++i) {
        CHECK(g.entries(i, i) == 0.0);
        for (int j = i + 1; j < n; ++j) CHECK(g.entries(i, j) == g.entries(j, i));
      }
    }
  }
}

TEST_CASE("same (n, seed) reproduces bit-for-bit") {
  const DisorderMatrix a = sample_disorder(100, 7);
  const DisorderMatrix b = sample_disorder(100, 7);
  CHECK(a.entries == b.entries);
}

TEST_CASE("different seeds differ") {
  const DisorderMatrix a = sample_disorder(50, 1);
  const DisorderMatrix b = sample_disorder(50, 2);
  CHECK(a.entries != b.entries);
}

TEST_CASE("size guard") {
  CHECK_THROWS_AS(sample_disorder(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_disorder(0, 0), std::invalid_argument);
}

TEST_CASE("off-diagonal entries look standard normal at n=2000") {
  const DisorderMatrix g = sample_disorder(2000, 1);
  const double pairs = 2000.0 * 1999.0 / 2.0;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = i + 1; j < g.n; ++j) {
      sum += g.entries(i, j);
      sumsq += g.entries(i, j) * g.entries(i, j);
    }
  const double mean = sum / pairs;
  const double var = sumsq / pairs - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(pairs));
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("perturb_entry") {
  const DisorderMatrix g = sample_disorder(6, 5);

  SUBCASE("eps = 0 is the identity") {
    const DisorderMatrix p = perturb_entry(g, 1, 2, 0.0);
    CHECK(p.entries == g.entries);
  }
  SUBCASE("inverse perturbation restores the matrix") {
    const DisorderMatrix p = perturb_entry(perturb_entry(g, 1, 2, 1e-3), 2, 1, -1e-3);
    CHECK((p.entries - g.entries).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("both mirror entries shift, symmetry holds") {
    const DisorderMatrix p = perturb_entry(g, 0, 3, 0.25);
    CHECK(p.entries(0, 3) == g.entries(0, 3) + 0.25);
    CHECK(p.entries(3, 0) == p.entries(0, 3));
    for (int i = 0; i < p.n; ++i)
      for (int j = 0; j < p.n; ++j) CHECK(p.entries(i, j) == p.entries(j, i));
  }
  SUBCASE("diagonal pair is rejected") {
    CHECK_THROWS_AS(perturb_entry(g, 2, 2, 0.1), std::invalid_argument);
  }
}

TEST_CASE("binary dump/load round-trips bitwise") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "tapamp_test_disorder.bin";
  const DisorderMatrix g = sample_disorder(31, 77);
  save_disorder(g, path);
  const DisorderMatrix back = load_disorder(path);
  CHECK(back.n == g.n);
  CHECK(back.seed == g.seed);
  CHECK(back.entries == g.entries);
  fs::remove(path);
}

TEST_CASE("load rejects foreign files") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "tapamp_test_bad.bin";
  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fputs("not a disorder fixture at all", f);
  std::fclose(f);
  CHECK_THROWS(load_disorder(path));
  fs::remove(path);
}
