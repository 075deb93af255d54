#include "tapamp/disorder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace tapamp {

static_assert(std::endian::native == std::endian::little,
              "binary fixture format assumes a little-endian host");

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
constexpr char kMagic[8] = {'T', 'A', 'P', 'G', 'D', 'M', '0', '1'};

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t splitmix_next(std::uint64_t& state) {
  state += kGamma;
  return mix64(state);
}

}  // namespace

double disorder_entry(std::uint64_t seed, int i, int j) {
  if (i == j) throw std::invalid_argument("disorder_entry: diagonal pair requested");
  if (i > j) std::swap(i, j);
  // Key the stream by (seed, i, j); draws for distinct pairs are independent
  // of generation order.
  std::uint64_t key = mix64(seed + kGamma);
  key = mix64(key ^ (static_cast<std::uint64_t>(i) + kGamma));
  key = mix64(key ^ (static_cast<std::uint64_t>(j) + kGamma));
  std::uint64_t state = key;
  const std::uint64_t a = splitmix_next(state);
  const std::uint64_t b = splitmix_next(state);
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

DisorderMatrix sample_disorder(int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_disorder: n must be >= 2");
  DisorderMatrix g;
  g.n = n;
  g.seed = seed;
  g.entries = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double v = disorder_entry(seed, i, j);
      g.entries(i, j) = v;
      g.entries(j, i) = v;
    }
  }
  return g;
}

DisorderMatrix perturb_entry(const DisorderMatrix& g, int i, int j, double eps) {
  if (i == j) throw std::invalid_argument("perturb_entry: i and j must differ");
  if (i < 0 || j < 0 || i >= g.n || j >= g.n)
    throw std::out_of_range("perturb_entry: index out of range");
  DisorderMatrix out = g;
  out.entries(i, j) += eps;
  out.entries(j, i) += eps;
  return out;
}

void save_disorder(const DisorderMatrix& g, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_disorder: cannot open " + path.string());
  f.write(kMagic, sizeof(kMagic));
  const std::uint64_t n64 = static_cast<std::uint64_t>(g.n);
  f.write(reinterpret_cast<const char*>(&n64), sizeof(n64));
  f.write(reinterpret_cast<const char*>(&g.seed), sizeof(g.seed));
  // row-major body
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double v = g.entries(i, j);
      f.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  if (!f) throw std::runtime_error("save_disorder: write failed for " + path.string());
}

DisorderMatrix load_disorder(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_disorder: cannot open " + path.string());
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_disorder: bad magic in " + path.string());
  std::uint64_t n64 = 0, seed = 0;
  f.read(reinterpret_cast<char*>(&n64), sizeof(n64));
  f.read(reinterpret_cast<char*>(&seed), sizeof(seed));
  if (!f || n64 < 2 || n64 > (1u << 20))
    throw std::runtime_error("load_disorder: bad header in " + path.string());
  DisorderMatrix g;
  g.n = static_cast<int>(n64);
  g.seed = seed;
  g.entries.resize(g.n, g.n);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      double v;
      f.read(reinterpret_cast<char*>(&v), sizeof(v));
      if (!f) throw std::runtime_error("load_disorder: truncated body in " + path.string());
      g.entries(i, j) = v;
    }
  return g;
}

}  // namespace tapamp
