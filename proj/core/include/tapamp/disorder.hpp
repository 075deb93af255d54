#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Core>

namespace tapamp {

// Symmetric N x N matrix of standard Gaussian couplings with zero diagonal.
// Each unordered pair {i,j} draws its entry from a counter-based stream keyed
// by (seed, i, j), so regeneration is bit-for-bit reproducible and independent
// of fill order or thread count.
struct DisorderMatrix {
  int n = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd entries;
};

// The standard normal draw assigned to pair {i,j} under `seed` (i != j).
double disorder_entry(std::uint64_t seed, int i, int j);

DisorderMatrix sample_disorder(int n, std::uint64_t seed);

// Copy of g with entries (i,j) and (j,i) both shifted by eps; i != j.
DisorderMatrix perturb_entry(const DisorderMatrix& g, int i, int j, double eps);

// Binary fixture format: 8 magic bytes, u64 n, u64 seed, then n*n row-major
// little-endian doubles.
void save_disorder(const DisorderMatrix& g, const std::filesystem::path& path);
DisorderMatrix load_disorder(const std::filesystem::path& path);

}  // namespace tapamp
