#pragma once

#include <string>
#include <vector>

namespace tapamp::acceptance {

struct Options {
  int threads = 0;                 // 0 = hardware concurrency
  bool flip_onsager_sign = false;  // fault-injection hook for mutation checks
  std::vector<std::string> only;   // run these ids only (empty = all)
};

struct CriterionResult {
  std::string id;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

std::vector<std::string> criterion_ids();

// Runs every criterion at its pinned tolerance; one result per criterion.
std::vector<CriterionResult> run(const Options& options);

}  // namespace tapamp::acceptance
