#pragma once

#include <string>

namespace tapamp {

// Inverse temperature and external field. Both may take any real value;
// no sign restriction anywhere in the library.
struct ModelParams {
  double beta = 1.0;
  double h = 0.0;
};

// How the reaction term is built: the classical finite-size correction
// beta^2 (1 - q_N) m^(k-1), or the disorder-derivative re-centering
// (beta/sqrt(N)) sum_j d m_j^(k) / d g_ij.
enum class OnsagerChoice { Classical, SteinRecentering };

std::string to_string(OnsagerChoice choice);
OnsagerChoice onsager_choice_from_string(const std::string& name);

}  // namespace tapamp
