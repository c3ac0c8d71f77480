#pragma once

#include <cmath>
#include <vector>

namespace spmm {

/// Geometric mean; 0 when the input is empty or contains a non-positive
/// value (the summary convention for metric columns).
inline double geomean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double log_sum = 0.0;
  for (double x : xs) {
    if (x <= 0.0) return 0.0;
    log_sum += std::log(x);
  }
  return std::exp(log_sum / double(xs.size()));
}

}  // namespace spmm
