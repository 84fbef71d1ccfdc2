#pragma once

#include <vector>

namespace sdh {

/// Outcome of an outer infimum over cube multipliers k.
struct DensityEstimate {
  double value = 0.0;               // min over k of the per-k values
  std::vector<int> ks;
  std::vector<double> per_k;
  std::vector<double> envelope;     // running minimum along ks
  std::vector<bool> converged;
  bool all_converged = true;
  /// Set when a nested pair (k, h k) violates value(h k) <= value(k) + 1e-12.
  bool monotonicity_violation = false;
};

}  // namespace sdh
