#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cada/tensor.hpp"

namespace cada {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central-difference check of analytic gradients.
//
// `forward` evaluates the scalar objective without touching gradients;
// `compute_grads` must zero the gradients and run one forward+backward pass
// so that every Parameter.grad holds the analytic gradient. Each parameter
// entry is then perturbed by +/-eps and compared against
// (f(p+eps) - f(p-eps)) / (2 eps). The relative error uses a unit floor:
// |a - n| / max(1, |a| + |n|).
//
// Rejects eps outside [1e-7, 1e-4] and non-deterministic objectives (two
// evaluations at the same point must agree bit-for-bit).
GradCheckResult finite_diff_check(const std::function<double()>& forward,
                                  const std::function<void()>& compute_grads,
                                  const std::vector<Parameter*>& params, double eps);

}  // namespace cada
