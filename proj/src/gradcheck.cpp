#include "cada/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace cada {

GradCheckResult finite_diff_check(const std::function<double()>& forward,
                                  const std::function<void()>& compute_grads,
                                  const std::vector<Parameter*>& params, double eps) {
  if (eps < 1e-7 || eps > 1e-4)
    throw std::invalid_argument("finite_diff_check: eps must be in [1e-7, 1e-4]");
  const double f0 = forward();
  if (forward() != f0)
    throw std::invalid_argument("finite_diff_check: objective is not deterministic");

  compute_grads();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (int i = 0; i < p->value.numel(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double fp = forward();
      p->value[i] = orig - eps;
      const double fm = forward();
      p->value[i] = orig;
      const double num = (fp - fm) / (2.0 * eps);
      const double ana = analytic[pi][i];
      const double denom = std::max(1.0, std::fabs(ana) + std::fabs(num));
      const double rel = std::fabs(ana - num) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = p->name;
        res.worst_index = i;
        res.analytic = ana;
        res.numeric = num;
      }
    }
  }
  return res;
}

}  // namespace cada
