#include "fdd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace fdd::num {

GradCheckResult grad_check(const std::function<Var(Binder&)>& build,
                           const std::vector<Tensor*>& params, const GradCheckOptions& opts) {
  std::vector<Tensor> analytic;
  {
    Binder b;
    for (Tensor* p : params) b.train(*p);
    Var loss = build(b);
    backward(loss);
    // A parameter the loss never reached has a zero gradient.
    for (const auto& e : b.trainables())
      analytic.push_back(e.leaf->grad.empty() ? Tensor(e.tensor->shape(), 0.0) : e.leaf->grad);
  }

  auto eval = [&] {
    Binder b;
    return build(b)->value.item();
  };

  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const std::size_t n = p.size();
    const std::size_t stride =
        (opts.max_entries_per_param == 0 || n <= opts.max_entries_per_param)
            ? 1
            : (n + opts.max_entries_per_param - 1) / opts.max_entries_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = p[i];
      auto at = [&](double offset) {
        p[i] = orig + offset;
        const double f = eval();
        p[i] = orig;
        return f;
      };
      const double h = opts.step;
      const double d1 = at(h) - at(-h);
      const double numeric =
          opts.fourth_order ? (8.0 * d1 - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h) : d1 / (2.0 * h);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), opts.scale_floor});
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = k;
        res.worst_index = i;
      }
      ++res.checked;
    }
  }
  return res;
}

}  // namespace fdd::num
