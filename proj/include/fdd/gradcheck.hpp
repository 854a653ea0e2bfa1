#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "fdd/autodiff.hpp"

namespace fdd::num {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-6;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, scale_floor).
  double scale_floor = 1e-4;
  // Entries per parameter tensor to probe (evenly strided); 0 probes all.
  std::size_t max_entries_per_param = 0;
  // Five-point central stencil (error O(step^4)) instead of the two-point one.
  bool fourth_order = false;
};

// Compares reverse-mode gradients of `build` against central differences.
// `build` must be a deterministic function of the tensors in `params`.
GradCheckResult grad_check(const std::function<Var(Binder&)>& build,
                           const std::vector<Tensor*>& params, const GradCheckOptions& opts = {});

}  // namespace fdd::num
