#pragma once

#include <functional>
#include <vector>

#include "lecb/numerics/parameter.hpp"
#include "lecb/numerics/tape.hpp"

namespace lecb::num {

/// Builds a scalar (1x1) loss on the supplied tape from the current
/// parameter values.
using ScalarFn = std::function<Var(Tape&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients against central differences for every
/// entry of every parameter. Relative error is
/// |analytic - numeric| / max(1, |analytic|).
/// h must lie in [1e-6, 1e-3]; a non-finite loss raises lecb::NumericError.
GradCheckReport grad_check_report(const ScalarFn& f, const std::vector<Parameter*>& params,
                                  double h = 1e-5);

inline double grad_check(const ScalarFn& f, const std::vector<Parameter*>& params,
                         double h = 1e-5) {
  return grad_check_report(f, params, h).max_rel_error;
}

}  // namespace lecb::num
