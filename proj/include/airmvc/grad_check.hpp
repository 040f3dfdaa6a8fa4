#pragma once

#include "airmvc/layers.hpp"

#include <functional>
#include <span>

namespace airmvc {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares analytic gradients against central finite differences.
///
/// `loss_fn` must evaluate the loss and accumulate gradients into the
/// parameters; gradients are zeroed before the analytic pass. Relative error
/// is |a - n| / max(|a|, |n|, abs_floor). Throws std::runtime_error when the
/// loss is not finite.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::span<Parameter* const> params, double step = 1e-5,
                           double abs_floor = 1e-6);

}  // namespace airmvc
