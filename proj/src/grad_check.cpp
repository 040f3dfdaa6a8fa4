#include "airmvc/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace airmvc {

namespace {

double finite_loss(const std::function<double()>& loss_fn, const char* stage) {
  const double loss = loss_fn();
  if (!std::isfinite(loss)) {
    throw std::runtime_error(std::string("grad_check: non-finite loss during ") + stage);
  }
  return loss;
}

}  // namespace

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::span<Parameter* const> params, double step, double abs_floor) {
  for (auto* p : params) p->zero_grad();
  finite_loss(loss_fn, "analytic pass");

  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto values = p.value.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double plus = finite_loss(loss_fn, "forward perturbation");
      values[i] = saved - step;
      const double minus = finite_loss(loss_fn, "backward perturbation");
      values[i] = saved;

      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[k].values()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_relative_error) {
        report = {rel, p.name, i, a, numeric};
      }
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->grad = analytic[k];
  return report;
}

}  // namespace airmvc
