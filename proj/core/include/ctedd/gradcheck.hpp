#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctedd/param_store.hpp"

namespace ctedd {

using ScalarLoss = std::function<double(const ParamStore&)>;
// Must add d(loss)/d(param) into the store's grad buffers.
using GradientFn = std::function<void(ParamStore&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;  // "<entry>[index]"
  std::size_t checked = 0;
  // Per-entry maximum relative error, in store order.
  std::vector<std::pair<std::string, double>> per_entry;

  bool passed(double tolerance) const { return max_relative_error < tolerance; }
  std::vector<std::string> failing_entries(double tolerance) const;
};

// Compares analytic gradients against central differences. The relative
// error per element is |analytic - numeric| / max(1, |numeric|).
// h must lie in [1e-7, 1e-3]. Values are restored before returning; the
// store's grad buffers hold the analytic gradient afterwards.
GradCheckReport finite_diff_check(const ScalarLoss& loss, const GradientFn& gradient, ParamStore& params,
                                  double h = 1e-5);

}  // namespace ctedd
