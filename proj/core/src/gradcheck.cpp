#include "ctedd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctedd {

std::vector<std::string> GradCheckReport::failing_entries(double tolerance) const {
  std::vector<std::string> names;
  for (const auto& [name, err] : per_entry) {
    if (!(err < tolerance)) names.push_back(name);
  }
  return names;
}

GradCheckReport finite_diff_check(const ScalarLoss& loss, const GradientFn& gradient, ParamStore& params,
                                  double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("finite_diff_check: h must be in [1e-7, 1e-3]");

  params.zero_grad();
  gradient(params);

  GradCheckReport report;
  for (auto& e : params.entries()) {
    double entry_max = 0.0;
    auto values = e.value.data();
    const auto analytic = e.grad.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + h;
      const double plus = loss(params);
      values[i] = original - h;
      const double minus = loss(params);
      values[i] = original;

      const double numeric = (plus - minus) / (2.0 * h);
      double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      if (std::isnan(rel)) rel = std::numeric_limits<double>::infinity();
      ++report.checked;
      entry_max = std::max(entry_max, rel);
      if (report.worst_parameter.empty() || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = e.name + "[" + std::to_string(i) + "]";
      }
    }
    report.per_entry.emplace_back(e.name, entry_max);
  }
  return report;
}

}  // namespace ctedd
