#include "ctedd/adam.hpp"

#include <cmath>

namespace ctedd {

void adam_step(ParamStore& params, double lr, double beta1, double beta2, double eps) {
  for (const auto& e : params.entries()) {
    if (!e.grad.all_finite()) throw NumericError("adam_step: non-finite gradient for '" + e.name + "'");
  }
  params.increment_step();
  const double t = static_cast<double>(params.step_count());
  const double correction1 = 1.0 - std::pow(beta1, t);
  const double correction2 = 1.0 - std::pow(beta2, t);
  for (auto& e : params.entries()) {
    auto value = e.value.data();
    const auto grad = e.grad.data();
    auto m = e.adam_m.data();
    auto v = e.adam_v.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace ctedd
