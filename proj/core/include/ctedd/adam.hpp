#pragma once

#include "ctedd/param_store.hpp"

namespace ctedd {

struct AdamSettings {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over every entry of the store. Gradients are read but
// not cleared; a non-finite gradient aborts with the parameter's name before
// any value is modified.
void adam_step(ParamStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
inline void adam_step(ParamStore& params, const AdamSettings& s) {
  adam_step(params, s.lr, s.beta1, s.beta2, s.eps);
}

}  // namespace ctedd
