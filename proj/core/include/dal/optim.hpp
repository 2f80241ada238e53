#pragma once

#include "dal/layers.hpp"

namespace dal {

// w <- w - eta * g
void sgd_step(ParamSet& params, const GradientSet& grads, double eta);

// Per-element AdaGrad: G_i += g_i^2, w_i <- w_i - eta / (sqrt(G_i) + epsilon) * g_i.
struct AdaGradState {
  GradientSet accumulators;
  double eta0 = 0.1;
  double epsilon = 1e-10;

  static AdaGradState for_params(const ParamSet& params, double eta0 = 0.1, double epsilon = 1e-10);

  // Current step size of one parameter entry.
  double effective_rate(std::size_t block, bool bias, std::size_t index) const;
};

void adagrad_step(ParamSet& params, const GradientSet& grads, AdaGradState& state);

// Accumulates src * scale into dst (shapes must agree).
void axpy(GradientSet& dst, const GradientSet& src, double scale);

}  // namespace dal
