#include "dal/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dal {

void sgd_step(ParamSet& params, const GradientSet& grads, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("sgd_step: learning rate must be positive");
  require_congruent(params, grads, "sgd_step");
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].weights.size(); ++i) params[b].weights[i] -= eta * grads[b].weights[i];
    for (std::size_t i = 0; i < params[b].bias.size(); ++i) params[b].bias[i] -= eta * grads[b].bias[i];
  }
}

AdaGradState AdaGradState::for_params(const ParamSet& params, double eta0, double epsilon) {
  if (!(eta0 > 0.0) || !(epsilon >= 0.0)) throw std::invalid_argument("adagrad: invalid eta0/epsilon");
  return AdaGradState{zeros_like(params), eta0, epsilon};
}

double AdaGradState::effective_rate(std::size_t block, bool bias, std::size_t index) const {
  const Tensor& acc = bias ? accumulators.at(block).bias : accumulators.at(block).weights;
  return eta0 / (std::sqrt(acc[index]) + epsilon);
}

namespace {

void adagrad_tensor(Tensor& w, const Tensor& g, Tensor& acc, double eta0, double epsilon) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g[i];
    acc[i] += gi * gi;
    // A zero gradient leaves the entry untouched even while acc is still 0.
    if (gi != 0.0) w[i] -= eta0 / (std::sqrt(acc[i]) + epsilon) * gi;
  }
}

}  // namespace

void adagrad_step(ParamSet& params, const GradientSet& grads, AdaGradState& state) {
  require_congruent(params, grads, "adagrad_step");
  require_congruent(params, state.accumulators, "adagrad_step (state)");
  for (std::size_t b = 0; b < params.size(); ++b) {
    adagrad_tensor(params[b].weights, grads[b].weights, state.accumulators[b].weights, state.eta0,
                   state.epsilon);
    adagrad_tensor(params[b].bias, grads[b].bias, state.accumulators[b].bias, state.eta0, state.epsilon);
  }
}

void axpy(GradientSet& dst, const GradientSet& src, double scale) {
  require_congruent(dst, src, "axpy");
  for (std::size_t b = 0; b < dst.size(); ++b) {
    for (std::size_t i = 0; i < dst[b].weights.size(); ++i) dst[b].weights[i] += scale * src[b].weights[i];
    for (std::size_t i = 0; i < dst[b].bias.size(); ++i) dst[b].bias[i] += scale * src[b].bias[i];
  }
}

}  // namespace dal
