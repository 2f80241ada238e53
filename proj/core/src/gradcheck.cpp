#include "dal/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dal {

namespace {

void perturb_each(Tensor& values, Tensor& grad, double step, const std::function<double()>& eval) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double plus = eval();
    values[i] = saved - step;
    const double minus = eval();
    values[i] = saved;
    grad[i] = (plus - minus) / (2.0 * step);
  }
}

}  // namespace

GradientSet fd_gradient(ParamSet params, const ParamLoss& loss, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  GradientSet grads = zeros_like(params);
  const auto eval = [&] { return loss(params); };
  for (std::size_t b = 0; b < params.size(); ++b) {
    perturb_each(params[b].weights, grads[b].weights, step, eval);
    perturb_each(params[b].bias, grads[b].bias, step, eval);
  }
  return grads;
}

GradientSet fd_gradient(const Network& net, const NetworkLoss& loss, double step) {
  Network probe = net;
  return fd_gradient(net.params,
                     [&](const ParamSet& params) {
                       probe.params = params;
                       return loss(probe);
                     },
                     step);
}

Tensor fd_tensor_gradient(const Tensor& x, const std::function<double(const Tensor&)>& loss,
                          double step) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_tensor_gradient: step must be positive");
  Tensor probe = x;
  Tensor grad = Tensor::zeros_like(x);
  perturb_each(probe, grad, step, [&] { return loss(probe); });
  return grad;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double max_relative_error(const Tensor& a, const Tensor& b, double floor) {
  require_same_shape(a, b, "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i], floor));
  return worst;
}

double max_relative_error(const GradientSet& a, const GradientSet& b, double floor) {
  require_congruent(a, b, "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, max_relative_error(a[i].weights, b[i].weights, floor));
    worst = std::max(worst, max_relative_error(a[i].bias, b[i].bias, floor));
  }
  return worst;
}

}  // namespace dal
