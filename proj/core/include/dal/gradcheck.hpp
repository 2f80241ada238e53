#pragma once

#include <functional>

#include "dal/network.hpp"

namespace dal {

using ParamLoss = std::function<double(const ParamSet&)>;
using NetworkLoss = std::function<double(const Network&)>;

// Central differences (L(p + h) - L(p - h)) / 2h for every parameter entry.
// Meant as a test oracle for parameter sets up to ~1e4 entries.
GradientSet fd_gradient(ParamSet params, const ParamLoss& loss, double step);
GradientSet fd_gradient(const Network& net, const NetworkLoss& loss, double step);

// Central differences of loss(x) over selected entries of a tensor.
Tensor fd_tensor_gradient(const Tensor& x, const std::function<double(const Tensor&)>& loss,
                          double step);

// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero entries from
// producing meaningless ratios out of round-off.
double relative_error(double a, double b, double floor = 1e-6);
double max_relative_error(const GradientSet& a, const GradientSet& b, double floor = 1e-6);
double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6);

}  // namespace dal
