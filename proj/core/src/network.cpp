#include "dal/network.hpp"

#include <stdexcept>
#include <string>

namespace dal {

Architecture Architecture::standard(std::size_t num_actions, std::size_t history,
                                    Nonlinearity nonlinearity) {
  Architecture arch;
  arch.num_actions = num_actions;
  arch.history = history;
  arch.nonlinearity = nonlinearity;
  return arch;
}

Architecture Architecture::shrunken(std::size_t num_actions, std::size_t history,
                                    Nonlinearity nonlinearity) {
  Architecture arch;
  arch.history = history;
  arch.input_size = 21;
  arch.conv0_maps = 2;
  arch.conv0_kernel = 6;
  arch.pool0 = 4;
  arch.conv1_maps = 2;
  arch.conv1_kernel = 3;
  arch.pool1 = 2;
  arch.hidden = 4;
  arch.num_actions = num_actions;
  arch.nonlinearity = nonlinearity;
  return arch;
}

void Architecture::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("architecture: " + why); };
  if (history < 1 || history > 4) fail("history must be in 1..4, got " + std::to_string(history));
  if (num_actions < 2) fail("need at least two actions");
  if (conv0_maps == 0 || conv1_maps == 0 || hidden == 0) fail("layer widths must be positive");
  if (conv0_kernel == 0 || conv0_kernel > input_size) fail("first kernel does not fit the input");
  const std::size_t c0 = input_size - conv0_kernel + 1;
  if (pool0 == 0 || c0 % pool0 != 0) fail("first pool does not divide " + std::to_string(c0));
  const std::size_t p0 = c0 / pool0;
  if (conv1_kernel == 0 || conv1_kernel > p0) fail("second kernel does not fit the pooled map");
  const std::size_t c1 = p0 - conv1_kernel + 1;
  if (pool1 == 0 || c1 % pool1 != 0) fail("second pool does not divide " + std::to_string(c1));
}

void require_matching_params(const Network& net) {
  const Architecture& a = net.arch;
  const std::vector<Shape> expected_w{
      {a.conv0_maps, a.history, a.conv0_kernel, a.conv0_kernel},
      {a.conv1_maps, a.conv0_maps, a.conv1_kernel, a.conv1_kernel},
      {a.flattened_size(), a.hidden},
      {a.hidden, a.num_actions}};
  const std::vector<Shape> expected_b{{a.conv0_maps}, {a.conv1_maps}, {a.hidden}, {a.num_actions}};
  if (net.params.size() != 4) {
    throw std::invalid_argument("network must have 4 parameter blocks, has " +
                                std::to_string(net.params.size()));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (net.params[i].weights.shape() != expected_w[i] || net.params[i].bias.shape() != expected_b[i]) {
      throw std::invalid_argument("network layer " + std::to_string(i) + " has weights " +
                                  shape_string(net.params[i].weights.shape()) + ", expected " +
                                  shape_string(expected_w[i]));
    }
  }
}

namespace {

void check_input(const Network& net, const Tensor& input) {
  if (input.shape() != net.arch.input_shape()) {
    throw std::invalid_argument("network input " + shape_string(input.shape()) + " != expected " +
                                shape_string(net.arch.input_shape()));
  }
}

}  // namespace

ActivationTrace forward(const Network& net, const Tensor& input) {
  check_input(net, input);
  const Architecture& a = net.arch;
  ActivationTrace t;
  t.input = input;

  // Per-map bias and a monotone nonlinearity both commute with max pooling,
  // so the nonlinearity is applied to the smaller pooled map.
  PoolResult p0 = maxpool(conv2d_valid(input, net.params[0]), a.pool0, a.pool0);
  t.z0 = std::move(p0.output);
  t.argmax0 = std::move(p0.argmax);
  t.a0 = activation(t.z0, a.nonlinearity);

  PoolResult p1 = maxpool(conv2d_valid(t.a0, net.params[1]), a.pool1, a.pool1);
  t.z1 = std::move(p1.output);
  t.argmax1 = std::move(p1.argmax);
  t.a1 = activation(t.z1, a.nonlinearity);

  t.z2 = dense(t.a1.reshaped({t.a1.size()}), net.params[2]);
  t.a2 = activation(t.z2, a.nonlinearity);
  t.presoft = dense(t.a2, net.params[3]);
  t.probs = softmax(t.presoft);
  return t;
}

Tensor presoft_scores(const Network& net, const Tensor& input) {
  return forward(net, input).presoft;
}

BackwardResult backward_full(const Network& net, const ActivationTrace& trace,
                             const Tensor& grad_presoft, bool want_params, bool want_input) {
  const Architecture& a = net.arch;
  if (trace.input.shape() != a.input_shape() || trace.a2.size() != a.hidden ||
      trace.presoft.size() != a.num_actions ||
      trace.a1.shape() != Shape{a.conv1_maps, a.pooled1_size(), a.pooled1_size()}) {
    throw std::invalid_argument("activation trace does not belong to this network");
  }
  if (grad_presoft.size() != a.num_actions) {
    throw std::invalid_argument("output gradient has " + std::to_string(grad_presoft.size()) +
                                " entries, network has " + std::to_string(a.num_actions) + " outputs");
  }
  BackwardResult result;
  if (want_params) result.params.resize(4);

  DenseGradients out = dense_backward(trace.a2, net.params[3], grad_presoft);
  if (want_params) result.params[3] = std::move(out.params);

  Tensor delta2 = activation_backward(trace.a2, out.input, a.nonlinearity);
  const Tensor flat1 = trace.a1.reshaped({trace.a1.size()});
  DenseGradients hidden = dense_backward(flat1, net.params[2], delta2);
  if (want_params) result.params[2] = std::move(hidden.params);

  Tensor delta1 = activation_backward(trace.a1, hidden.input.reshaped(trace.a1.shape()), a.nonlinearity);
  const std::size_t c1 = a.pooled0_size() - a.conv1_kernel + 1;
  Tensor grad_conv1 = maxpool_backward(delta1, trace.argmax1, {a.conv1_maps, c1, c1}, a.pool1, a.pool1);
  ConvGradients conv1 = conv2d_valid_backward(trace.a0, net.params[1], grad_conv1, true);
  if (want_params) result.params[1] = std::move(conv1.params);

  Tensor delta0 = activation_backward(trace.a0, conv1.input, a.nonlinearity);
  const std::size_t c0 = a.input_size - a.conv0_kernel + 1;
  Tensor grad_conv0 = maxpool_backward(delta0, trace.argmax0, {a.conv0_maps, c0, c0}, a.pool0, a.pool0);
  ConvGradients conv0 = conv2d_valid_backward(trace.input, net.params[0], grad_conv0, want_input);
  if (want_params) result.params[0] = std::move(conv0.params);
  if (want_input) result.input = std::move(conv0.input);
  return result;
}

GradientSet backward(const Network& net, const ActivationTrace& trace, const Tensor& grad_presoft) {
  return backward_full(net, trace, grad_presoft, true, false).params;
}

Tensor input_gradient(const Network& net, const ActivationTrace& trace, const Tensor& grad_presoft) {
  return backward_full(net, trace, grad_presoft, false, true).input;
}

}  // namespace dal
