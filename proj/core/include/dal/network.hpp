#pragma once

#include <cstdint>
#include <functional>

#include "dal/layers.hpp"

namespace dal {

// Layer extents of the two conv-pool + dense + output stack. The standard
// instance maps (history, 83, 83) -> (16,19,19) -> (32,8,8) -> 256 -> actions.
struct Architecture {
  std::size_t history = 2;
  std::size_t input_size = 83;
  std::size_t conv0_maps = 16;
  std::size_t conv0_kernel = 8;
  std::size_t pool0 = 4;
  std::size_t conv1_maps = 32;
  std::size_t conv1_kernel = 4;
  std::size_t pool1 = 2;
  std::size_t hidden = 256;
  std::size_t num_actions = 3;
  Nonlinearity nonlinearity = Nonlinearity::tanh;

  static Architecture standard(std::size_t num_actions, std::size_t history,
                               Nonlinearity nonlinearity = Nonlinearity::tanh);
  // Same layer sequence on a 21x21 input with two maps per conv layer; small
  // enough for finite-difference checks over every parameter.
  static Architecture shrunken(std::size_t num_actions, std::size_t history,
                               Nonlinearity nonlinearity = Nonlinearity::tanh);

  Shape input_shape() const { return {history, input_size, input_size}; }
  std::size_t pooled0_size() const { return (input_size - conv0_kernel + 1) / pool0; }
  std::size_t pooled1_size() const { return (pooled0_size() - conv1_kernel + 1) / pool1; }
  std::size_t flattened_size() const { return conv1_maps * pooled1_size() * pooled1_size(); }

  // Throws std::invalid_argument if the extents do not chain.
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class NetRole : std::uint8_t { q_network = 0, reward_network = 1 };

struct Network {
  Architecture arch;
  ParamSet params;  // conv0, conv1, hidden, output
  NetRole role = NetRole::q_network;
  std::uint64_t config_hash = 0;

  std::size_t parameter_count() const { return dal::parameter_count(params); }
};

// All intermediate values of one forward pass. z* are pre-activations of the
// pooled feature maps / hidden units; a* are their post-activations.
struct ActivationTrace {
  Tensor input;
  Tensor z0, a0;
  std::vector<std::uint8_t> argmax0;
  Tensor z1, a1;
  std::vector<std::uint8_t> argmax1;
  Tensor z2, a2;
  Tensor presoft;
  Tensor probs;
};

ActivationTrace forward(const Network& net, const Tensor& input);

// Just the output scores; skips keeping the trace.
Tensor presoft_scores(const Network& net, const Tensor& input);

// Parameter gradients of a scalar loss whose gradient with respect to the
// pre-softmax scores is `grad_presoft`.
GradientSet backward(const Network& net, const ActivationTrace& trace, const Tensor& grad_presoft);

// Gradient of the same scalar with respect to the network input.
Tensor input_gradient(const Network& net, const ActivationTrace& trace, const Tensor& grad_presoft);

struct BackwardResult {
  GradientSet params;
  Tensor input;
};
BackwardResult backward_full(const Network& net, const ActivationTrace& trace,
                             const Tensor& grad_presoft, bool want_params, bool want_input);

void require_matching_params(const Network& net);

}  // namespace dal
