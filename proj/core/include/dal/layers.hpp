#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "dal/tensor.hpp"

namespace dal {

// Weights and biases of one layer.
//   conv:  weights (out_maps, in_maps, kh, kw), bias (out_maps)
//   dense: weights (in, out), bias (out)
// The bias may be empty for bias-free parameter blocks (e.g. RICA filters).
struct LayerParams {
  Tensor weights;
  Tensor bias;

  std::size_t parameter_count() const { return weights.size() + bias.size(); }
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// Per-layer gradients, shape-congruent with the parameter list they came from.
using GradientSet = std::vector<LayerParams>;
using ParamSet = std::vector<LayerParams>;

GradientSet zeros_like(const ParamSet& params);
void require_congruent(const ParamSet& params, const GradientSet& grads, const char* what);
std::size_t parameter_count(const ParamSet& params);

enum class Nonlinearity : std::uint8_t { logistic = 0, tanh = 1, rectifier = 2 };
enum class LossKind : std::uint8_t { cross_entropy = 0, squared_error = 1 };

std::string_view to_string(Nonlinearity kind);
Nonlinearity parse_nonlinearity(std::string_view name);
std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

// ---------------------------------------------------------------- convolution

// Valid-mode, unit-stride 2-D convolution (cross-correlation form, as in the
// usual CNN convention): out[k][y][x] = b[k] + sum_{c,i,j} w[k][c][i][j] * in[c][y+i][x+j].
Tensor conv2d_valid(const Tensor& input, const LayerParams& params);

struct ConvGradients {
  LayerParams params;
  Tensor input;  // empty unless requested
};

// Gradients of a scalar loss through conv2d_valid given dL/d(output).
// Zero cells of grad_output are skipped, which makes the pass cheap after
// max-pool routing.
ConvGradients conv2d_valid_backward(const Tensor& input, const LayerParams& params,
                                    const Tensor& grad_output, bool want_input_grad);

// ---------------------------------------------------------------- pooling

struct PoolResult {
  Tensor output;
  // Winning cell per output element, as a row-major offset inside its window.
  std::vector<std::uint8_t> argmax;
};

// Non-overlapping max pooling; ties go to the first cell in row-major window order.
PoolResult maxpool(const Tensor& input, std::size_t ph, std::size_t pw);

Tensor maxpool_backward(const Tensor& grad_output, const std::vector<std::uint8_t>& argmax,
                        const Shape& input_shape, std::size_t ph, std::size_t pw);

// ---------------------------------------------------------------- dense

Tensor dense(const Tensor& input, const LayerParams& params);

struct DenseGradients {
  LayerParams params;
  Tensor input;
};

DenseGradients dense_backward(const Tensor& input, const LayerParams& params,
                              const Tensor& grad_output);

// ---------------------------------------------------------------- pointwise

double activate(double x, Nonlinearity kind);
Tensor activation(const Tensor& x, Nonlinearity kind);
// dL/dx from dL/dy, expressed through the post-activation value y.
Tensor activation_backward(const Tensor& post, const Tensor& grad_post, Nonlinearity kind);

Tensor softmax(const Tensor& scores);

inline constexpr double kLogFloor = 1e-12;

// cross_entropy: -log max(pred[target], 1e-12) on a probability vector.
// squared_error: sum_a (pred[a] - [a == target])^2 on any real vector.
double loss(const Tensor& pred, std::size_t target, LossKind kind);

// dL/d(presoft) for the loss applied to softmax(presoft).
Tensor loss_gradient_presoft(const Tensor& presoft, std::size_t target, LossKind kind);

}  // namespace dal
