#include "dal/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dal {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

[[noreturn]] void shape_error(const std::string& what) { throw std::invalid_argument(what); }

struct ConvGeometry {
  std::size_t in_maps, height, width;
  std::size_t out_maps, kh, kw;
  std::size_t out_h, out_w;
};

ConvGeometry conv_geometry(const Tensor& input, const LayerParams& params) {
  if (input.rank() != 3) {
    shape_error("conv2d: input must be (maps, H, W), got " + shape_string(input.shape()));
  }
  const Tensor& w = params.weights;
  if (w.rank() != 4) {
    shape_error("conv2d: weights must be (out, in, kh, kw), got " + shape_string(w.shape()));
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), w.dim(0), w.dim(2), w.dim(3), 0, 0};
  if (w.dim(1) != g.in_maps) {
    shape_error("conv2d: weights expect " + std::to_string(w.dim(1)) + " input maps, input has " +
                std::to_string(g.in_maps));
  }
  if (g.kh > g.height || g.kw > g.width) {
    shape_error("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                " larger than input " + std::to_string(g.height) + "x" + std::to_string(g.width));
  }
  if (params.bias.size() != g.out_maps) {
    shape_error("conv2d: bias length " + std::to_string(params.bias.size()) + " != out maps " +
                std::to_string(g.out_maps));
  }
  g.out_h = g.height - g.kh + 1;
  g.out_w = g.width - g.kw + 1;
  return g;
}

// Scatter form: each nonzero input pixel adds its weighted kernel footprint.
// Accumulates into a (position, map) buffer so the innermost loop is contiguous.
Tensor conv_scatter(const Tensor& input, const LayerParams& params, const ConvGeometry& g) {
  const std::size_t taps = g.in_maps * g.kh * g.kw;
  std::vector<double> wt(taps * g.out_maps);
  for (std::size_t k = 0; k < g.out_maps; ++k) {
    for (std::size_t t = 0; t < taps; ++t) wt[t * g.out_maps + k] = params.weights[k * taps + t];
  }
  const std::size_t positions = g.out_h * g.out_w;
  std::vector<double> acc(positions * g.out_maps, 0.0);
  const double* in = input.raw();
  for (std::size_t c = 0; c < g.in_maps; ++c) {
    for (std::size_t y = 0; y < g.height; ++y) {
      const std::size_t i_lo = y + 1 > g.out_h ? y + 1 - g.out_h : 0;
      const std::size_t i_hi = std::min(g.kh - 1, y);
      for (std::size_t x = 0; x < g.width; ++x) {
        const double v = in[(c * g.height + y) * g.width + x];
        if (v == 0.0) continue;
        const std::size_t j_lo = x + 1 > g.out_w ? x + 1 - g.out_w : 0;
        const std::size_t j_hi = std::min(g.kw - 1, x);
        for (std::size_t i = i_lo; i <= i_hi; ++i) {
          for (std::size_t j = j_lo; j <= j_hi; ++j) {
            double* dst = acc.data() + ((y - i) * g.out_w + (x - j)) * g.out_maps;
            const double* src = wt.data() + ((c * g.kh + i) * g.kw + j) * g.out_maps;
            for (std::size_t k = 0; k < g.out_maps; ++k) dst[k] += src[k] * v;
          }
        }
      }
    }
  }
  Tensor out({g.out_maps, g.out_h, g.out_w});
  for (std::size_t k = 0; k < g.out_maps; ++k) {
    const double b = params.bias[k];
    double* row = out.raw() + k * positions;
    for (std::size_t p = 0; p < positions; ++p) row[p] = acc[p * g.out_maps + k] + b;
  }
  return out;
}

Tensor conv_im2col(const Tensor& input, const LayerParams& params, const ConvGeometry& g) {
  const std::size_t taps = g.in_maps * g.kh * g.kw;
  const std::size_t positions = g.out_h * g.out_w;
  RowMatrix cols(taps, positions);
  const double* in = input.raw();
  for (std::size_t c = 0; c < g.in_maps; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* dst = cols.data() + ((c * g.kh + i) * g.kw + j) * positions;
        for (std::size_t y = 0; y < g.out_h; ++y) {
          const double* src = in + (c * g.height + y + i) * g.width + j;
          std::copy(src, src + g.out_w, dst + y * g.out_w);
        }
      }
    }
  }
  Tensor out({g.out_maps, g.out_h, g.out_w});
  MatrixMap result(out.raw(), static_cast<Eigen::Index>(g.out_maps),
                   static_cast<Eigen::Index>(positions));
  ConstMatrixMap w(params.weights.raw(), static_cast<Eigen::Index>(g.out_maps),
                   static_cast<Eigen::Index>(taps));
  result.noalias() = w * cols;
  for (std::size_t k = 0; k < g.out_maps; ++k) result.row(static_cast<Eigen::Index>(k)).array() += params.bias[k];
  return out;
}

}  // namespace

GradientSet zeros_like(const ParamSet& params) {
  GradientSet grads;
  grads.reserve(params.size());
  for (const auto& p : params) {
    grads.push_back({p.weights.empty() ? Tensor() : Tensor::zeros_like(p.weights),
                     p.bias.empty() ? Tensor() : Tensor::zeros_like(p.bias)});
  }
  return grads;
}

void require_congruent(const ParamSet& params, const GradientSet& grads, const char* what) {
  if (params.size() != grads.size()) {
    shape_error(std::string(what) + ": " + std::to_string(params.size()) + " parameter blocks vs " +
                std::to_string(grads.size()) + " gradient blocks");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].weights.shape() != grads[i].weights.shape() ||
        params[i].bias.shape() != grads[i].bias.shape()) {
      shape_error(std::string(what) + ": block " + std::to_string(i) + " shape mismatch " +
                  shape_string(params[i].weights.shape()) + " vs " +
                  shape_string(grads[i].weights.shape()));
    }
  }
}

std::size_t parameter_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.parameter_count();
  return n;
}

std::string_view to_string(Nonlinearity kind) {
  switch (kind) {
    case Nonlinearity::logistic: return "logistic";
    case Nonlinearity::tanh: return "tanh";
    case Nonlinearity::rectifier: return "rectifier";
  }
  return "?";
}

Nonlinearity parse_nonlinearity(std::string_view name) {
  if (name == "logistic" || name == "sigmoid") return Nonlinearity::logistic;
  if (name == "tanh") return Nonlinearity::tanh;
  if (name == "rectifier" || name == "relu") return Nonlinearity::rectifier;
  throw std::invalid_argument("unknown nonlinearity '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) {
  return kind == LossKind::cross_entropy ? "cross_entropy" : "squared_error";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "cross_entropy" || name == "nll") return LossKind::cross_entropy;
  if (name == "squared_error" || name == "mse") return LossKind::squared_error;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

Tensor conv2d_valid(const Tensor& input, const LayerParams& params) {
  const ConvGeometry g = conv_geometry(input, params);
  const auto nonzero = static_cast<std::size_t>(
      std::count_if(input.data().begin(), input.data().end(), [](double v) { return v != 0.0; }));
  // Background-stripped frames are mostly zero; the scatter form only pays for
  // the nonzero pixels.
  if (nonzero * 5 < input.size()) return conv_scatter(input, params, g);
  return conv_im2col(input, params, g);
}

ConvGradients conv2d_valid_backward(const Tensor& input, const LayerParams& params,
                                    const Tensor& grad_output, bool want_input_grad) {
  const ConvGeometry g = conv_geometry(input, params);
  const Shape expected{g.out_maps, g.out_h, g.out_w};
  if (grad_output.shape() != expected) {
    shape_error("conv2d backward: grad_output " + shape_string(grad_output.shape()) +
                " != output shape " + shape_string(expected));
  }
  ConvGradients out;
  out.params.weights = Tensor::zeros_like(params.weights);
  out.params.bias = Tensor::zeros_like(params.bias);
  if (want_input_grad) out.input = Tensor::zeros_like(input);

  const double* in = input.raw();
  const double* w = params.weights.raw();
  double* gw = out.params.weights.raw();
  double* gin = want_input_grad ? out.input.raw() : nullptr;
  const std::size_t kernel = g.kh * g.kw;
  for (std::size_t k = 0; k < g.out_maps; ++k) {
    double bias_grad = 0.0;
    for (std::size_t y = 0; y < g.out_h; ++y) {
      for (std::size_t x = 0; x < g.out_w; ++x) {
        const double go = grad_output[(k * g.out_h + y) * g.out_w + x];
        if (go == 0.0) continue;
        bias_grad += go;
        for (std::size_t c = 0; c < g.in_maps; ++c) {
          double* gw_block = gw + (k * g.in_maps + c) * kernel;
          const double* w_block = w + (k * g.in_maps + c) * kernel;
          for (std::size_t i = 0; i < g.kh; ++i) {
            const std::size_t offset = (c * g.height + y + i) * g.width + x;
            const double* in_row = in + offset;
            double* gw_row = gw_block + i * g.kw;
            for (std::size_t j = 0; j < g.kw; ++j) gw_row[j] += go * in_row[j];
            if (gin) {
              double* gin_row = gin + offset;
              const double* w_row = w_block + i * g.kw;
              for (std::size_t j = 0; j < g.kw; ++j) gin_row[j] += go * w_row[j];
            }
          }
        }
      }
    }
    out.params.bias[k] = bias_grad;
  }
  return out;
}

PoolResult maxpool(const Tensor& input, std::size_t ph, std::size_t pw) {
  if (input.rank() != 3) shape_error("maxpool: input must be (maps, H, W), got " + shape_string(input.shape()));
  if (ph == 0 || pw == 0 || ph * pw > 256) shape_error("maxpool: invalid window size");
  const std::size_t maps = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % ph != 0 || w % pw != 0) {
    shape_error("maxpool: window " + std::to_string(ph) + "x" + std::to_string(pw) +
                " does not divide " + std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t oh = h / ph, ow = w / pw;
  PoolResult result{Tensor({maps, oh, ow}), std::vector<std::uint8_t>(maps * oh * ow)};
  for (std::size_t m = 0; m < maps; ++m) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best_cell = 0;
        double best = input.at(m, y * ph, x * pw);
        for (std::size_t i = 0; i < ph; ++i) {
          for (std::size_t j = 0; j < pw; ++j) {
            const double v = input.at(m, y * ph + i, x * pw + j);
            if (v > best) {
              best = v;
              best_cell = i * pw + j;
            }
          }
        }
        const std::size_t o = (m * oh + y) * ow + x;
        result.output[o] = best;
        result.argmax[o] = static_cast<std::uint8_t>(best_cell);
      }
    }
  }
  return result;
}

Tensor maxpool_backward(const Tensor& grad_output, const std::vector<std::uint8_t>& argmax,
                        const Shape& input_shape, std::size_t ph, std::size_t pw) {
  if (input_shape.size() != 3 || grad_output.rank() != 3 ||
      grad_output.dim(0) != input_shape[0] || grad_output.dim(1) * ph != input_shape[1] ||
      grad_output.dim(2) * pw != input_shape[2] || argmax.size() != grad_output.size()) {
    shape_error("maxpool backward: grad " + shape_string(grad_output.shape()) +
                " incompatible with input " + shape_string(input_shape));
  }
  Tensor grad_input(input_shape);
  const std::size_t oh = grad_output.dim(1), ow = grad_output.dim(2);
  for (std::size_t m = 0; m < input_shape[0]; ++m) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t o = (m * oh + y) * ow + x;
        const std::size_t cell = argmax[o];
        grad_input.at(m, y * ph + cell / pw, x * pw + cell % pw) += grad_output[o];
      }
    }
  }
  return grad_input;
}

Tensor dense(const Tensor& input, const LayerParams& params) {
  const Tensor& w = params.weights;
  if (w.rank() != 2 || input.size() != w.dim(0) || params.bias.size() != w.dim(1)) {
    shape_error("dense: input of " + std::to_string(input.size()) + " values vs weights " +
                shape_string(w.shape()) + " and bias " + shape_string(params.bias.shape()));
  }
  const auto n = static_cast<Eigen::Index>(w.dim(0));
  const auto m = static_cast<Eigen::Index>(w.dim(1));
  Tensor out = params.bias;
  VectorMap(out.raw(), m).noalias() +=
      ConstMatrixMap(w.raw(), n, m).transpose() * ConstVectorMap(input.raw(), n);
  return out;
}

DenseGradients dense_backward(const Tensor& input, const LayerParams& params,
                              const Tensor& grad_output) {
  const Tensor& w = params.weights;
  if (w.rank() != 2 || input.size() != w.dim(0) || grad_output.size() != w.dim(1)) {
    shape_error("dense backward: shapes do not match weights " + shape_string(w.shape()));
  }
  const auto n = static_cast<Eigen::Index>(w.dim(0));
  const auto m = static_cast<Eigen::Index>(w.dim(1));
  DenseGradients out{{Tensor::zeros_like(w), grad_output.reshaped({w.dim(1)})},
                     Tensor::zeros_like(input)};
  ConstVectorMap x(input.raw(), n);
  ConstVectorMap g(grad_output.raw(), m);
  MatrixMap(out.params.weights.raw(), n, m).noalias() = x * g.transpose();
  VectorMap(out.input.raw(), n).noalias() = ConstMatrixMap(w.raw(), n, m) * g;
  return out;
}

double activate(double x, Nonlinearity kind) {
  switch (kind) {
    case Nonlinearity::logistic: return 1.0 / (1.0 + std::exp(-x));
    case Nonlinearity::tanh: return std::tanh(x);
    case Nonlinearity::rectifier: return x > 0.0 ? x : 0.0;
  }
  return x;
}

Tensor activation(const Tensor& x, Nonlinearity kind) {
  Tensor y = x;
  for (double& v : y.data()) v = activate(v, kind);
  return y;
}

Tensor activation_backward(const Tensor& post, const Tensor& grad_post, Nonlinearity kind) {
  require_same_shape(post, grad_post, "activation backward");
  Tensor grad = grad_post;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double y = post[i];
    switch (kind) {
      case Nonlinearity::logistic: grad[i] *= y * (1.0 - y); break;
      case Nonlinearity::tanh: grad[i] *= 1.0 - y * y; break;
      case Nonlinearity::rectifier: grad[i] = y > 0.0 ? grad[i] : 0.0; break;
    }
  }
  return grad;
}

Tensor softmax(const Tensor& scores) {
  if (scores.empty()) return scores;
  Tensor out = scores;
  const double top = *std::max_element(out.data().begin(), out.data().end());
  double total = 0.0;
  for (double& v : out.data()) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : out.data()) v /= total;
  return out;
}

double loss(const Tensor& pred, std::size_t target, LossKind kind) {
  if (target >= pred.size()) {
    throw std::invalid_argument("loss: target " + std::to_string(target) + " out of range for " +
                                std::to_string(pred.size()) + " outputs");
  }
  if (kind == LossKind::cross_entropy) return -std::log(std::max(pred[target], kLogFloor));
  double total = 0.0;
  for (std::size_t a = 0; a < pred.size(); ++a) {
    const double d = pred[a] - (a == target ? 1.0 : 0.0);
    total += d * d;
  }
  return total;
}

Tensor loss_gradient_presoft(const Tensor& presoft, std::size_t target, LossKind kind) {
  if (target >= presoft.size()) {
    throw std::invalid_argument("loss gradient: target " + std::to_string(target) + " out of range");
  }
  Tensor p = softmax(presoft);
  if (kind == LossKind::cross_entropy) {
    p[target] -= 1.0;
    return p;
  }
  // Chain 2(p - y) through the softmax Jacobian diag(p) - p p^T.
  Tensor d = p;
  double dot = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    d[a] = 2.0 * (p[a] - (a == target ? 1.0 : 0.0));
    dot += p[a] * d[a];
  }
  Tensor grad = p;
  for (std::size_t a = 0; a < p.size(); ++a) grad[a] = p[a] * (d[a] - dot);
  return grad;
}

}  // namespace dal
