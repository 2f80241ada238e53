#include "dal/rica.hpp"

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "dal/optim.hpp"

namespace dal {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

RicaEvaluation rica_objective(const RicaModel& model, const Tensor& patches) {
  if (model.weights.rank() != 2) throw std::invalid_argument("rica: weights must be a matrix");
  if (patches.rank() != 2 || patches.dim(1) != model.patch_dim()) {
    throw std::invalid_argument("rica: patches " + shape_string(patches.shape()) +
                                " do not match patch_dim " + std::to_string(model.patch_dim()));
  }
  const auto n = static_cast<Eigen::Index>(patches.dim(0));
  const auto k = static_cast<Eigen::Index>(model.filters());
  const auto d = static_cast<Eigen::Index>(model.patch_dim());
  ConstMatrixMap w(model.weights.raw(), k, d);
  ConstMatrixMap x(patches.raw(), n, d);  // one patch per row

  const RowMatrix u = x * w.transpose();        // (n, k): W x per patch
  const RowMatrix r = u * w - x;                // (n, d): W^T W x - x
  const RowMatrix s = u.unaryExpr([](double v) { return sign(v); });

  RicaEvaluation out;
  out.value = (model.lambda * u.cwiseAbs().sum() + 0.5 * r.squaredNorm()) / static_cast<double>(n);
  out.grad = Tensor::zeros_like(model.weights);
  MatrixMap g(out.grad.raw(), k, d);
  // d/dW: lambda sign(u) x^T + u r^T + (W r) x^T, summed over patches.
  g.noalias() = (model.lambda * s + r * w.transpose()).transpose() * x;
  g.noalias() += u.transpose() * r;
  g /= static_cast<double>(n);
  return out;
}

RicaTrainResult rica_train_from(RicaModel model, const Tensor& patches, std::size_t steps, double eta) {
  if (steps < 1) throw std::invalid_argument("rica_train: steps must be >= 1");
  ParamSet params{{model.weights, Tensor()}};
  AdaGradState state = AdaGradState::for_params(params, eta);
  RicaTrainResult result;
  result.objective.reserve(steps + 1);
  for (std::size_t t = 0; t < steps; ++t) {
    model.weights = params[0].weights;
    RicaEvaluation eval = rica_objective(model, patches);
    result.objective.push_back(eval.value);
    adagrad_step(params, {{std::move(eval.grad), Tensor()}}, state);
  }
  model.weights = params[0].weights;
  result.objective.push_back(rica_objective(model, patches).value);
  result.model = std::move(model);
  return result;
}

RicaTrainResult rica_train(const Tensor& patches, std::size_t n_filters, double lambda, std::size_t steps,
                           const RicaOptions& options) {
  if (patches.rank() != 2) throw std::invalid_argument("rica_train: patches must be (N, patch_dim)");
  if (n_filters == 0) throw std::invalid_argument("rica_train: need at least one filter");
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> init(-options.init_scale, options.init_scale);
  RicaModel model{Tensor({n_filters, patches.dim(1)}), lambda};
  for (double& v : model.weights.data()) v = init(rng);
  return rica_train_from(std::move(model), patches, steps, options.eta);
}

double ica_orthonormality_residual(const RicaModel& model) {
  const auto k = static_cast<Eigen::Index>(model.filters());
  const auto d = static_cast<Eigen::Index>(model.patch_dim());
  ConstMatrixMap w(model.weights.raw(), k, d);
  return (w * w.transpose() - RowMatrix::Identity(k, k)).norm();
}

Tensor extract_patches(const std::vector<Tensor>& frames, std::size_t count, std::size_t size,
                       std::uint64_t seed) {
  if (frames.empty()) throw std::invalid_argument("extract_patches: no frames");
  for (const Tensor& f : frames) {
    if (f.rank() != 2 || f.dim(0) < size || f.dim(1) < size) {
      throw std::invalid_argument("extract_patches: frame " + shape_string(f.shape()) +
                                  " cannot hold a " + std::to_string(size) + "x" + std::to_string(size) +
                                  " patch");
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, frames.size() - 1);
  Tensor out({count, size * size});
  for (std::size_t n = 0; n < count; ++n) {
    const Tensor& f = frames[pick(rng)];
    std::uniform_int_distribution<std::size_t> row(0, f.dim(0) - size);
    std::uniform_int_distribution<std::size_t> col(0, f.dim(1) - size);
    const std::size_t y = row(rng), x = col(rng);
    for (std::size_t i = 0; i < size; ++i) {
      for (std::size_t j = 0; j < size; ++j) out.at(n, i * size + j) = f.at(y + i, x + j);
    }
  }
  return out;
}

Tensor rica_filters_to_conv(const RicaModel& model, std::size_t size) {
  if (model.patch_dim() != size * size) {
    throw std::invalid_argument("rica filters of length " + std::to_string(model.patch_dim()) +
                                " cannot form " + std::to_string(size) + "x" + std::to_string(size) +
                                " kernels");
  }
  Tensor out({model.filters(), 1, size, size});
  for (std::size_t k = 0; k < model.filters(); ++k) {
    for (std::size_t i = 0; i < size; ++i) {
      for (std::size_t j = 0; j < size; ++j) {
        out[(k * size + i) * size + j] = model.weights.at(k, j * size + i);
      }
    }
  }
  return out;
}

}  // namespace dal
