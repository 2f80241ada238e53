#pragma once

#include <cstdint>
#include <vector>

#include "dal/tensor.hpp"

namespace dal {

// Reconstruction ICA: min_W  lambda * |Wx|_1 + 1/2 |W^T W x - x|^2, averaged
// over patches x. Rows of W are filters of length patch_dim.
struct RicaModel {
  Tensor weights;  // (n_filters, patch_dim)
  double lambda = 1.0;

  std::size_t filters() const { return weights.dim(0); }
  std::size_t patch_dim() const { return weights.dim(1); }
};

struct RicaEvaluation {
  double value = 0.0;
  Tensor grad;  // same shape as weights; L1 subgradient uses sign(0) = 0
};

RicaEvaluation rica_objective(const RicaModel& model, const Tensor& patches);

struct RicaOptions {
  double eta = 0.02;         // AdaGrad base rate
  double init_scale = 0.1;   // initial weights ~ U(-init_scale, init_scale)
  std::uint64_t seed = 0;
};

struct RicaTrainResult {
  RicaModel model;
  std::vector<double> objective;  // objective[t] before step t, plus the final value
};

RicaTrainResult rica_train(const Tensor& patches, std::size_t n_filters, double lambda, std::size_t steps,
                           const RicaOptions& options = {});
// Continues from an existing model (used when the starting point matters).
RicaTrainResult rica_train_from(RicaModel model, const Tensor& patches, std::size_t steps, double eta);

// Frobenius norm of W W^T - I.
double ica_orthonormality_residual(const RicaModel& model);

// `count` uniformly sampled size x size windows from (H, W) frames, flattened
// row-major into a (count, size*size) matrix.
Tensor extract_patches(const std::vector<Tensor>& frames, std::size_t count, std::size_t size,
                       std::uint64_t seed);

// RICA rows as first-layer conv filters (n_filters, 1, size, size). Each row
// is reshaped to size x size and transposed.
Tensor rica_filters_to_conv(const RicaModel& model, std::size_t size);

}  // namespace dal
