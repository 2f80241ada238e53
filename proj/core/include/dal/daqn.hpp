#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "dal/envs.hpp"
#include "dal/network.hpp"
#include "dal/optim.hpp"
#include "dal/trajectory.hpp"

namespace dal {

// Uniform +-sqrt(6 / (fan_in + fan_out)) weights and zero biases. Conv fan_out
// counts the pooled receptive field: out_maps * kh * kw / pool^2. Optional
// first-layer filters (n_maps, 1, k, k) replace the conv0 weights and require
// a single-frame input.
Network build_network(const Architecture& arch, std::uint64_t seed, const Tensor* init_filters = nullptr);
Network build(std::size_t num_actions, std::size_t history, Nonlinearity nonlinearity, std::uint64_t seed,
              const Tensor* init_filters = nullptr);

struct QScores {
  Tensor presoft;
  Tensor probs;
};

QScores q_scores(const Network& net, const Tensor& state);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_lowest(const Tensor& values);
Action greedy_action(const Network& net, const Tensor& state);

// Mean loss over a batch of (state, target action) pairs and its parameter
// gradient.
struct BatchGradient {
  double loss = 0.0;
  std::size_t errors = 0;  // greedy prediction != target, before the update
  GradientSet grads;
};
BatchGradient classification_gradient(const Network& net, const std::vector<Tensor>& states,
                                      const std::vector<std::size_t>& targets, LossKind kind);

struct TrainOptions {
  std::size_t batch_size = 32;
  LossKind loss = LossKind::cross_entropy;
};

struct EpochStats {
  double train_error = 0.0;  // misclassification over the trained samples, as seen during the epoch
  double mean_loss = 0.0;
  std::size_t samples = 0;
};

// One pass over the dataset: episodes in order, frames shuffled within each
// episode, full batches only.
EpochStats train_epoch(Network& net, const ProcessedDataset& data, AdaGradState& opt, const TrainOptions& options,
                       std::mt19937_64& rng);

// Fraction of states whose greedy action differs from the recorded action.
double evaluate(const Network& net, const ProcessedDataset& data);

struct TrainReportRow {
  std::size_t epoch = 0;
  double train_error = 0.0;
  double test_error = 0.0;
  double seconds = 0.0;  // wall clock; kept out of the CSV so reruns are byte-identical
};
using TrainReport = std::vector<TrainReportRow>;

struct DaqnTrainConfig {
  std::size_t epochs = 10;
  double eta = 0.01;
  std::uint64_t seed = 0;
  TrainOptions options;
};

using EpochCallback = std::function<void(const TrainReportRow&)>;

// Trains `net` in place for config.epochs epochs; the test split may be empty.
TrainReport train_daqn(Network& net, const ProcessedDataset& train, const ProcessedDataset* test,
                       const DaqnTrainConfig& config, const EpochCallback& on_epoch = {});

// DALN network files: architecture, role and config hash followed by every
// parameter tensor as little-endian f64.
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);
// Rejects files whose architecture or role differ from the expectation.
Network load_network(const std::filesystem::path& path, const Architecture& expected,
                     std::optional<NetRole> role = std::nullopt);

inline constexpr std::uint16_t kNetworkFormatVersion = 1;

// Live controller: preprocesses each rendered frame, keeps the frame history
// and acts greedily.
Policy network_policy(std::shared_ptr<const Network> net, OnlinePreprocessor preprocessor);

}  // namespace dal
