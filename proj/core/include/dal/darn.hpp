#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dal/daqn.hpp"
#include "dal/trajectory.hpp"

namespace dal {

// Pre-softmax action scores of a state; a network or any lookup table.
using ScoreFunction = std::function<Tensor(const Tensor& state)>;

ScoreFunction presoft_of(const Network& net);

// q(s, a) - gamma * max_a' q(s', a').
double bellman_target(const ScoreFunction& q, const Tensor& s, Action a, const Tensor& s_next, double gamma);
double bellman_target(const Network& daqn, const Tensor& s, Action a, const Tensor& s_next, double gamma);

// Per-action reward head initialised from a trained DAQN. The DAQN is held
// read-only and only supplies regression targets.
struct RewardNet {
  Network net;
  std::shared_ptr<const Network> daqn;
  double gamma = 0.9;
};

RewardNet make_reward_net(std::shared_ptr<const Network> daqn, double gamma = 0.9);

// Pre-softmax output of the action's unit.
double reward(const Network& reward_net, const Tensor& state, Action action);
inline double reward(const RewardNet& r, const Tensor& state, Action action) { return reward(r.net, state, action); }

// Bellman targets for every transition, computed once from the frozen DAQN.
std::vector<double> bellman_targets(const Network& daqn, const TransitionDataset& transitions, double gamma);

struct RegressionGradient {
  double loss = 0.0;  // mean squared error over the batch
  GradientSet grads;
};

// Squared error on the taken action's output only.
RegressionGradient reward_regression_gradient(const Network& net, const std::vector<Tensor>& states,
                                              const std::vector<Action>& actions,
                                              const std::vector<double>& targets);

struct DarnTrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double eta = 0.01;
  std::uint64_t seed = 0;
};

struct DarnReportRow {
  std::size_t epoch = 0;
  double train_rmse = 0.0;
  double heldout_rmse = 0.0;
};
using DarnReport = std::vector<DarnReportRow>;

// Root mean squared error of r(s, a) against the targets.
double reward_rmse(const Network& net, const TransitionDataset& transitions, const std::vector<double>& targets);

// Minibatch AdaGrad regression over shuffled transitions; full batches only.
DarnReport darn_train(RewardNet& reward_net, const TransitionDataset& transitions, const DarnTrainConfig& config,
                      const TransitionDataset* heldout = nullptr,
                      const std::function<void(const DarnReportRow&)>& on_epoch = {});

}  // namespace dal
