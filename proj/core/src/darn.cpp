#include "dal/darn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dal/optim.hpp"

namespace dal {

ScoreFunction presoft_of(const Network& net) {
  return [&net](const Tensor& state) { return q_scores(net, state).presoft; };
}

double bellman_target(const ScoreFunction& q, const Tensor& s, Action a, const Tensor& s_next, double gamma) {
  const Tensor here = q(s);
  const Tensor next = q(s_next);
  return here[action_index(a)] - gamma * next[argmax_lowest(next)];
}

double bellman_target(const Network& daqn, const Tensor& s, Action a, const Tensor& s_next, double gamma) {
  return bellman_target(presoft_of(daqn), s, a, s_next, gamma);
}

RewardNet make_reward_net(std::shared_ptr<const Network> daqn, double gamma) {
  if (!daqn) throw std::invalid_argument("make_reward_net: null DAQN");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("make_reward_net: gamma must be in (0,1)");
  RewardNet r;
  r.net = *daqn;
  r.net.role = NetRole::reward_network;
  r.daqn = std::move(daqn);
  r.gamma = gamma;
  return r;
}

double reward(const Network& reward_net, const Tensor& state, Action action) {
  return q_scores(reward_net, state).presoft[action_index(action)];
}

std::vector<double> bellman_targets(const Network& daqn, const TransitionDataset& transitions, double gamma) {
  // Each state's scores are needed as s and as s'; evaluate every referenced
  // state once.
  const ProcessedDataset& states = transitions.states();
  std::vector<Tensor> scores(states.size());
  const auto scores_of = [&](std::size_t i) -> const Tensor& {
    if (scores[i].empty()) scores[i] = q_scores(daqn, states.state(i)).presoft;
    return scores[i];
  };
  std::vector<double> targets(transitions.size());
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const TransitionDataset::Item& it = transitions.item(i);
    const Tensor& next = scores_of(it.to);
    targets[i] = scores_of(it.from)[action_index(it.action)] - gamma * next[argmax_lowest(next)];
  }
  return targets;
}

RegressionGradient reward_regression_gradient(const Network& net, const std::vector<Tensor>& states,
                                              const std::vector<Action>& actions,
                                              const std::vector<double>& targets) {
  if (states.empty() || states.size() != actions.size() || states.size() != targets.size()) {
    throw std::invalid_argument("reward_regression_gradient: need matching, nonempty batches");
  }
  RegressionGradient out;
  out.grads = zeros_like(net.params);
  const double scale = 1.0 / static_cast<double>(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const ActivationTrace trace = forward(net, states[i]);
    const std::size_t a = action_index(actions[i]);
    const double diff = trace.presoft[a] - targets[i];
    out.loss += diff * diff * scale;
    Tensor g = Tensor::zeros_like(trace.presoft);
    g[a] = 2.0 * diff;
    axpy(out.grads, backward(net, trace, g), scale);
  }
  return out;
}

double reward_rmse(const Network& net, const TransitionDataset& transitions, const std::vector<double>& targets) {
  if (transitions.empty() || targets.size() != transitions.size()) {
    throw std::invalid_argument("reward_rmse: targets must cover a nonempty transition set");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const double d = reward(net, transitions.s(i), transitions.action(i)) - targets[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(transitions.size()));
}

DarnReport darn_train(RewardNet& reward_net, const TransitionDataset& transitions, const DarnTrainConfig& config,
                      const TransitionDataset* heldout, const std::function<void(const DarnReportRow&)>& on_epoch) {
  if (transitions.empty()) throw std::invalid_argument("darn_train: no transitions");
  if (!reward_net.daqn) throw std::invalid_argument("darn_train: reward net has no DAQN");
  if (config.batch_size < 1) throw std::invalid_argument("darn_train: batch size must be >= 1");
  const Network& daqn = *reward_net.daqn;
  const std::vector<double> targets = bellman_targets(daqn, transitions, reward_net.gamma);
  std::vector<double> heldout_targets;
  if (heldout && !heldout->empty()) heldout_targets = bellman_targets(daqn, *heldout, reward_net.gamma);

  AdaGradState opt = AdaGradState::for_params(reward_net.net.params, config.eta);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(transitions.size());
  std::iota(order.begin(), order.end(), 0);
  DarnReport report;
  std::vector<Tensor> states;
  std::vector<Action> actions;
  std::vector<double> batch_targets;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b + config.batch_size <= order.size(); b += config.batch_size) {
      states.clear();
      actions.clear();
      batch_targets.clear();
      for (std::size_t j = b; j < b + config.batch_size; ++j) {
        states.push_back(transitions.s(order[j]));
        actions.push_back(transitions.action(order[j]));
        batch_targets.push_back(targets[order[j]]);
      }
      const RegressionGradient g = reward_regression_gradient(reward_net.net, states, actions, batch_targets);
      adagrad_step(reward_net.net.params, g.grads, opt);
    }
    DarnReportRow row;
    row.epoch = epoch;
    row.train_rmse = reward_rmse(reward_net.net, transitions, targets);
    if (!heldout_targets.empty()) row.heldout_rmse = reward_rmse(reward_net.net, *heldout, heldout_targets);
    report.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return report;
}

}  // namespace dal
