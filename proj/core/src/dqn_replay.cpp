#include "dal/dqn_replay.hpp"

#include <algorithm>

#include "dal/daqn.hpp"

namespace dal {

double dqn_target(const Network& net, const Tensor& next, double reward, bool terminal, double gamma) {
  if (terminal) return reward;
  const Tensor q = q_scores(net, next).presoft;
  return td_target(reward, false, q[argmax_lowest(q)], gamma);
}

void DqnConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("dqn: epsilon must be in [0,1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("dqn: gamma must be in [0,1)");
  if (batch_size == 0) throw std::invalid_argument("dqn: batch size must be positive");
  if (capacity < batch_size) throw std::invalid_argument("dqn: capacity smaller than a minibatch");
  if (warmup > capacity) throw std::invalid_argument("dqn: warm-up exceeds capacity");
}

FreewayEnv::FreewayEnv(GameConfig config, OnlinePreprocessor preprocessor, std::size_t history)
    : config_(std::move(config)), preprocessor_(std::move(preprocessor)), stacker_(history) {
  config_.validate();
}

FreewayEnv::State FreewayEnv::observe() {
  stacker_.push(preprocessor_(render(game_, config_)));
  return std::make_shared<const Tensor>(stacker_.state());
}

FreewayEnv::State FreewayEnv::reset(std::uint64_t seed) {
  game_ = env_reset(config_, seed);
  stacker_.reset();
  return observe();
}

FreewayEnv::Step FreewayEnv::step(std::size_t action) {
  const StepResult r = env_step(game_, action_from_index(action), config_);
  game_ = r.state;
  return {observe(), r.terminal};
}

NetworkQ::NetworkQ(Network net, double eta) : net_(std::move(net)), opt_(AdaGradState::for_params(net_.params, eta)) {}

std::vector<double> NetworkQ::values(const std::shared_ptr<const Tensor>& state) const {
  const Tensor q = q_scores(net_, *state).presoft;
  return {q.data().begin(), q.data().end()};
}

double NetworkQ::update(const std::vector<const Experience<std::shared_ptr<const Tensor>>*>& batch,
                        const std::vector<double>& targets) {
  std::vector<Tensor> states;
  std::vector<Action> actions;
  for (const auto* x : batch) {
    states.push_back(*x->state);
    actions.push_back(action_from_index(x->action));
  }
  const RegressionGradient g = reward_regression_gradient(net_, states, actions, targets);
  adagrad_step(net_.params, g.grads, opt_);
  return g.loss;
}

Network dqn_train(const GameConfig& game, const OnlinePreprocessor& preprocessor, const RewardNet& reward_net,
                  const Network& daqn, const DqnConfig& config, const DqnObserver& on_episode_end) {
  Network start = config.warm_start ? daqn : build_network(daqn.arch, config.seed);
  start.role = NetRole::q_network;
  NetworkQ learner(std::move(start), config.eta);
  FreewayEnv env(game, preprocessor, daqn.arch.history);
  const auto reward_fn = [&reward_net](const FreewayEnv::State& s, std::size_t a) {
    return reward(reward_net, *s, action_from_index(a));
  };
  run_replay_q_learning(env, learner, reward_fn, config, on_episode_end);
  return learner.network();
}

MdpEnv::MdpEnv(const tabular::Mdp& mdp) : mdp_(mdp) {
  mdp_.validate();
  mdp_.rewards = tabular::make_table(mdp_.n_states, mdp_.n_actions);
}

MdpEnv::State MdpEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  s_ = std::uniform_int_distribution<std::size_t>(0, mdp_.n_states - 1)(rng_);
  return s_;
}

MdpEnv::Step MdpEnv::step(std::size_t action) {
  std::vector<double> row(mdp_.n_states);
  for (std::size_t s2 = 0; s2 < mdp_.n_states; ++s2) row[s2] = mdp_.p(s_, action, s2);
  s_ = std::discrete_distribution<std::size_t>(row.begin(), row.end())(rng_);
  return {s_, false};
}

TableQ::TableQ(std::size_t n_states, std::size_t n_actions, double alpha)
    : q_(tabular::make_table(n_states, n_actions)), alpha_(alpha) {}

double TableQ::update(const std::vector<const Experience<std::size_t>*>& batch, const std::vector<double>& targets) {
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double& q = q_[batch[i]->state][batch[i]->action];
    const double d = targets[i] - q;
    loss += d * d / static_cast<double>(batch.size());
    q += alpha_ * d;
  }
  return loss;
}

}  // namespace dal
