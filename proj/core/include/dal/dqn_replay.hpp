#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "dal/darn.hpp"
#include "dal/envs.hpp"
#include "dal/optim.hpp"
#include "dal/tabular.hpp"
#include "dal/trajectory.hpp"

namespace dal {

// Fixed-capacity FIFO of transitions with uniform sampling with replacement.
template <class T>
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay memory: capacity must be positive");
  }

  void push(T item) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(item));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  // 0 is the oldest stored item.
  const T& operator[](std::size_t i) const { return items_.at(i); }

  std::vector<std::size_t> sample_indices(std::size_t k, std::mt19937_64& rng) const {
    if (k == 0 || items_.size() < k) throw std::logic_error("replay memory: not enough transitions to sample");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> out(k);
    for (std::size_t& i : out) i = pick(rng);
    return out;
  }

  std::vector<const T*> sample(std::size_t k, std::mt19937_64& rng) const {
    std::vector<const T*> out;
    for (std::size_t i : sample_indices(k, rng)) out.push_back(&items_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
};

template <class State>
struct Experience {
  State state;
  std::size_t action = 0;
  double reward = 0.0;
  State next;
  bool terminal = false;
};

// y = r for terminal transitions, otherwise r + gamma * max_a' Q(s', a').
inline double td_target(double reward, bool terminal, double next_max, double gamma) {
  return terminal ? reward : reward + gamma * next_max;
}

double dqn_target(const Network& net, const Tensor& next, double reward, bool terminal, double gamma);

struct DqnConfig {
  double epsilon = 0.05;
  double gamma = 0.9;
  std::size_t batch_size = 32;
  std::size_t episodes = 10;
  std::size_t max_steps = 0;  // per episode; 0 runs until the environment ends the episode
  std::size_t capacity = 10000;
  std::size_t warmup = 1000;  // no updates until the memory holds this many transitions
  double eta = 0.01;
  std::uint64_t seed = 0;
  bool warm_start = true;  // start from the DAQN weights rather than a fresh network

  void validate() const;
};

struct DqnEpisodeLog {
  std::size_t episode = 0;
  std::size_t steps = 0;  // environment steps so far, all episodes
  double epsilon = 0.0;
  double mean_td_loss = 0.0;  // over this episode's updates; 0 before warm-up ends
  std::size_t updates = 0;
};

// Experience replay Q-learning. Env provides State, reset(seed) -> State,
// step(action) -> {next, terminal} and num_actions(); Learner provides
// values(state) and update(batch, targets) -> loss; reward(state, action)
// supplies every stored reward. Targets are computed before the update and
// held fixed.
template <class Env, class Learner, class RewardFn>
void run_replay_q_learning(Env& env, Learner& learner, const RewardFn& reward, const DqnConfig& config,
                           const std::function<void(const DqnEpisodeLog&, const Env&)>& on_episode_end = {}) {
  config.validate();
  using State = typename Env::State;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_action(0, env.num_actions() - 1);
  ReplayMemory<Experience<State>> memory(config.capacity);
  const std::size_t ready = std::max(config.warmup, config.batch_size);
  std::size_t steps = 0;
  std::vector<double> targets;
  for (std::size_t e = 0; e < config.episodes; ++e) {
    State s = env.reset(rng());
    double loss_sum = 0.0;
    std::size_t updates = 0;
    for (std::size_t t = 0; config.max_steps == 0 || t < config.max_steps; ++t) {
      std::size_t a;
      if (unit(rng) < config.epsilon) {
        a = any_action(rng);
      } else {
        const std::vector<double> q = learner.values(s);
        a = tabular::argmax_lowest(q);
      }
      auto step = env.step(a);
      const double r = reward(s, a);
      memory.push({s, a, r, step.next, step.terminal});
      ++steps;
      if (memory.size() >= ready) {
        const auto batch = memory.sample(config.batch_size, rng);
        targets.clear();
        for (const auto* x : batch) {
          const std::vector<double> next_q = learner.values(x->next);
          targets.push_back(td_target(x->reward, x->terminal, next_q[tabular::argmax_lowest(next_q)], config.gamma));
        }
        loss_sum += learner.update(batch, targets);
        ++updates;
      }
      s = std::move(step.next);
      if (step.terminal) break;
    }
    if (on_episode_end) {
      on_episode_end({e, steps, config.epsilon, updates ? loss_sum / static_cast<double>(updates) : 0.0, updates},
                     env);
    }
  }
}

// MiniFreeway seen through the online preprocessing and frame history. The
// learner only receives stacked state tensors.
class FreewayEnv {
 public:
  using State = std::shared_ptr<const Tensor>;
  struct Step {
    State next;
    bool terminal = false;
  };

  FreewayEnv(GameConfig config, OnlinePreprocessor preprocessor, std::size_t history);

  State reset(std::uint64_t seed);
  Step step(std::size_t action);
  std::size_t num_actions() const { return kNumActions; }
  // For evaluation hooks outside the learner.
  const GameState& game() const { return game_; }
  const GameConfig& config() const { return config_; }

 private:
  State observe();

  GameConfig config_;
  OnlinePreprocessor preprocessor_;
  FrameStacker stacker_;
  GameState game_;
};

// Q network trained by AdaGrad on the mean squared TD error of the taken action.
class NetworkQ {
 public:
  NetworkQ(Network net, double eta);
  std::vector<double> values(const std::shared_ptr<const Tensor>& state) const;
  double update(const std::vector<const Experience<std::shared_ptr<const Tensor>>*>& batch,
                const std::vector<double>& targets);
  const Network& network() const { return net_; }

 private:
  Network net_;
  AdaGradState opt_;
};

using DqnObserver = std::function<void(const DqnEpisodeLog&, const FreewayEnv&)>;

// Replay Q-learning on MiniFreeway with rewards from the reward network.
// Starts from `daqn` (warm start) or a fresh network of the same architecture.
Network dqn_train(const GameConfig& game, const OnlinePreprocessor& preprocessor, const RewardNet& reward_net,
                  const Network& daqn, const DqnConfig& config, const DqnObserver& on_episode_end = {});

// Tabular counterparts used as an exact reference for the replay loop.
class MdpEnv {
 public:
  using State = std::size_t;
  struct Step {
    State next = 0;
    bool terminal = false;
  };

  // Episodes start in a uniformly random state.
  explicit MdpEnv(const tabular::Mdp& mdp);
  State reset(std::uint64_t seed);
  Step step(std::size_t action);
  std::size_t num_actions() const { return mdp_.n_actions; }

 private:
  // Only the dynamics are kept; the learner never sees R.
  tabular::Mdp mdp_;
  std::mt19937_64 rng_;
  State s_ = 0;
};

class TableQ {
 public:
  TableQ(std::size_t n_states, std::size_t n_actions, double alpha);
  std::vector<double> values(std::size_t s) const { return q_[s]; }
  double update(const std::vector<const Experience<std::size_t>*>& batch, const std::vector<double>& targets);
  const tabular::Table& table() const { return q_; }

 private:
  tabular::Table q_;
  double alpha_;
};

}  // namespace dal
