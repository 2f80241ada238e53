#include "dal/darn.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "dal/gradcheck.hpp"
#include "test_util.hpp"

namespace dal {
namespace {

using testing::random_tensor;

Tensor one_hot(std::size_t i, std::size_t n) {
  Tensor t({n});
  t[i] = 1.0;
  return t;
}

// Frames of a moving bright block plus noise; actions are random.
std::shared_ptr<const ProcessedDataset> drifting_block_data(std::size_t episodes, std::size_t length,
                                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.0, 0.05);
  std::vector<ProcessedEpisode> eps;
  for (std::size_t e = 0; e < episodes; ++e) {
    ProcessedEpisode ep;
    for (std::size_t t = 0; t < length; ++t) {
      Tensor f({21, 21});
      for (double& v : f.data()) v = jitter(rng);
      const std::size_t y = (e * 3 + t) % 17;
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) f.at(y + i, 8 + j) = 1.0;
      }
      ep.frames.push_back(f);
      ep.actions.push_back(action_from_index(rng() % kNumActions));
    }
    eps.push_back(std::move(ep));
  }
  return std::make_shared<const ProcessedDataset>(stack(eps, 2));
}

TEST(BellmanTargetTest, LookupTableOfOptimalValuesRecoversRewards) {
  // Deterministic four-state chain; action a moves to (s + a) mod 4.
  const std::size_t n = 4, m = 3;
  const double gamma = 0.9;
  const auto next = [&](std::size_t s, std::size_t a) { return (s + a) % n; };
  const auto reward_of = [](std::size_t s, std::size_t a) { return static_cast<double>(s) - 0.5 * a; };
  std::vector<std::vector<double>> q(n, std::vector<double>(m, 0.0));
  for (int it = 0; it < 2000; ++it) {
    auto fresh = q;
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t a = 0; a < m; ++a) {
        const auto& row = q[next(s, a)];
        fresh[s][a] = reward_of(s, a) + gamma * *std::max_element(row.begin(), row.end());
      }
    }
    q = fresh;
  }
  const ScoreFunction lookup = [&](const Tensor& state) {
    const std::size_t s = argmax_lowest(state);
    Tensor out({m});
    for (std::size_t a = 0; a < m; ++a) out[a] = q[s][a];
    return out;
  };
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < m; ++a) {
      const double r = bellman_target(lookup, one_hot(s, n), action_from_index(a), one_hot(next(s, a), n), gamma);
      EXPECT_NEAR(r, reward_of(s, a), 1e-9);
    }
  }
}

TEST(BellmanTargetTest, NetworkTargetUsesPresoftScores) {
  std::mt19937_64 rng(1);
  const Network net = testing::random_network(Architecture::shrunken(3, 2), rng);
  const Tensor s = random_tensor({2, 21, 21}, rng, 0, 1);
  const Tensor s2 = random_tensor({2, 21, 21}, rng, 0, 1);
  const Tensor q = forward(net, s).presoft;
  const Tensor q2 = forward(net, s2).presoft;
  const double best = std::max({q2[0], q2[1], q2[2]});
  EXPECT_NEAR(bellman_target(net, s, Action::down, s2, 0.9), q[1] - 0.9 * best, 1e-12);
}

TEST(BellmanTargetTest, CachedTargetsMatchPointwiseTargets) {
  const auto data = drifting_block_data(2, 6, 2);
  const TransitionDataset tr = make_transitions(data);
  const Network daqn = build_network(Architecture::shrunken(3, 2), 3);
  const std::vector<double> targets = bellman_targets(daqn, tr, 0.9);
  ASSERT_EQ(targets.size(), tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    EXPECT_DOUBLE_EQ(targets[i], bellman_target(daqn, tr.s(i), tr.action(i), tr.s_next(i), 0.9));
  }
}

TEST(RewardNetTest, InitialisedFromDaqn) {
  auto daqn = std::make_shared<const Network>(build_network(Architecture::shrunken(3, 2), 4));
  const RewardNet r = make_reward_net(daqn);
  EXPECT_EQ(r.net.params, daqn->params);
  EXPECT_EQ(r.net.arch, daqn->arch);
  EXPECT_EQ(r.net.role, NetRole::reward_network);
  EXPECT_EQ(daqn->role, NetRole::q_network);
  EXPECT_EQ(r.gamma, 0.9);
  EXPECT_THROW(make_reward_net(nullptr), std::invalid_argument);
  EXPECT_THROW(make_reward_net(daqn, 1.0), std::invalid_argument);
  EXPECT_THROW(make_reward_net(daqn, 0.0), std::invalid_argument);
}

TEST(RewardNetTest, RewardIsTheActionUnit) {
  std::mt19937_64 rng(5);
  const Network net = testing::random_network(Architecture::shrunken(3, 1), rng);
  const Tensor s = random_tensor({1, 21, 21}, rng, 0, 1);
  const Tensor q = forward(net, s).presoft;
  for (std::size_t a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(reward(net, s, action_from_index(a)), q[a]);
}

double regression_loss(const Network& net, const std::vector<Tensor>& xs, const std::vector<Action>& as,
                       const std::vector<double>& ys) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = forward(net, xs[i]).presoft[action_index(as[i])] - ys[i];
    total += d * d;
  }
  return total / static_cast<double>(xs.size());
}

TEST(RegressionGradientTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (Nonlinearity nl : {Nonlinearity::logistic, Nonlinearity::tanh, Nonlinearity::rectifier}) {
    const Network net = testing::random_network(Architecture::shrunken(3, 2, nl), rng);
    std::vector<Tensor> xs;
    std::vector<Action> as;
    std::vector<double> ys;
    for (int i = 0; i < 4; ++i) {
      xs.push_back(random_tensor({2, 21, 21}, rng, 0, 1));
      as.push_back(action_from_index(static_cast<std::size_t>(i % 3)));
      ys.push_back(std::uniform_real_distribution<double>(-2, 2)(rng));
    }
    const RegressionGradient g = reward_regression_gradient(net, xs, as, ys);
    EXPECT_NEAR(g.loss, regression_loss(net, xs, as, ys), 1e-12);
    const GradientSet fd = fd_gradient(net, [&](const Network& n) { return regression_loss(n, xs, as, ys); }, 1e-5);
    EXPECT_LT(max_relative_error(g.grads, fd), 1e-4) << to_string(nl);
  }
}

TEST(RegressionGradientTest, OtherActionUnitsGetNoGradient) {
  std::mt19937_64 rng(7);
  const Network net = testing::random_network(Architecture::shrunken(3, 1), rng);
  const RegressionGradient g =
      reward_regression_gradient(net, {random_tensor({1, 21, 21}, rng, 0, 1)}, {Action::noop}, {0.5});
  const Tensor& w = g.grads[3].weights;
  for (std::size_t h = 0; h < net.arch.hidden; ++h) {
    EXPECT_EQ(w.at(h, 0), 0.0);
    EXPECT_EQ(w.at(h, 1), 0.0);
  }
  EXPECT_EQ(g.grads[3].bias[0], 0.0);
  EXPECT_NE(g.grads[3].bias[2], 0.0);
}

TEST(RegressionGradientTest, RejectsMismatchedBatches) {
  const Network net = build_network(Architecture::shrunken(3, 1), 0);
  EXPECT_THROW(reward_regression_gradient(net, {}, {}, {}), std::invalid_argument);
  EXPECT_THROW(reward_regression_gradient(net, {Tensor({1, 21, 21})}, {Action::up}, {}), std::invalid_argument);
}

TEST(DarnTrainTest, HeldoutErrorFallsAndDaqnIsUntouched) {
  const auto data = drifting_block_data(6, 40, 8);
  const TransitionDataset all = make_transitions(data);
  const TransitionDataset train = all.subset_by_episode({0, 1, 2, 3, 4});
  const TransitionDataset heldout = all.subset_by_episode({5});
  auto daqn = std::make_shared<const Network>(build_network(Architecture::shrunken(3, 2), 9));
  const ParamSet before = daqn->params;
  RewardNet r = make_reward_net(daqn);
  const std::vector<double> heldout_targets = bellman_targets(*daqn, heldout, r.gamma);
  const double initial = reward_rmse(r.net, heldout, heldout_targets);
  const DarnReport report = darn_train(r, train, {8, 16, 0.01, 1}, &heldout);
  ASSERT_EQ(report.size(), 8u);
  EXPECT_LT(report.back().heldout_rmse, initial);
  EXPECT_LT(report.back().train_rmse, report.front().train_rmse + 1e-12);
  EXPECT_EQ(daqn->params, before);
  EXPECT_NE(r.net.params, daqn->params);
  // Targets depend on the DAQN only.
  EXPECT_EQ(bellman_targets(*daqn, heldout, r.gamma), heldout_targets);
}

TEST(DarnTrainTest, DeterministicUnderSeed) {
  const TransitionDataset tr = make_transitions(drifting_block_data(2, 20, 10));
  auto daqn = std::make_shared<const Network>(build_network(Architecture::shrunken(3, 2), 11));
  RewardNet a = make_reward_net(daqn), b = make_reward_net(daqn);
  const DarnReport ra = darn_train(a, tr, {2, 8, 0.01, 3});
  const DarnReport rb = darn_train(b, tr, {2, 8, 0.01, 3});
  EXPECT_EQ(a.net.params, b.net.params);
  EXPECT_EQ(ra.back().train_rmse, rb.back().train_rmse);
}

TEST(DarnTrainTest, RejectsEmptyInputs) {
  auto daqn = std::make_shared<const Network>(build_network(Architecture::shrunken(3, 2), 0));
  RewardNet r = make_reward_net(daqn);
  EXPECT_THROW(darn_train(r, TransitionDataset{}, {}), std::invalid_argument);
  RewardNet orphan;
  EXPECT_THROW(darn_train(orphan, make_transitions(drifting_block_data(1, 4, 0)), {}), std::invalid_argument);
}

}  // namespace
}  // namespace dal
