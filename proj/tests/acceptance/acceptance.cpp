// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes. `acceptance <n> ...` runs a subset by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dal/analysis.hpp"
#include "dal/darn.hpp"
#include "dal/dqn_replay.hpp"
#include "dal/gradcheck.hpp"
#include "dal/rica.hpp"
#include "dal/tabular.hpp"
#include "stages.hpp"
#include "test_util.hpp"

namespace {

using namespace dal;
using dal::testing::random_network;
using dal::testing::random_tensor;
namespace fs = std::filesystem;

constexpr double kStep = 1e-5;
constexpr double kGradTolerance = 1e-4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------ gradient integrity

struct GradTally {
  std::size_t trials = 0, failures = 0;
  double worst = 0.0;
  std::string worst_name;

  void add(const std::string& name, double err) {
    ++trials;
    if (!(err < kGradTolerance)) ++failures;
    if (!(err <= worst)) {
      worst = err;
      worst_name = name;
    }
  }
};

double weighted_sum(const Tensor& out, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += w[i] * out[i];
  return s;
}

const Nonlinearity kNonlinearities[] = {Nonlinearity::logistic, Nonlinearity::tanh, Nonlinearity::rectifier};

Outcome gradient_integrity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  GradTally tally;

  for (int k = 0; k < 15; ++k) {
    const Tensor in = random_tensor({2, 7, 6}, rng);
    const LayerParams p{random_tensor({3, 2, 3, 2}, rng), random_tensor({3}, rng)};
    const Tensor w = random_tensor({3, 5, 5}, rng);
    const ConvGradients g = conv2d_valid_backward(in, p, w, true);
    const GradientSet fd = fd_gradient({p}, [&](const ParamSet& ps) { return weighted_sum(conv2d_valid(in, ps[0]), w); }, kStep);
    const Tensor fd_in = fd_tensor_gradient(in, [&](const Tensor& x) { return weighted_sum(conv2d_valid(x, p), w); }, kStep);
    tally.add("conv", std::max(max_relative_error({g.params}, fd), max_relative_error(g.input, fd_in)));
  }
  for (int k = 0; k < 10; ++k) {
    const Tensor in = random_tensor({2, 4, 6}, rng);
    const PoolResult r = maxpool(in, 2, 3);
    const Tensor w = random_tensor(r.output.shape(), rng);
    const Tensor fd = fd_tensor_gradient(in, [&](const Tensor& x) { return weighted_sum(maxpool(x, 2, 3).output, w); }, kStep);
    tally.add("maxpool", max_relative_error(maxpool_backward(w, r.argmax, in.shape(), 2, 3), fd));
  }
  for (int k = 0; k < 10; ++k) {
    const Tensor x = random_tensor({6}, rng);
    const LayerParams p{random_tensor({6, 4}, rng), random_tensor({4}, rng)};
    const Tensor c = random_tensor({4}, rng);
    const DenseGradients g = dense_backward(x, p, c);
    const GradientSet fd = fd_gradient({p}, [&](const ParamSet& ps) { return weighted_sum(dense(x, ps[0]), c); }, kStep);
    const Tensor fd_in = fd_tensor_gradient(x, [&](const Tensor& xx) { return weighted_sum(dense(xx, p), c); }, kStep);
    tally.add("dense", std::max(max_relative_error({g.params}, fd), max_relative_error(g.input, fd_in)));
  }
  for (Nonlinearity nl : kNonlinearities) {
    for (int k = 0; k < 4; ++k) {
      const Tensor z = random_tensor({8}, rng, -2, 2);
      const Tensor gy = random_tensor({8}, rng);
      const Tensor fd = fd_tensor_gradient(z, [&](const Tensor& zz) { return weighted_sum(activation(zz, nl), gy); }, kStep);
      tally.add("activation", max_relative_error(activation_backward(activation(z, nl), gy, nl), fd));
    }
  }
  for (LossKind kind : {LossKind::cross_entropy, LossKind::squared_error}) {
    for (std::size_t k = 0; k < 5; ++k) {
      const Tensor s = random_tensor({3}, rng, -3, 3);
      const std::size_t target = k % 3;
      const Tensor fd = fd_tensor_gradient(s, [&](const Tensor& ss) { return loss(softmax(ss), target, kind); }, kStep);
      tally.add("softmax+loss", max_relative_error(loss_gradient_presoft(s, target, kind), fd));
    }
  }

  // Whole-network losses on the shrunken architecture.
  const auto states = [&](std::size_t n) {
    std::vector<Tensor> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(random_tensor({2, 21, 21}, rng, 0, 1));
    return xs;
  };
  for (Nonlinearity nl : kNonlinearities) {
    for (LossKind kind : {LossKind::cross_entropy, LossKind::squared_error}) {
      for (int k = 0; k < 2; ++k) {
        const Network net = random_network(Architecture::shrunken(3, 2, nl), rng);
        const std::vector<Tensor> xs = states(3);
        const std::vector<std::size_t> ys = {0, 1, 2};
        const auto batch_loss = [&](const Network& n) {
          double total = 0.0;
          for (std::size_t i = 0; i < xs.size(); ++i) total += loss(forward(n, xs[i]).probs, ys[i], kind);
          return total / static_cast<double>(xs.size());
        };
        tally.add("daqn loss", max_relative_error(classification_gradient(net, xs, ys, kind).grads,
                                                  fd_gradient(net, batch_loss, kStep)));
      }
    }
    for (int k = 0; k < 3; ++k) {
      const Network net = random_network(Architecture::shrunken(3, 2, nl), rng);
      const std::vector<Tensor> xs = states(3);
      const std::vector<Action> as = {Action::up, Action::noop, Action::down};
      const std::vector<double> ys = {0.3, -0.7, 1.1};
      const auto regression = [&](const Network& n) {
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          const double d = forward(n, xs[i]).presoft[action_index(as[i])] - ys[i];
          total += d * d;
        }
        return total / static_cast<double>(xs.size());
      };
      tally.add("darn loss", max_relative_error(reward_regression_gradient(net, xs, as, ys).grads,
                                                fd_gradient(net, regression, kStep)));
    }
    for (int k = 0; k < 3; ++k) {
      const Network net = random_network(Architecture::shrunken(3, 2, nl), rng);
      const Tensor s = random_tensor({2, 21, 21}, rng, 0, 1);
      const Tensor next = random_tensor({2, 21, 21}, rng, 0, 1);
      const double y = dqn_target(net, next, 0.4, k == 2, 0.9);
      const auto td = [&](const Network& n) {
        const double d = forward(n, s).presoft[1] - y;
        return d * d;
      };
      tally.add("td loss", max_relative_error(reward_regression_gradient(net, {s}, {Action::down}, {y}).grads,
                                              fd_gradient(net, td, kStep)));
    }
  }

  for (int done = 0; done < 10;) {
    const RicaModel m{random_tensor({4, 9}, rng), 0.5};
    const Tensor x = random_tensor({7, 9}, rng);
    // Skip draws whose filter responses sit within a step of the L1 kink.
    bool near_kink = false;
    for (std::size_t n = 0; n < 7; ++n) {
      for (std::size_t k = 0; k < 4; ++k) {
        double u = 0.0;
        for (std::size_t d = 0; d < 9; ++d) u += m.weights.at(k, d) * x.at(n, d);
        near_kink = near_kink || std::abs(u) < 1e-4;
      }
    }
    if (near_kink) continue;
    const Tensor fd = fd_tensor_gradient(
        m.weights, [&](const Tensor& w) { return rica_objective(RicaModel{w, m.lambda}, x).value; }, kStep);
    tally.add("rica", max_relative_error(rica_objective(m, x).grad, fd));
    ++done;
  }

  for (Nonlinearity nl : kNonlinearities) {
    for (analysis::InfluenceOutput out : {analysis::InfluenceOutput::presoft, analysis::InfluenceOutput::probability}) {
      for (std::size_t k = 0; k < 2; ++k) {
        const Network net = random_network(Architecture::shrunken(3, 2, nl), rng);
        const Tensor x = random_tensor({2, 21, 21}, rng, 0, 1);
        const std::size_t a = k;
        const Tensor map = analysis::influence_map(net, x, a, out);
        const auto score = [&](const Tensor& in) {
          const ActivationTrace t = forward(net, in);
          return out == analysis::InfluenceOutput::presoft ? t.presoft[a] : t.probs[a];
        };
        double worst = 0.0;
        std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
        for (int j = 0; j < 25; ++j) {
          const std::size_t i = pick(rng);
          Tensor up = x, down = x;
          up[i] += kStep;
          down[i] -= kStep;
          worst = std::max(worst, relative_error(map[i], (score(up) - score(down)) / (2 * kStep)));
        }
        tally.add("influence", worst);
      }
    }
  }

  const double secs = seconds_since(t0);
  return {tally.failures == 0 && tally.trials >= 100 && secs < 60.0,
          fmt("%zu trials, %zu over tolerance, worst relative error %.2e (%s), %.1f s", tally.trials, tally.failures,
              tally.worst, tally.worst_name.c_str(), secs)};
}

// ------------------------------------------------------------ tabular oracles

double sup_diff(const tabular::Table& a, const tabular::Table& b) {
  double d = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    for (std::size_t k = 0; k < a[s].size(); ++k) d = std::max(d, std::abs(a[s][k] - b[s][k]));
  }
  return d;
}

Outcome tabular_oracles() {
  using namespace tabular;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(17);
  double residual = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Mdp m = random_mdp(2 + rng() % 7, 1 + rng() % 4, 0.95, rng);
    residual = std::max(residual, bellman_residual(m, value_iteration(m, 1e-11).v));
  }
  const Mdp c = chain(5, 0.9);
  const double q_gap = sup_diff(q_learning(c, {0.5, 0.2, 5000, 20, 7}).q, value_iteration(c).q);

  // Fixed-point sensitivity against central differences of Q* in theta.
  double phi_gap = 0.0;
  for (int k = 0; k < 5; ++k) {
    const Mdp m = random_mdp(3 + k % 2, 2, 0.9, rng);
    const Features f = one_hot_features(m.n_states);
    std::vector<double> theta(m.n_states);
    for (double& t : theta) t = std::uniform_real_distribution<double>(-1, 1)(rng);
    const Mdp planted = with_state_reward(m, f, theta);
    const FixedPoint fp = q_sensitivity(planted, f, greedy_policy(value_iteration(planted, 1e-13).q).probs, 1e-12);
    if (!fp.converged) phi_gap = INFINITY;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      std::vector<double> up = theta, down = theta;
      up[i] += kStep;
      down[i] -= kStep;
      const Table qu = value_iteration(with_state_reward(m, f, up), 1e-13).q;
      const Table qd = value_iteration(with_state_reward(m, f, down), 1e-13).q;
      for (std::size_t s = 0; s < m.n_states; ++s) {
        for (std::size_t a = 0; a < m.n_actions; ++a) {
          phi_gap = std::max(phi_gap, std::abs(fp.phi[i][s][a] - (qu[s][a] - qd[s][a]) / (2 * kStep)));
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {residual < 1e-9 && q_gap < 1e-2 && phi_gap < 1e-4 && secs < 30.0,
          fmt("Bellman residual %.1e, Q-learning gap %.2e, phi vs finite differences %.1e, %.2f s", residual, q_gap,
              phi_gap, secs)};
}

// ------------------------------------------------------------ CSI recovery

Outcome csi_recovery() {
  using namespace tabular;
  const auto t0 = std::chrono::steady_clock::now();
  const Mdp world = line_world(5, 3, 0.9);
  const std::vector<std::size_t> expert = greedy_actions(value_iteration(world).q);
  std::vector<StateAction> pairs;
  for (std::size_t start = 0; start < 5; ++start) {
    for (const StateAction& sa : rollout(world, expert, start, 6)) pairs.push_back(sa);
  }
  std::mt19937_64 rng(8);
  std::vector<Transition> transitions;
  for (int k = 0; k < 500; ++k) {
    const std::size_t s = rng() % 5, a = rng() % 3;
    transitions.push_back({s, a, world.next_state(s, a)});
  }
  Mdp learned = world;
  learned.rewards = csi(pairs, transitions, 5, 3, world.gamma).rewards;
  const std::vector<std::size_t> recovered = greedy_actions(value_iteration(learned).q);
  std::set<std::size_t> visited;
  for (const StateAction& sa : pairs) visited.insert(sa.s);
  std::size_t agree = 0;
  for (std::size_t s : visited) agree += recovered[s] == expert[s];
  const double rate = static_cast<double>(agree) / static_cast<double>(visited.size());
  const double secs = seconds_since(t0);
  return {rate >= 0.95 && secs < 30.0,
          fmt("agreement %zu/%zu expert-visited states (%.0f%%), %.2f s", agree, visited.size(), 100 * rate, secs)};
}

// ------------------------------------------------------------ full pipeline

struct PipelineRun {
  bool ran = false;
  std::string error;
  nlohmann::json report;
  cli::PipelineTimings timings;
};

PipelineRun& full_pipeline() {
  static PipelineRun run;
  if (run.ran) return run;
  run.ran = true;
  const fs::path dir = dal::testing::temp_dir("acceptance_pipeline");
  cli::RunConfig config;  // defaults: 20 expert episodes, DAQN 4 epochs at eta 0.01, 5 evaluation seeds
  std::ofstream log(dir / "pipeline.log");
  try {
    run.report = cli::run_pipeline(config, dir / "run", log, &run.timings);
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

Outcome dal_objectives() {
  PipelineRun& run = full_pipeline();
  if (!run.error.empty()) return {false, "pipeline failed: " + run.error};
  const nlohmann::json& c = run.report["crossings"];
  const double daqn = c["daqn"]["mean"], random = c["random"]["mean"], expert = c["expert"]["mean"];
  const double generalized = c["generalized"]["mean"];
  const double minutes = run.timings.total / 60.0;
  return {daqn > random && daqn >= 0.3 * expert && minutes < 20.0,
          fmt("mean crossings over 5 seeds: DAQN %.1f, random %.1f, expert %.1f (ratio %.2f), generalized %.1f; "
              "pipeline %.1f min",
              daqn, random, expert, expert > 0 ? daqn / expert : 0.0, generalized, minutes)};
}

Outcome reward_ordering() {
  PipelineRun& run = full_pipeline();
  if (!run.error.empty()) return {false, "pipeline failed: " + run.error};
  const nlohmann::json& t = run.report["reward_trace_totals"];
  const double up = t["always_up"], expert = t["expert"], idle = t["do_nothing"], osc = t["oscillate"];
  // DARN training plus the four traces.
  const double minutes = (run.timings.darn + run.timings.evaluate) / 60.0;
  return {std::min(up, expert) > std::max(idle, osc) && minutes < 5.0,
          fmt("cumulative reward: always_up %.1f, expert %.1f, do_nothing %.1f, oscillate %.1f; DARN %.1f min", up,
              expert, idle, osc, minutes)};
}

// ------------------------------------------------------------ Bellman exactness

Outcome bellman_exactness() {
  using namespace tabular;
  // Deterministic 6-state world: action a moves (s + a) mod 6, three actions.
  const std::size_t n = 6, m = 3;
  Mdp mdp = Mdp::blank(n, m, 0.9);
  std::mt19937_64 rng(5);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < m; ++a) {
      mdp.p(s, a, (s + a) % n) = 1.0;
      mdp.rewards[s][a] = std::uniform_real_distribution<double>(-1, 1)(rng);
    }
  }
  const Table q = value_iteration(mdp, 1e-14).q;
  const auto one_hot = [&](std::size_t s) {
    Tensor t({n});
    t[s] = 1.0;
    return t;
  };
  const ScoreFunction lookup = [&](const Tensor& state) {
    const std::size_t s = argmax_lowest(state);
    Tensor out({m});
    for (std::size_t a = 0; a < m; ++a) out[a] = q[s][a];
    return out;
  };
  double worst = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < m; ++a) {
      const double r = bellman_target(lookup, one_hot(s), action_from_index(a), one_hot(mdp.next_state(s, a)), mdp.gamma);
      worst = std::max(worst, std::abs(r - mdp.rewards[s][a]));
    }
  }
  return {worst < 1e-9, fmt("%zu transitions, max |error| %.1e", n * m, worst)};
}

// ------------------------------------------------------------ determinism & formats

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism_and_formats() {
  const fs::path dir = dal::testing::temp_dir("acceptance_determinism");
  GameConfig game = GameConfig::defaults();
  game.episode_length = 60;
  game.save(dir / "game.cfg");
  cli::RunConfig config;
  config.game_config = (dir / "game.cfg").string();
  config.expert_episodes = 3;
  config.random_episodes = 2;
  config.daqn_epochs = 1;
  config.darn_epochs = 1;
  config.dqn_episodes = 1;
  config.dqn_warmup = 20;
  config.dqn_capacity = 200;
  config.eval_episodes = 2;
  config.trace_length = 60;
  std::ostringstream sink;
  std::vector<std::string> problems;
  for (const char* name : {"a", "b"}) {
    cli::run_pipeline(config, dir / name, sink);
    // Processed episodes and images from the same run.
    const fs::path run = dir / name;
    const Network net = load_network(run / "daqn.daln");
    fs::create_directories(run / "processed");
    for (const fs::path& p : cli::list_dalt(run / "expert")) {
      save_processed(preprocess(load_trajectory(p)), run / "processed" / p.filename());
    }
    const ProcessedDataset data = stack(cli::load_episodes(run / "processed", game, {}), net.arch.history);
    const Tensor state = data.state(10);
    analysis::export_pgm(analysis::plane(analysis::influence_map(net, state), 0), run / "influence.pgm");
    analysis::export_pgm(render(env_reset(game, 3), game), run / "frame.pgm");
  }
  const auto a = files_under(dir / "a"), b = files_under(dir / "b");
  std::set<std::string> kinds;
  if (a != b) problems.push_back("file lists differ");
  for (const fs::path& f : a) {
    kinds.insert(f.extension().string());
    if (dal::testing::read_bytes(dir / "a" / f) != dal::testing::read_bytes(dir / "b" / f)) {
      problems.push_back(f.string() + " differs");
    }
  }
  for (const char* ext : {".dalt", ".daln", ".csv", ".pgm"}) {
    if (!kinds.count(ext)) problems.push_back(std::string("no ") + ext + " artifact compared");
  }

  // Round trips: load then save reproduces the bytes and the values.
  const fs::path raw = cli::list_dalt(dir / "a" / "expert").front();
  const Trajectory t = load_trajectory(raw);
  save_trajectory(t, dir / "raw_again.dalt", read_evaluation_trailer(raw));
  if (dal::testing::read_bytes(raw) != dal::testing::read_bytes(dir / "raw_again.dalt") ||
      load_trajectory(dir / "raw_again.dalt") != t) {
    problems.push_back("raw DALT round trip");
  }
  const fs::path norm = cli::list_dalt(dir / "a" / "processed").front();
  const ProcessedEpisode pe = load_processed(norm);
  save_processed(pe, dir / "norm_again.dalt");
  if (dal::testing::read_bytes(norm) != dal::testing::read_bytes(dir / "norm_again.dalt") ||
      load_processed(dir / "norm_again.dalt") != pe) {
    problems.push_back("normalized DALT round trip");
  }
  for (const char* name : {"daqn.daln", "darn.daln", "dqn.daln"}) {
    const Network n = load_network(dir / "a" / name);
    save_network(n, dir / "again.daln");
    const Network back = load_network(dir / "again.daln");
    if (dal::testing::read_bytes(dir / "a" / name) != dal::testing::read_bytes(dir / "again.daln") ||
        back.params != n.params || back.arch != n.arch || back.role != n.role || back.config_hash != n.config_hash) {
      problems.push_back(std::string(name) + " round trip");
    }
  }
  std::string detail = fmt("%zu artifacts compared across two seeded runs", a.size());
  for (const std::string& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// ------------------------------------------------------------ isolation

Outcome isolation() {
  std::vector<std::string> problems;
  for (const char* file : {"core/src/daqn.cpp", "core/src/darn.cpp", "core/src/dqn_replay.cpp", "core/src/rica.cpp",
                           "core/include/dal/daqn.hpp", "core/include/dal/darn.hpp", "core/include/dal/dqn_replay.hpp",
                           "core/include/dal/rica.hpp"}) {
    std::ifstream in(std::string(DAL_SOURCE_DIR) + "/" + file);
    if (!in) {
      problems.push_back(std::string("cannot read ") + file);
      continue;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    for (const char* token : {"crossings", "GameStateAccess"}) {
      if (buf.str().find(token) != std::string::npos) problems.push_back(std::string(file) + " mentions " + token);
    }
  }

  // Every learner on a short game, with the score-read counter watched.
  GameConfig game = GameConfig::defaults();
  game.episode_length = 30;
  std::vector<Trajectory> demos;
  std::vector<ProcessedEpisode> expert, random;
  for (std::uint64_t s = 0; s < 2; ++s) {
    demos.push_back(record(game, expert_policy(game), s, 30, RecorderTag::scripted).trajectory);
  }
  const OnlinePreprocessor pre = OnlinePreprocessor::from_demonstrations(demos, {});
  for (const Trajectory& d : demos) expert.push_back(preprocess(d));
  random.push_back(preprocess(record(game, random_policy(9), 9, 30, RecorderTag::random).trajectory, pre));
  const std::uint64_t before = eval::crossings_reads();
  auto daqn = std::make_shared<Network>(build(kNumActions, 2, Nonlinearity::tanh, 0));
  DaqnTrainConfig dc;
  dc.epochs = 1;
  train_daqn(*daqn, stack(expert, 2), nullptr, dc);
  RewardNet reward = make_reward_net(daqn, 0.9);
  DarnTrainConfig rc;
  rc.epochs = 1;
  darn_train(reward, make_transitions(std::make_shared<const ProcessedDataset>(random, 2)), rc);
  DqnConfig q;
  q.episodes = 1;
  q.warmup = 10;
  q.capacity = 50;
  q.batch_size = 4;
  dqn_train(game, pre, reward, *daqn, q);
  const std::uint64_t reads = eval::crossings_reads() - before;
  if (reads != 0) problems.push_back(fmt("learners read the score %llu times", (unsigned long long)reads));
  // The probe itself works.
  eval::crossings(env_reset(game, 0));
  if (eval::crossings_reads() == before) problems.push_back("score-read counter does not count");

  std::string detail = "static scan of learner sources and dynamic score-read count during DAQN, DARN and DQN training";
  for (const std::string& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"tabular oracles", tabular_oracles},
      {"CSI recovery", csi_recovery},
      {"DAL objectives", dal_objectives},
      {"reward ordering", reward_ordering},
      {"Bellman-target exactness", bellman_exactness},
      {"determinism and formats", determinism_and_formats},
      {"isolation", isolation},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return all ? 0 : 1;
}
