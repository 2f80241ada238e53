#include "stages.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>

#include "dal/rica.hpp"

namespace dal::cli {

using nlohmann::json;

json RunConfig::to_json() const {
  return json{{"game_config", game_config},
              {"history", history},
              {"nonlinearity", nonlinearity},
              {"loss", loss},
              {"gamma", gamma},
              {"eta", eta},
              {"epsilon", epsilon},
              {"expert_episodes", expert_episodes},
              {"random_episodes", random_episodes},
              {"test_fraction", test_fraction},
              {"daqn_epochs", daqn_epochs},
              {"darn_epochs", darn_epochs},
              {"dqn_episodes", dqn_episodes},
              {"dqn_warmup", dqn_warmup},
              {"dqn_capacity", dqn_capacity},
              {"batch_size", batch_size},
              {"eval_episodes", eval_episodes},
              {"trace_length", trace_length},
              {"background_removal", background_removal},
              {"rica_pretrain", rica_pretrain},
              {"warm_start", warm_start},
              {"seeds",
               {{"expert", seeds.expert},
                {"random", seeds.random},
                {"split", seeds.split},
                {"init", seeds.init},
                {"daqn", seeds.daqn},
                {"darn", seeds.darn},
                {"dqn", seeds.dqn},
                {"eval", seeds.eval}}}};
}

namespace {

template <class T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void reject_unknown(const json& j, const json& known, const std::string& where) {
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw UsageError("unknown key '" + item.key() + "' in " + where);
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw UsageError("run config must be a JSON object");
  RunConfig c;
  const json known = c.to_json();
  reject_unknown(j, known, "run config");
  try {
    take(j, "game_config", c.game_config);
    take(j, "history", c.history);
    take(j, "nonlinearity", c.nonlinearity);
    take(j, "loss", c.loss);
    take(j, "gamma", c.gamma);
    take(j, "eta", c.eta);
    take(j, "epsilon", c.epsilon);
    take(j, "expert_episodes", c.expert_episodes);
    take(j, "random_episodes", c.random_episodes);
    take(j, "test_fraction", c.test_fraction);
    take(j, "daqn_epochs", c.daqn_epochs);
    take(j, "darn_epochs", c.darn_epochs);
    take(j, "dqn_episodes", c.dqn_episodes);
    take(j, "dqn_warmup", c.dqn_warmup);
    take(j, "dqn_capacity", c.dqn_capacity);
    take(j, "batch_size", c.batch_size);
    take(j, "eval_episodes", c.eval_episodes);
    take(j, "trace_length", c.trace_length);
    take(j, "background_removal", c.background_removal);
    take(j, "rica_pretrain", c.rica_pretrain);
    take(j, "warm_start", c.warm_start);
    if (j.contains("seeds")) {
      const json& s = j.at("seeds");
      reject_unknown(s, known.at("seeds"), "run config seeds");
      take(s, "expert", c.seeds.expert);
      take(s, "random", c.seeds.random);
      take(s, "split", c.seeds.split);
      take(s, "init", c.seeds.init);
      take(s, "daqn", c.seeds.daqn);
      take(s, "darn", c.seeds.darn);
      take(s, "dqn", c.seeds.dqn);
      take(s, "eval", c.seeds.eval);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("run config: ") + e.what());
  }
  parse_nonlinearity(c.nonlinearity);
  parse_loss_kind(c.loss);
  if (c.expert_episodes < 2) throw UsageError("run config: need at least 2 expert episodes for a test split");
  if (c.random_episodes < 1) throw UsageError("run config: need at least 1 random episode");
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open run config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_json().dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double RecordSummary::mean_crossings() const {
  if (crossings.empty()) return 0.0;
  return std::accumulate(crossings.begin(), crossings.end(), 0.0) / static_cast<double>(crossings.size());
}

namespace {

RecordSummary record_many(const GameConfig& game, const std::filesystem::path& dir, std::size_t episodes,
                          std::uint64_t seed, RecorderTag tag, const std::string& prefix,
                          const std::function<Policy(std::uint64_t)>& make_policy) {
  ensure_dir(dir);
  RecordSummary out;
  for (std::size_t i = 0; i < episodes; ++i) {
    const std::uint64_t s = seed + i;
    const Recording r = record(game, make_policy(s), s, static_cast<std::size_t>(game.episode_length), tag);
    const auto path = episode_path(dir, prefix, i);
    save_trajectory(r.trajectory, path, r.crossings);
    out.files.push_back(path);
    out.crossings.push_back(r.crossings);
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RecordSummary record_expert(const GameConfig& game, const std::filesystem::path& dir, std::size_t episodes,
                            std::uint64_t seed) {
  return record_many(game, dir, episodes, seed, RecorderTag::scripted, "expert",
                     [&](std::uint64_t) { return expert_policy(game); });
}

RecordSummary record_random(const GameConfig& game, const std::filesystem::path& dir, std::size_t episodes,
                            std::uint64_t seed) {
  return record_many(game, dir, episodes, seed, RecorderTag::random, "random",
                     [](std::uint64_t s) { return random_policy(s); });
}

DaqnStageResult train_daqn_stage(const GameConfig& game, const std::filesystem::path& expert_dir,
                                 const DaqnStageOptions& options, const std::filesystem::path& out,
                                 const std::filesystem::path& report_csv, std::ostream& log) {
  PreprocessOptions pre;
  pre.background_removal = options.background_removal;
  std::vector<ProcessedEpisode> episodes = load_episodes(expert_dir, game, pre);
  auto [train_eps, test_eps] = split(std::move(episodes), options.test_fraction, options.split_seed);
  const ProcessedDataset train = stack(train_eps, options.history);
  const ProcessedDataset test = stack(test_eps, options.history);
  log << "daqn: " << train.size() << " training states, " << test.size() << " test states\n";

  Tensor filters;
  if (options.rica_pretrain) {
    if (options.history != 1) throw UsageError("--rica-pretrain needs --history 1");
    std::vector<Tensor> frames;
    for (const ProcessedEpisode& ep : train_eps) frames.insert(frames.end(), ep.frames.begin(), ep.frames.end());
    const Architecture arch = Architecture::standard(kNumActions, 1, options.nonlinearity);
    const Tensor patches = extract_patches(frames, 10000, arch.conv0_kernel, options.init_seed);
    RicaOptions ro;
    ro.seed = options.init_seed;
    const RicaTrainResult rica = rica_train(patches, arch.conv0_maps, 0.1, 300, ro);
    filters = rica_filters_to_conv(rica.model, arch.conv0_kernel);
    log << "daqn: RICA objective " << rica.objective.front() << " -> " << rica.objective.back() << "\n";
  }
  DaqnStageResult result;
  result.net = build(kNumActions, options.history, options.nonlinearity, options.init_seed,
                     options.rica_pretrain ? &filters : nullptr);
  result.net.config_hash = game.hash();
  DaqnTrainConfig cfg;
  cfg.epochs = options.epochs;
  cfg.eta = options.eta;
  cfg.seed = options.train_seed;
  cfg.options.batch_size = options.batch_size;
  cfg.options.loss = options.loss;
  result.report = train_daqn(result.net, train, test.empty() ? nullptr : &test, cfg, [&](const TrainReportRow& r) {
    log << "daqn epoch " << r.epoch << ": train error " << r.train_error << ", test error " << r.test_error << " ("
        << r.seconds << " s)\n";
    log.flush();
  });
  save_network(result.net, out);
  if (!report_csv.empty()) analysis::export_csv(analysis::to_table(result.report), report_csv);
  return result;
}

DarnStageResult train_darn_stage(const GameConfig& game, const std::filesystem::path& daqn_path,
                                 const std::filesystem::path& random_dir, const std::filesystem::path& expert_dir,
                                 const DarnStageOptions& options, const std::filesystem::path& out,
                                 const std::filesystem::path& report_csv, std::ostream& log) {
  auto daqn = std::make_shared<const Network>(load_network_for(daqn_path, game, NetRole::q_network));
  const OnlinePreprocessor pre = preprocessor_for(load_trajectories(expert_dir, game), options.background_removal);
  std::vector<ProcessedEpisode> episodes = load_episodes(random_dir, game, {}, &pre);
  const std::size_t n = episodes.size();
  auto states = std::make_shared<const ProcessedDataset>(std::move(episodes), daqn->arch.history);
  const TransitionDataset all = make_transitions(states);
  std::vector<std::size_t> train_ids(n > 1 ? n - 1 : n);
  std::iota(train_ids.begin(), train_ids.end(), 0);
  const TransitionDataset train = all.subset_by_episode(train_ids);
  const TransitionDataset heldout = n > 1 ? all.subset_by_episode({n - 1}) : TransitionDataset{};
  log << "darn: " << train.size() << " training transitions, " << heldout.size() << " held out\n";

  DarnStageResult result{make_reward_net(daqn, options.gamma), {}};
  DarnTrainConfig cfg;
  cfg.epochs = options.epochs;
  cfg.eta = options.eta;
  cfg.batch_size = options.batch_size;
  cfg.seed = options.seed;
  const auto t0 = std::chrono::steady_clock::now();
  result.report = darn_train(result.reward, train, cfg, heldout.empty() ? nullptr : &heldout,
                             [&](const DarnReportRow& r) {
                               log << "darn epoch " << r.epoch << ": train rmse " << r.train_rmse
                                   << ", held-out rmse " << r.heldout_rmse << " (" << seconds_since(t0) << " s)\n";
                               log.flush();
                             });
  save_network(result.reward.net, out);
  if (!report_csv.empty()) analysis::export_csv(analysis::to_table(result.report), report_csv);
  return result;
}

Network generalize_stage(const GameConfig& game, const std::filesystem::path& daqn_path,
                         const std::filesystem::path& darn_path, const std::filesystem::path& expert_dir,
                         const DqnConfig& config, bool background_removal, const std::filesystem::path& out,
                         const std::filesystem::path& log_csv, std::ostream& log) {
  auto daqn = std::make_shared<const Network>(load_network_for(daqn_path, game, NetRole::q_network));
  Network darn = load_network_for(darn_path, game, NetRole::reward_network);
  if (darn.arch != daqn->arch) throw UsageError("reward network and DAQN have different architectures");
  RewardNet reward{std::move(darn), daqn, config.gamma};
  const OnlinePreprocessor pre = preprocessor_for(load_trajectories(expert_dir, game), background_removal);
  std::vector<DqnEpisodeLog> logs;
  std::vector<int> crossings;
  const auto t0 = std::chrono::steady_clock::now();
  Network net = dqn_train(game, pre, reward, *daqn, config, [&](const DqnEpisodeLog& l, const FreewayEnv& env) {
    // Evaluation hook: the score is read here, outside the learner.
    logs.push_back(l);
    crossings.push_back(eval::crossings(env.game()));
    log << "dqn episode " << l.episode << ": " << l.updates << " updates, mean TD loss " << l.mean_td_loss
        << ", crossings " << crossings.back() << " (" << seconds_since(t0) << " s)\n";
    log.flush();
  });
  net.config_hash = game.hash();
  save_network(net, out);
  if (!log_csv.empty()) analysis::export_csv(analysis::to_table(logs, crossings), log_csv);
  return net;
}

double EvalSummary::mean() const {
  if (crossings.empty()) return 0.0;
  return std::accumulate(crossings.begin(), crossings.end(), 0.0) / static_cast<double>(crossings.size());
}

int EvalSummary::min() const { return crossings.empty() ? 0 : *std::min_element(crossings.begin(), crossings.end()); }

json EvalSummary::to_json() const { return json{{"mean", mean()}, {"min", min()}, {"episodes", crossings}}; }

EvalSummary evaluate_policy(const GameConfig& game, const std::function<Policy(std::uint64_t)>& make_policy,
                            std::size_t episodes, std::uint64_t seed) {
  EvalSummary out;
  for (std::size_t i = 0; i < episodes; ++i) out.crossings.push_back(eval::play_episode(game, seed + i, make_policy(seed + i)));
  return out;
}

std::function<Policy(std::uint64_t)> named_policy(const std::string& name, const GameConfig& game,
                                                  std::shared_ptr<const Network> net,
                                                  const OnlinePreprocessor* preprocessor) {
  if (name == "expert") return [game](std::uint64_t) { return expert_policy(game); };
  if (name == "random") return [](std::uint64_t s) { return random_policy(s); };
  if (name == "network") {
    if (!net || !preprocessor) throw UsageError("policy 'network' needs --net and --expert");
    return [net, pre = *preprocessor](std::uint64_t) { return network_policy(net, pre); };
  }
  for (analysis::Strategy s : analysis::kStrategies) {
    if (name == analysis::to_string(s)) return [game, s](std::uint64_t) { return analysis::strategy_policy(s, game); };
  }
  throw UsageError("unknown policy '" + name + "' (network, expert, random, always_up, do_nothing, oscillate)");
}

json run_pipeline(const RunConfig& config, const std::filesystem::path& run_dir, std::ostream& log,
                  PipelineTimings* timings) {
  const GameConfig game = load_game(config.game_config);
  ensure_dir(run_dir);
  config.save(run_dir / "run_config.json");
  game.save(run_dir / "game.cfg");
  const auto t0 = std::chrono::steady_clock::now();
  PipelineTimings local;
  PipelineTimings& t = timings ? *timings : local;
  double mark = 0.0;
  // Charges the time since the previous mark to `slot`.
  const auto lap = [&](double& slot) {
    const double now = seconds_since(t0);
    slot += now - mark;
    mark = now;
  };
  const auto stage = [&](int i, const char* what) {
    log << "[" << i << "/6] " << what << " (" << seconds_since(t0) << " s)\n";
    log.flush();
  };

  stage(1, "recording expert demonstrations");
  const RecordSummary expert = record_expert(game, run_dir / "expert", config.expert_episodes, config.seeds.expert);
  log << "expert mean crossings " << expert.mean_crossings() << "\n";

  stage(2, "recording random play");
  record_random(game, run_dir / "random", config.random_episodes, config.seeds.random);

  lap(t.record);
  stage(3, "training DAQN");
  DaqnStageOptions d;
  d.history = config.history;
  d.nonlinearity = parse_nonlinearity(config.nonlinearity);
  d.loss = parse_loss_kind(config.loss);
  d.epochs = config.daqn_epochs;
  d.eta = config.eta;
  d.batch_size = config.batch_size;
  d.test_fraction = config.test_fraction;
  d.split_seed = config.seeds.split;
  d.init_seed = config.seeds.init;
  d.train_seed = config.seeds.daqn;
  d.background_removal = config.background_removal;
  d.rica_pretrain = config.rica_pretrain;
  const DaqnStageResult daqn =
      train_daqn_stage(game, run_dir / "expert", d, run_dir / "daqn.daln", run_dir / "daqn_report.csv", log);

  lap(t.daqn);
  stage(4, "training DARN");
  DarnStageOptions r;
  r.epochs = config.darn_epochs;
  r.eta = config.eta;
  r.gamma = config.gamma;
  r.batch_size = config.batch_size;
  r.seed = config.seeds.darn;
  r.background_removal = config.background_removal;
  const DarnStageResult darn = train_darn_stage(game, run_dir / "daqn.daln", run_dir / "random", run_dir / "expert",
                                                r, run_dir / "darn.daln", run_dir / "darn_report.csv", log);

  lap(t.darn);
  stage(5, "generalizing with replay Q-learning");
  DqnConfig q;
  q.epsilon = config.epsilon;
  q.gamma = config.gamma;
  q.batch_size = config.batch_size;
  q.episodes = config.dqn_episodes;
  q.capacity = config.dqn_capacity;
  q.warmup = config.dqn_warmup;
  q.eta = config.eta;
  q.seed = config.seeds.dqn;
  q.warm_start = config.warm_start;
  const Network generalized =
      generalize_stage(game, run_dir / "daqn.daln", run_dir / "darn.daln", run_dir / "expert", q,
                       config.background_removal, run_dir / "dqn.daln", run_dir / "dqn_log.csv", log);

  lap(t.generalize);
  stage(6, "evaluating");
  const OnlinePreprocessor pre =
      preprocessor_for(load_trajectories(run_dir / "expert", game), config.background_removal);
  const auto daqn_ptr = std::make_shared<const Network>(daqn.net);
  const auto dqn_ptr = std::make_shared<const Network>(generalized);
  json report;
  report["run_config_hash"] = hash_hex(config.hash());
  report["game_config_hash"] = hash_hex(game.hash());
  report["daqn_test_error"] = daqn.report.empty() ? 0.0 : daqn.report.back().test_error;
  report["darn_heldout_rmse"] = darn.report.empty() ? 0.0 : darn.report.back().heldout_rmse;
  json crossings;
  const auto score = [&](const char* key, const std::function<Policy(std::uint64_t)>& make) {
    crossings[key] = evaluate_policy(game, make, config.eval_episodes, config.seeds.eval).to_json();
    log << "  " << key << ": mean crossings " << crossings[key]["mean"].get<double>() << "\n";
  };
  score("random", named_policy("random", game, nullptr, nullptr));
  score("expert", named_policy("expert", game, nullptr, nullptr));
  score("daqn", named_policy("network", game, daqn_ptr, &pre));
  score("generalized", named_policy("network", game, dqn_ptr, &pre));
  report["crossings"] = crossings;
  json traces;
  for (analysis::Strategy s : analysis::kStrategies) {
    const analysis::RewardTrace t =
        analysis::cumulative_reward_trace(darn.reward.net, game, pre, s, config.trace_length, config.seeds.eval);
    analysis::export_csv(analysis::to_table(t), run_dir / (std::string("reward_trace_") + analysis::to_string(s) + ".csv"));
    traces[analysis::to_string(s)] = t.total();
  }
  report["reward_trace_totals"] = traces;
  std::ofstream(run_dir / "evaluation.json") << report.dump(2) << '\n';
  lap(t.evaluate);
  t.total = mark;
  log << "done in " << seconds_since(t0) << " s; report at " << (run_dir / "evaluation.json").string() << "\n";
  return report;
}

}  // namespace dal::cli
