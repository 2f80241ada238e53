#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "common.hpp"
#include "dal/analysis.hpp"
#include "dal/darn.hpp"
#include "dal/dqn_replay.hpp"

namespace dal::cli {

// Every knob of a pipeline run. Serialized next to the artifacts it produced.
struct RunConfig {
  std::string game_config;  // path to a key=value game config; empty for defaults
  std::size_t history = 2;
  std::string nonlinearity = "tanh";
  std::string loss = "cross_entropy";
  double gamma = 0.9;
  double eta = 0.01;
  double epsilon = 0.05;
  std::size_t expert_episodes = 20;
  std::size_t random_episodes = 10;
  double test_fraction = 0.1;
  std::size_t daqn_epochs = 4;
  std::size_t darn_epochs = 4;
  std::size_t dqn_episodes = 2;
  std::size_t dqn_warmup = 1000;
  std::size_t dqn_capacity = 10000;
  std::size_t batch_size = 32;
  std::size_t eval_episodes = 5;
  std::size_t trace_length = 540;
  bool background_removal = true;
  bool rica_pretrain = false;
  bool warm_start = true;
  struct Seeds {
    std::uint64_t expert = 0;
    std::uint64_t random = 5000;
    std::uint64_t split = 0;
    std::uint64_t init = 0;
    std::uint64_t daqn = 0;
    std::uint64_t darn = 0;
    std::uint64_t dqn = 0;
    std::uint64_t eval = 1000;
  } seeds;

  nlohmann::json to_json() const;
  // Unknown keys are rejected; missing keys keep their defaults.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  // FNV-1a over the canonical JSON text.
  std::uint64_t hash() const;
};

struct RecordSummary {
  std::vector<std::filesystem::path> files;
  std::vector<std::uint32_t> crossings;
  double mean_crossings() const;
};

// Episodes use env seeds seed, seed+1, ...; random play also seeds its policy
// with the episode seed.
RecordSummary record_expert(const GameConfig& game, const std::filesystem::path& dir, std::size_t episodes,
                            std::uint64_t seed);
RecordSummary record_random(const GameConfig& game, const std::filesystem::path& dir, std::size_t episodes,
                            std::uint64_t seed);

struct DaqnStageOptions {
  std::size_t history = 2;
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  LossKind loss = LossKind::cross_entropy;
  std::size_t epochs = 4;
  double eta = 0.01;
  std::size_t batch_size = 32;
  double test_fraction = 0.1;
  std::uint64_t split_seed = 0;
  std::uint64_t init_seed = 0;
  std::uint64_t train_seed = 0;
  bool background_removal = true;
  bool rica_pretrain = false;
};

struct DaqnStageResult {
  Network net;
  TrainReport report;
};

DaqnStageResult train_daqn_stage(const GameConfig& game, const std::filesystem::path& expert_dir,
                                 const DaqnStageOptions& options, const std::filesystem::path& out,
                                 const std::filesystem::path& report_csv, std::ostream& log);

struct DarnStageOptions {
  std::size_t epochs = 4;
  double eta = 0.01;
  double gamma = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool background_removal = true;
};

struct DarnStageResult {
  RewardNet reward;
  DarnReport report;
};

// The last random episode is held out for the reported RMSE when there are
// at least two.
DarnStageResult train_darn_stage(const GameConfig& game, const std::filesystem::path& daqn_path,
                                 const std::filesystem::path& random_dir, const std::filesystem::path& expert_dir,
                                 const DarnStageOptions& options, const std::filesystem::path& out,
                                 const std::filesystem::path& report_csv, std::ostream& log);

Network generalize_stage(const GameConfig& game, const std::filesystem::path& daqn_path,
                         const std::filesystem::path& darn_path, const std::filesystem::path& expert_dir,
                         const DqnConfig& config, bool background_removal, const std::filesystem::path& out,
                         const std::filesystem::path& log_csv, std::ostream& log);

struct EvalSummary {
  std::vector<int> crossings;
  double mean() const;
  int min() const;
  nlohmann::json to_json() const;
};

// Episodes use env seeds seed, seed+1, ...
EvalSummary evaluate_policy(const GameConfig& game, const std::function<Policy(std::uint64_t)>& make_policy,
                            std::size_t episodes, std::uint64_t seed);

// Named policies: expert, random, always_up, do_nothing, oscillate, network.
std::function<Policy(std::uint64_t)> named_policy(const std::string& name, const GameConfig& game,
                                                  std::shared_ptr<const Network> net,
                                                  const OnlinePreprocessor* preprocessor);

// Wall-clock seconds per stage; kept out of the written report.
struct PipelineTimings {
  double record = 0.0, daqn = 0.0, darn = 0.0, generalize = 0.0, evaluate = 0.0, total = 0.0;
};

// Full run: D_E, D_G, DAQN, DARN, generalized network, evaluation report.
nlohmann::json run_pipeline(const RunConfig& config, const std::filesystem::path& run_dir, std::ostream& log,
                            PipelineTimings* timings = nullptr);

}  // namespace dal::cli
