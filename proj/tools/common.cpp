#include "common.hpp"

#include <algorithm>
#include <cstdio>

namespace dal::cli {

GameConfig load_game(const std::string& path) {
  if (path.empty()) return GameConfig::defaults();
  if (!std::filesystem::exists(path)) throw UsageError("game config not found: " + path);
  return GameConfig::load(path);
}

std::vector<std::filesystem::path> list_dalt(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".dalt") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw UsageError("no .dalt files in " + dir.string());
  return out;
}

std::filesystem::path episode_path(const std::filesystem::path& dir, const std::string& prefix, std::size_t index) {
  char name[64];
  std::snprintf(name, sizeof name, "%s_%04zu.dalt", prefix.c_str(), index);
  return dir / name;
}

namespace {

void check_hash(const std::filesystem::path& file, std::uint64_t found, const GameConfig& game) {
  if (found != game.hash()) {
    throw UsageError("config hash mismatch: " + file.string() + " was recorded with cfg=" + hash_hex(found) +
                     ", this run uses cfg=" + hash_hex(game.hash()));
  }
}

}  // namespace

std::vector<Trajectory> load_trajectories(const std::filesystem::path& dir, const GameConfig& game) {
  std::vector<Trajectory> out;
  for (const auto& path : list_dalt(dir)) {
    Trajectory t = load_trajectory(path);
    check_hash(path, t.meta.config_hash, game);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<ProcessedEpisode> load_episodes(const std::filesystem::path& dir, const GameConfig& game,
                                            const PreprocessOptions& options, const OnlinePreprocessor* fixed) {
  std::vector<ProcessedEpisode> out;
  for (const auto& path : list_dalt(dir)) {
    const TrajectoryFileInfo info = inspect_trajectory(path);
    check_hash(path, info.meta.config_hash, game);
    if (info.normalized) {
      out.push_back(load_processed(path));
    } else if (fixed) {
      out.push_back(preprocess(load_trajectory(path), *fixed, options));
    } else {
      out.push_back(preprocess(load_trajectory(path), options));
    }
  }
  return out;
}

OnlinePreprocessor preprocessor_for(const std::vector<Trajectory>& demos, bool background_removal) {
  PreprocessOptions options;
  options.background_removal = background_removal;
  return OnlinePreprocessor::from_demonstrations(demos, options);
}

Network load_network_for(const std::filesystem::path& path, const GameConfig& game, std::optional<NetRole> role) {
  if (!std::filesystem::exists(path)) throw UsageError("network file not found: " + path.string());
  Network net = load_network(path);
  if (net.config_hash != game.hash()) {
    throw UsageError("config hash mismatch: " + path.string() + " was trained with cfg=" + hash_hex(net.config_hash) +
                     ", this run uses cfg=" + hash_hex(game.hash()));
  }
  if (role && net.role != *role) {
    throw UsageError(path.string() + ": expected a " +
                     std::string(*role == NetRole::q_network ? "Q network" : "reward network"));
  }
  return net;
}

void ensure_dir(const std::filesystem::path& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

}  // namespace dal::cli
