#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dal/daqn.hpp"
#include "dal/envs.hpp"
#include "dal/trajectory.hpp"

namespace dal::cli {

// Bad input from the user: missing files, mismatched configs, invalid flags.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

GameConfig load_game(const std::string& path);

// *.dalt files directly inside `dir`, sorted by name.
std::vector<std::filesystem::path> list_dalt(const std::filesystem::path& dir);

std::filesystem::path episode_path(const std::filesystem::path& dir, const std::string& prefix, std::size_t index);

// Raw trajectories recorded under `game`; any other config hash is refused.
std::vector<Trajectory> load_trajectories(const std::filesystem::path& dir, const GameConfig& game);

// Processed episodes from a directory of raw or normalized files. Raw files go
// through per-episode preprocessing, or through `fixed` when given.
std::vector<ProcessedEpisode> load_episodes(const std::filesystem::path& dir, const GameConfig& game,
                                            const PreprocessOptions& options,
                                            const OnlinePreprocessor* fixed = nullptr);

OnlinePreprocessor preprocessor_for(const std::vector<Trajectory>& demos, bool background_removal);

// Network file whose recorded config hash must match `game`.
Network load_network_for(const std::filesystem::path& path, const GameConfig& game,
                         std::optional<NetRole> role = std::nullopt);

void ensure_dir(const std::filesystem::path& dir);

}  // namespace dal::cli
