#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"

#include "dal/envs.hpp"
#include "dal/trajectory.hpp"

namespace dal::cli {

// One human play session. Each accepted action is stored with the frame the
// player saw when choosing it.
class RecorderSession {
 public:
  RecorderSession(GameConfig game, std::filesystem::path out_dir, std::uint64_t seed);

  // {frame, tick, crossings, terminal}; frame is base64 of the row-major bytes.
  nlohmann::json state() const;
  // Throws std::invalid_argument for a bad action and std::logic_error once
  // the episode is over.
  nlohmann::json act(std::size_t action);
  // Writes the recorded episode as a human-tagged DALT file, then starts the
  // next episode with seed + 1. Returns {file, ticks, crossings}.
  nlohmann::json finish();

  std::uint64_t seed() const { return seed_; }
  std::size_t episodes_written() const { return episodes_; }

 private:
  void reset();

  GameConfig game_;
  std::filesystem::path out_dir_;
  std::uint64_t seed_;
  std::size_t episodes_ = 0;
  GameState state_;
  Frame frame_;
  Trajectory trajectory_;
  bool terminal_ = false;
};

// HTTP front end for a RecorderSession. Requests are served one at a time.
class RecorderServer {
 public:
  RecorderServer(GameConfig game, std::filesystem::path out_dir, std::uint64_t seed);
  ~RecorderServer();
  RecorderServer(const RecorderServer&) = delete;
  RecorderServer& operator=(const RecorderServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dal::cli
