#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dal/envs.hpp"
#include "dal/tensor.hpp"

namespace dal {

enum class RecorderTag : std::uint8_t { scripted = 0, human = 1, random = 2 };
const char* to_string(RecorderTag tag);
RecorderTag parse_recorder_tag(const std::string& text);

struct TrajectoryMeta {
  std::string game = "minifreeway";
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  RecorderTag recorder = RecorderTag::scripted;

  // "<game>;cfg=<16 hex>;rec=<tag>", the game-id string stored in files.
  std::string game_id() const;
  static TrajectoryMeta from_game_id(const std::string& id, std::uint64_t seed);

  friend bool operator==(const TrajectoryMeta&, const TrajectoryMeta&) = default;
};

// One episode of raw frames with the action taken at each frame. Holds no
// reward or score.
struct Trajectory {
  std::vector<Frame> frames;
  std::vector<Action> actions;
  TrajectoryMeta meta;

  std::size_t size() const { return frames.size(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Recording {
  Trajectory trajectory;
  std::uint32_t crossings = 0;  // evaluation-only, written as the file trailer
};

// Rolls `policy` from env_reset(config, seed) for up to `length` ticks.
Recording record(const GameConfig& config, const Policy& policy, std::uint64_t seed, std::size_t length,
                 RecorderTag tag);

enum class BackgroundStatistic : std::uint8_t { median, mean };

struct PreprocessOptions {
  bool subsample = false;  // keep every 4th frame; for recordings at the raw frame rate
  std::size_t subsample_stride = 4;
  std::size_t target_size = 83;
  bool background_removal = true;
  BackgroundStatistic background = BackgroundStatistic::median;
};

// Frames normalized to [0,1], one (H, W) tensor each. Produced only by
// preprocess (or loaded from a normalized file), so raw data cannot be fed
// through the pipeline twice.
struct ProcessedEpisode {
  std::vector<Tensor> frames;
  std::vector<Action> actions;
  TrajectoryMeta meta;
  bool background_removed = false;

  std::size_t size() const { return frames.size(); }
  friend bool operator==(const ProcessedEpisode&, const ProcessedEpisode&) = default;
};

ProcessedEpisode preprocess(const Trajectory& trajectory, const PreprocessOptions& options = {});

class OnlinePreprocessor;
// Same frame selection, but every frame goes through a fixed preprocessor, so
// the episode shares the background of the data the learner was trained on.
ProcessedEpisode preprocess(const Trajectory& trajectory, const OnlinePreprocessor& preprocessor,
                            const PreprocessOptions& options = {});

// Per-pixel statistic over frames, in raw intensity units.
std::vector<double> background_image(const std::vector<Frame>& frames, BackgroundStatistic stat);
Frame resize_nearest(const Frame& frame, std::size_t size);

// Normalizes live frames for a learner: background subtraction against a
// fixed image, then division by 255.
class OnlinePreprocessor {
 public:
  OnlinePreprocessor() = default;
  OnlinePreprocessor(std::vector<double> background, std::size_t size, bool remove_background);

  // Background pooled over every frame of the demonstrations the learner was
  // trained on.
  static OnlinePreprocessor from_demonstrations(const std::vector<Trajectory>& demos,
                                                const PreprocessOptions& options);

  const std::vector<double>& background() const { return background_; }
  bool removes_background() const { return remove_background_; }
  std::size_t size() const { return size_; }

  Tensor operator()(const Frame& frame) const;

 private:
  std::vector<double> background_;
  std::size_t size_ = 83;
  bool remove_background_ = true;
};

// Rolling window of the most recent `history` processed frames, left-padded
// by repeating the first frame of the episode.
class FrameStacker {
 public:
  explicit FrameStacker(std::size_t history) : history_(history) {}
  void reset() { frames_.clear(); }
  void push(Tensor frame);
  Tensor state() const;

 private:
  std::size_t history_;
  std::vector<Tensor> frames_;
};

// Stacked states over whole episodes, materialized on demand so memory stays
// one copy of each frame.
class ProcessedDataset {
 public:
  ProcessedDataset() = default;
  ProcessedDataset(std::vector<ProcessedEpisode> episodes, std::size_t history);

  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }
  std::size_t history() const { return history_; }
  std::size_t frame_size() const;
  std::size_t episode_count() const { return episodes_.size(); }
  const ProcessedEpisode& episode(std::size_t e) const { return episodes_.at(e); }
  std::size_t episode_begin(std::size_t e) const { return begin_.at(e); }

  // (history, H, W) state for global index i.
  Tensor state(std::size_t i) const;
  Tensor state(std::size_t episode, std::size_t t) const;
  Action action(std::size_t i) const;
  std::pair<std::size_t, std::size_t> locate(std::size_t i) const { return index_.at(i); }

 private:
  std::vector<ProcessedEpisode> episodes_;
  std::size_t history_ = 1;
  std::vector<std::size_t> begin_;
  std::vector<std::pair<std::size_t, std::size_t>> index_;  // (episode, t)
};

ProcessedDataset stack(std::vector<ProcessedEpisode> episodes, std::size_t history);
ProcessedDataset stack(const std::vector<Tensor>& frames, const std::vector<Action>& actions, std::size_t history);

// (s, a, s') triples of consecutive states inside each episode.
class TransitionDataset {
 public:
  struct Item {
    std::size_t from;  // dataset index of s
    std::size_t to;    // dataset index of s'
    Action action;
  };

  TransitionDataset() = default;
  explicit TransitionDataset(std::shared_ptr<const ProcessedDataset> states);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Item& item(std::size_t i) const { return items_.at(i); }
  const ProcessedDataset& states() const { return *states_; }
  Tensor s(std::size_t i) const { return states_->state(items_.at(i).from); }
  Tensor s_next(std::size_t i) const { return states_->state(items_.at(i).to); }
  Action action(std::size_t i) const { return items_.at(i).action; }

  // Transitions whose s lies in the given episodes (for held-out splits).
  TransitionDataset subset_by_episode(const std::vector<std::size_t>& episodes) const;

 private:
  std::shared_ptr<const ProcessedDataset> states_;
  std::vector<Item> items_;
};

TransitionDataset make_transitions(std::shared_ptr<const ProcessedDataset> states);

// DALT trajectory files. Raw and normalized frames share the layout and differ
// in flag bit 0; the trailing crossings count is for evaluation only.
void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path, std::uint32_t crossings = 0);
void save_processed(const ProcessedEpisode& episode, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);
ProcessedEpisode load_processed(const std::filesystem::path& path);
std::uint32_t read_evaluation_trailer(const std::filesystem::path& path);
// Reads only the header: metadata and whether the frames are normalized.
struct TrajectoryFileInfo {
  TrajectoryMeta meta;
  std::size_t height = 0, width = 0, count = 0;
  bool normalized = false;
  bool background_removed = false;
};
TrajectoryFileInfo inspect_trajectory(const std::filesystem::path& path);

inline constexpr std::uint16_t kTrajectoryFormatVersion = 1;
std::size_t trajectory_header_bytes(const TrajectoryMeta& meta);

// Whole-episode split; the test side gets round(test_fraction * n) episodes,
// clamped so both sides are nonempty.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double test_fraction,
                                                                             std::uint64_t seed);

template <typename Episode>
std::pair<std::vector<Episode>, std::vector<Episode>> split(const std::vector<Episode>& episodes,
                                                            double test_fraction, std::uint64_t seed) {
  auto [train_idx, test_idx] = split_indices(episodes.size(), test_fraction, seed);
  std::pair<std::vector<Episode>, std::vector<Episode>> out;
  for (std::size_t i : train_idx) out.first.push_back(episodes[i]);
  for (std::size_t i : test_idx) out.second.push_back(episodes[i]);
  return out;
}

// One line per state: index,episode,t,action.
void write_index_csv(const ProcessedDataset& dataset, const std::filesystem::path& path);

}  // namespace dal
