#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace dal {

// Encoding is shared by trajectory files, the recorder protocol and network
// output units.
enum class Action : std::uint8_t { up = 0, down = 1, noop = 2 };
inline constexpr std::size_t kNumActions = 3;

Action action_from_index(std::size_t index);
inline std::size_t action_index(Action a) { return static_cast<std::size_t>(a); }
const char* to_string(Action a);

// MiniFreeway: lanes 1..n_lanes are road, lane n_lanes+1 is the start side and
// lane 0 the far side. Lane 1 is drawn at the top of the frame.
struct GameConfig {
  int n_lanes = 10;
  std::vector<int> lane_speeds;  // pixels per tick, lane 1 first; > 0 moves right
  std::vector<int> car_spacing;  // pixels between consecutive cars in a lane
  int car_length = 8;
  int episode_length = 540;
  int stun_frames = 12;
  int pushback_lanes = 2;
  int frame_size = 83;

  static GameConfig defaults();

  int start_lane() const { return n_lanes + 1; }
  int band_height() const { return 6; }
  int top_margin() const { return (frame_size - (n_lanes + 2) * band_height()) / 2; }
  int agent_size() const { return 4; }
  int agent_column() const { return frame_size / 2 - agent_size() / 2; }
  int cars_in_lane(int lane) const;

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  // Canonical key=value text; parse accepts '#' comments and blank lines and
  // fills unspecified keys from defaults().
  std::string to_text() const;
  static GameConfig parse(const std::string& text);
  static GameConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // FNV-1a over to_text().
  std::uint64_t hash() const;

  friend bool operator==(const GameConfig&, const GameConfig&) = default;
};

std::string hash_hex(std::uint64_t hash);

class GameState;
namespace eval {
int crossings(const GameState& state);
}
namespace detail {
struct GameStateAccess;
}

// Value-semantic simulation state. The score is private: only the evaluation
// interface can read it.
class GameState {
 public:
  int agent_lane = 0;
  std::vector<int> car_offsets;  // per-lane phase at tick 0
  int stun_remaining = 0;
  int tick = 0;

  friend bool operator==(const GameState&, const GameState&) = default;

 private:
  int crossings_ = 0;
  friend int eval::crossings(const GameState&);
  friend struct detail::GameStateAccess;
};

GameState env_reset(const GameConfig& config, std::uint64_t seed);

struct StepResult {
  GameState state;
  bool terminal = false;
};

// Advances one tick. Throws std::logic_error if the episode already ended.
StepResult env_step(const GameState& state, Action action, const GameConfig& config);
bool is_terminal(const GameState& state, const GameConfig& config);

// Left edge of car k in `lane` at `tick`, in [0, frame_size).
int car_position(const GameConfig& config, const GameState& state, int lane, int k, int tick);
// True if any car of `lane` overlaps the agent's columns at `tick`.
bool agent_cell_occupied(const GameConfig& config, const GameState& state, int lane, int tick);

struct Frame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  std::uint8_t& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::uint8_t kBackgroundValue = 40;
inline constexpr std::uint8_t kDividerValue = 90;
inline constexpr std::uint8_t kCarValue = 200;
inline constexpr std::uint8_t kAgentValue = 255;

Frame render(const GameState& state, const GameConfig& config);
// Top pixel row of a lane's band; the divider occupies that row.
int lane_top_row(const GameConfig& config, int lane);

struct ExpertOptions {
  int lookahead = 2;  // ticks the target lane must stay clear at the agent's column
};

// Gap-waiting expert: up when the next lane stays clear for the lookahead
// window, otherwise noop. Never returns down.
Action scripted_expert(const GameState& state, const GameConfig& config, const ExpertOptions& options = {});

Action random_agent(std::mt19937_64& rng);

// A controller sees the simulation state (for scripted agents) and the
// rendered frame (for learned agents).
using Policy = std::function<Action(const GameState&, const Frame&)>;

Policy expert_policy(const GameConfig& config, const ExpertOptions& options = {});
Policy random_policy(std::uint64_t seed);

namespace eval {

// Number of times eval::crossings has been called in this process.
std::uint64_t crossings_reads();

// Plays a full episode and returns the crossings count.
int play_episode(const GameConfig& config, std::uint64_t seed, const Policy& policy);

}  // namespace eval

}  // namespace dal
