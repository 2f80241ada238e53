#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dal/daqn.hpp"
#include "dal/darn.hpp"
#include "dal/dqn_replay.hpp"
#include "dal/envs.hpp"
#include "dal/trajectory.hpp"

namespace dal::analysis {

enum class InfluenceOutput { presoft, probability };

// Gradient of one action's output with respect to every input pixel, shaped
// like the network input. Without an action the greedy action is used.
Tensor influence_map(const Network& net, const Tensor& state, std::optional<std::size_t> action = std::nullopt,
                     InfluenceOutput output = InfluenceOutput::presoft);

enum class Strategy { do_nothing, oscillate, always_up, expert };
inline constexpr Strategy kStrategies[] = {Strategy::do_nothing, Strategy::oscillate, Strategy::always_up,
                                           Strategy::expert};

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

// oscillate alternates up and down, starting with up.
Policy strategy_policy(Strategy s, const GameConfig& config);

struct RewardTrace {
  Strategy strategy = Strategy::do_nothing;
  std::vector<Action> actions;
  std::vector<double> rewards;     // r(s_t, a_t)
  std::vector<double> cumulative;  // prefix sums of rewards
  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

// Plays `length` ticks under the strategy (the episode is extended if needed)
// and scores each state and action with the reward network.
RewardTrace cumulative_reward_trace(const Network& reward_net, const GameConfig& config,
                                    const OnlinePreprocessor& preprocessor, Strategy strategy, std::size_t length,
                                    std::uint64_t seed);

// Min-max scaled to 0..255 with rounding; constant input maps to 128.
std::vector<std::uint8_t> scale_to_bytes(const Tensor& plane);
// One (h, w) plane of a rank-2 or rank-3 tensor.
Tensor plane(const Tensor& t, std::size_t index);

struct Pgm {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// Binary P5: "P5\n<w> <h>\n255\n" followed by row-major bytes.
void export_pgm(const Tensor& plane, const std::filesystem::path& path);
void export_pgm(const Frame& frame, const std::filesystem::path& path);
Pgm read_pgm(const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable to_table(const TrainReport& report);
CsvTable to_table(const DarnReport& report);
CsvTable to_table(const RewardTrace& trace);
// One row per episode; crossings come from the evaluation hook, one per log.
CsvTable to_table(const std::vector<DqnEpisodeLog>& logs, const std::vector<int>& crossings);

// Header row then one row per record, numbers at 17 significant digits.
void export_csv(const CsvTable& table, const std::filesystem::path& path);
CsvTable read_csv(const std::filesystem::path& path);
std::string format_number(double v);

}  // namespace dal::analysis
