#include "dal/envs.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace dal {

namespace detail {
struct GameStateAccess {
  static int& crossings(GameState& s) { return s.crossings_; }
};
}  // namespace detail

Action action_from_index(std::size_t index) {
  if (index >= kNumActions) throw std::invalid_argument("action index " + std::to_string(index) + " out of range");
  return static_cast<Action>(index);
}

const char* to_string(Action a) {
  switch (a) {
    case Action::up: return "up";
    case Action::down: return "down";
    case Action::noop: return "noop";
  }
  return "?";
}

GameConfig GameConfig::defaults() {
  GameConfig c;
  c.lane_speeds = {-1, -2, -2, -3, -3, 3, 3, 2, 2, 1};
  c.car_spacing = {42, 28, 42, 28, 42, 42, 28, 42, 28, 42};
  return c;
}

int GameConfig::cars_in_lane(int lane) const {
  return frame_size / car_spacing.at(static_cast<std::size_t>(lane - 1));
}

void GameConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw std::invalid_argument("game config: " + msg); };
  if (n_lanes < 1) fail("n_lanes must be >= 1");
  if (lane_speeds.size() != static_cast<std::size_t>(n_lanes)) fail("lane_speeds needs one entry per lane");
  if (car_spacing.size() != static_cast<std::size_t>(n_lanes)) fail("car_spacing needs one entry per lane");
  if (frame_size < 16) fail("frame_size must be >= 16");
  if ((n_lanes + 2) * band_height() > frame_size) fail("lanes do not fit in the frame");
  if (car_length < 1 || car_length >= frame_size) fail("car_length out of range");
  for (int s : car_spacing) {
    if (s <= car_length || s > frame_size) fail("car_spacing must exceed car_length and fit the frame");
  }
  for (int v : lane_speeds) {
    if (v <= -frame_size || v >= frame_size) fail("lane speed magnitude must be below frame_size");
  }
  if (episode_length < 1) fail("episode_length must be >= 1");
  if (stun_frames < 0) fail("stun_frames must be >= 0");
  if (pushback_lanes < 0) fail("pushback_lanes must be >= 0");
}

namespace {

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& text) {
  int value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw std::invalid_argument("game config: " + key + " expects an integer, got '" + text + "'");
  }
  return value;
}

std::vector<int> parse_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  return out;
}

int floor_mod(long long a, int m) {
  long long r = a % m;
  return static_cast<int>(r < 0 ? r + m : r);
}

}  // namespace

std::string GameConfig::to_text() const {
  std::ostringstream os;
  os << "n_lanes=" << n_lanes << '\n'
     << "lane_speeds=" << join(lane_speeds) << '\n'
     << "car_spacing=" << join(car_spacing) << '\n'
     << "car_length=" << car_length << '\n'
     << "episode_length=" << episode_length << '\n'
     << "stun_frames=" << stun_frames << '\n'
     << "pushback_lanes=" << pushback_lanes << '\n'
     << "frame_size=" << frame_size << '\n';
  return os.str();
}

GameConfig GameConfig::parse(const std::string& text) {
  GameConfig c = defaults();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("game config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "n_lanes") c.n_lanes = parse_int(key, value);
    else if (key == "lane_speeds") c.lane_speeds = parse_list(key, value);
    else if (key == "car_spacing") c.car_spacing = parse_list(key, value);
    else if (key == "car_length") c.car_length = parse_int(key, value);
    else if (key == "episode_length") c.episode_length = parse_int(key, value);
    else if (key == "stun_frames") c.stun_frames = parse_int(key, value);
    else if (key == "pushback_lanes") c.pushback_lanes = parse_int(key, value);
    else if (key == "frame_size") c.frame_size = parse_int(key, value);
    else throw std::invalid_argument("game config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

GameConfig GameConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open game config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void GameConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write game config " + path.string());
  out << to_text();
}

std::uint64_t GameConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

GameState env_reset(const GameConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> phase(0, config.frame_size - 1);
  GameState s;
  s.agent_lane = config.start_lane();
  s.car_offsets.resize(static_cast<std::size_t>(config.n_lanes));
  for (int& o : s.car_offsets) o = phase(rng);
  return s;
}

int car_position(const GameConfig& config, const GameState& state, int lane, int k, int tick) {
  const auto i = static_cast<std::size_t>(lane - 1);
  const long long x = static_cast<long long>(state.car_offsets.at(i)) +
                      static_cast<long long>(config.lane_speeds[i]) * tick +
                      static_cast<long long>(k) * config.car_spacing[i];
  return floor_mod(x, config.frame_size);
}

bool agent_cell_occupied(const GameConfig& config, const GameState& state, int lane, int tick) {
  if (lane < 1 || lane > config.n_lanes) return false;
  const int w = config.frame_size;
  const int a0 = config.agent_column();
  for (int k = 0; k < config.cars_in_lane(lane); ++k) {
    // Offset of the agent's left edge from the car's left edge, wrapped.
    const int d = floor_mod(a0 - car_position(config, state, lane, k, tick), w);
    if (d < config.car_length || d > w - config.agent_size()) return true;
  }
  return false;
}

bool is_terminal(const GameState& state, const GameConfig& config) { return state.tick >= config.episode_length; }

StepResult env_step(const GameState& state, Action action, const GameConfig& config) {
  if (is_terminal(state, config)) throw std::logic_error("env_step: episode already terminated");
  StepResult r{state, false};
  GameState& s = r.state;
  ++s.tick;
  if (s.stun_remaining > 0) {
    --s.stun_remaining;
  } else {
    if (action == Action::up) --s.agent_lane;
    else if (action == Action::down) s.agent_lane = std::min(s.agent_lane + 1, config.start_lane());
    if (s.agent_lane == 0) {
      ++detail::GameStateAccess::crossings(s);
      s.agent_lane = config.start_lane();
    } else if (agent_cell_occupied(config, s, s.agent_lane, s.tick)) {
      s.agent_lane = std::min(s.agent_lane + config.pushback_lanes, config.start_lane());
      s.stun_remaining = config.stun_frames;
    }
  }
  r.terminal = is_terminal(s, config);
  return r;
}

int lane_top_row(const GameConfig& config, int lane) { return config.top_margin() + lane * config.band_height(); }

Frame render(const GameState& state, const GameConfig& config) {
  const auto n = static_cast<std::size_t>(config.frame_size);
  Frame f{n, n, std::vector<std::uint8_t>(n * n, kBackgroundValue)};
  for (int lane = 0; lane <= config.start_lane() + 1; ++lane) {
    const int row = lane_top_row(config, lane);
    if (row >= config.frame_size) break;
    std::fill_n(f.pixels.begin() + static_cast<std::ptrdiff_t>(row) * config.frame_size, n, kDividerValue);
  }
  const auto fill_block = [&](int top, int left, int width, std::uint8_t value) {
    for (int r = top; r < top + config.agent_size(); ++r) {
      for (int c = left; c < left + width; ++c) {
        f.at(static_cast<std::size_t>(r), static_cast<std::size_t>(floor_mod(c, config.frame_size))) = value;
      }
    }
  };
  for (int lane = 1; lane <= config.n_lanes; ++lane) {
    for (int k = 0; k < config.cars_in_lane(lane); ++k) {
      fill_block(lane_top_row(config, lane) + 1, car_position(config, state, lane, k, state.tick), config.car_length,
                 kCarValue);
    }
  }
  fill_block(lane_top_row(config, state.agent_lane) + 1, config.agent_column(), config.agent_size(), kAgentValue);
  return f;
}

Action scripted_expert(const GameState& state, const GameConfig& config, const ExpertOptions& options) {
  const int target = state.agent_lane - 1;
  for (int dt = 1; dt <= options.lookahead; ++dt) {
    if (agent_cell_occupied(config, state, target, state.tick + dt)) return Action::noop;
  }
  return Action::up;
}

Action random_agent(std::mt19937_64& rng) {
  return static_cast<Action>(std::uniform_int_distribution<int>(0, kNumActions - 1)(rng));
}

Policy expert_policy(const GameConfig& config, const ExpertOptions& options) {
  return [config, options](const GameState& s, const Frame&) { return scripted_expert(s, config, options); };
}

Policy random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng](const GameState&, const Frame&) { return random_agent(*rng); };
}

namespace eval {

namespace {
std::atomic<std::uint64_t> g_reads{0};
}

int crossings(const GameState& state) {
  g_reads.fetch_add(1, std::memory_order_relaxed);
  return state.crossings_;
}

std::uint64_t crossings_reads() { return g_reads.load(std::memory_order_relaxed); }

int play_episode(const GameConfig& config, std::uint64_t seed, const Policy& policy) {
  GameState s = env_reset(config, seed);
  while (!is_terminal(s, config)) s = env_step(s, policy(s, render(s, config)), config).state;
  return crossings(s);
}

}  // namespace eval

}  // namespace dal
