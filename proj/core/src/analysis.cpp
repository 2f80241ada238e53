#include "dal/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dal::analysis {

Tensor influence_map(const Network& net, const Tensor& state, std::optional<std::size_t> action,
                     InfluenceOutput output) {
  const ActivationTrace trace = forward(net, state);
  const std::size_t a = action ? *action : argmax_lowest(trace.probs);
  if (a >= net.arch.num_actions) throw std::invalid_argument("influence_map: action index out of range");
  Tensor grad = Tensor::zeros_like(trace.presoft);
  if (output == InfluenceOutput::presoft) {
    grad[a] = 1.0;
  } else {
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = trace.probs[a] * ((j == a ? 1.0 : 0.0) - trace.probs[j]);
  }
  return input_gradient(net, trace, grad);
}

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::do_nothing: return "do_nothing";
    case Strategy::oscillate: return "oscillate";
    case Strategy::always_up: return "always_up";
    case Strategy::expert: return "expert";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  for (Strategy s : kStrategies) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown strategy '" + name + "' (do_nothing, oscillate, always_up, expert)");
}

Policy strategy_policy(Strategy s, const GameConfig& config) {
  switch (s) {
    case Strategy::do_nothing: return [](const GameState&, const Frame&) { return Action::noop; };
    case Strategy::oscillate:
      return [](const GameState& g, const Frame&) { return g.tick % 2 == 0 ? Action::up : Action::down; };
    case Strategy::always_up: return [](const GameState&, const Frame&) { return Action::up; };
    case Strategy::expert: return expert_policy(config);
  }
  throw std::invalid_argument("strategy_policy: unknown strategy");
}

RewardTrace cumulative_reward_trace(const Network& reward_net, const GameConfig& config,
                                    const OnlinePreprocessor& preprocessor, Strategy strategy, std::size_t length,
                                    std::uint64_t seed) {
  GameConfig game = config;
  game.episode_length = std::max<int>(game.episode_length, static_cast<int>(length));
  const Policy policy = strategy_policy(strategy, game);
  FrameStacker stacker(reward_net.arch.history);
  GameState state = env_reset(game, seed);
  RewardTrace trace;
  trace.strategy = strategy;
  double sum = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    const Frame frame = render(state, game);
    stacker.push(preprocessor(frame));
    const Action a = policy(state, frame);
    const double r = reward(reward_net, stacker.state(), a);
    sum += r;
    trace.actions.push_back(a);
    trace.rewards.push_back(r);
    trace.cumulative.push_back(sum);
    state = env_step(state, a, game).state;
  }
  return trace;
}

std::vector<std::uint8_t> scale_to_bytes(const Tensor& t) {
  std::vector<std::uint8_t> out(t.size(), 128);
  if (t.empty()) return out;
  const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
  const double min = *lo, range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (t[i] - min) / range));
  }
  return out;
}

Tensor plane(const Tensor& t, std::size_t index) {
  if (t.rank() == 2) {
    if (index != 0) throw std::invalid_argument("plane: rank-2 tensor has one plane");
    return t;
  }
  if (t.rank() != 3 || index >= t.dim(0)) throw std::invalid_argument("plane: index out of range");
  Tensor out({t.dim(1), t.dim(2)});
  const std::size_t n = out.size();
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(index * n), n, out.data().begin());
  return out;
}

namespace {

void write_pgm(std::size_t w, std::size_t h, const std::vector<std::uint8_t>& bytes,
               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

void export_pgm(const Tensor& t, const std::filesystem::path& path) {
  if (t.rank() != 2) throw std::invalid_argument("export_pgm: expects a 2-D plane");
  write_pgm(t.dim(1), t.dim(0), scale_to_bytes(t), path);
}

void export_pgm(const Frame& frame, const std::filesystem::path& path) {
  Tensor t({frame.height, frame.width});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = frame.pixels[i];
  export_pgm(t, path);
}

Pgm read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  std::size_t maxval = 0;
  Pgm p;
  if (!(in >> magic >> p.width >> p.height >> maxval) || magic != "P5" || maxval != 255) {
    throw std::runtime_error(path.string() + ": not an 8-bit P5 image");
  }
  in.get();
  p.pixels.resize(p.width * p.height);
  in.read(reinterpret_cast<char*>(p.pixels.data()), static_cast<std::streamsize>(p.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(p.pixels.size())) {
    throw std::runtime_error(path.string() + ": truncated pixel data");
  }
  return p;
}

CsvTable to_table(const TrainReport& report) {
  CsvTable t{{"epoch", "train_error", "test_error"}, {}};
  for (const TrainReportRow& r : report) t.rows.push_back({double(r.epoch), r.train_error, r.test_error});
  return t;
}

CsvTable to_table(const DarnReport& report) {
  CsvTable t{{"epoch", "train_rmse", "heldout_rmse"}, {}};
  for (const DarnReportRow& r : report) t.rows.push_back({double(r.epoch), r.train_rmse, r.heldout_rmse});
  return t;
}

CsvTable to_table(const RewardTrace& trace) {
  CsvTable t{{"tick", "action", "reward", "cumulative"}, {}};
  for (std::size_t i = 0; i < trace.rewards.size(); ++i) {
    t.rows.push_back({double(i), double(action_index(trace.actions[i])), trace.rewards[i], trace.cumulative[i]});
  }
  return t;
}

CsvTable to_table(const std::vector<DqnEpisodeLog>& logs, const std::vector<int>& crossings) {
  if (logs.size() != crossings.size()) throw std::invalid_argument("to_table: one crossings value per episode");
  CsvTable t{{"episode", "step", "epsilon", "mean_td_loss", "crossings"}, {}};
  for (std::size_t i = 0; i < logs.size(); ++i) {
    t.rows.push_back(
        {double(logs[i].episode), double(logs[i].steps), logs[i].epsilon, logs[i].mean_td_loss, double(crossings[i])});
  }
  return t;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void export_csv(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::invalid_argument("export_csv: row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  std::stringstream header(line);
  for (std::string cell; std::getline(header, cell, ',');) t.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(std::stod(cell));
    if (row.size() != t.header.size()) throw std::runtime_error(path.string() + ": ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace dal::analysis
