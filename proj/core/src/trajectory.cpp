#include "dal/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace dal {

const char* to_string(RecorderTag tag) {
  switch (tag) {
    case RecorderTag::scripted: return "scripted";
    case RecorderTag::human: return "human";
    case RecorderTag::random: return "random";
  }
  return "?";
}

RecorderTag parse_recorder_tag(const std::string& text) {
  if (text == "scripted") return RecorderTag::scripted;
  if (text == "human") return RecorderTag::human;
  if (text == "random") return RecorderTag::random;
  throw std::invalid_argument("unknown recorder tag '" + text + "'");
}

std::string TrajectoryMeta::game_id() const {
  return game + ";cfg=" + hash_hex(config_hash) + ";rec=" + to_string(recorder);
}

TrajectoryMeta TrajectoryMeta::from_game_id(const std::string& id, std::uint64_t seed) {
  TrajectoryMeta m;
  m.seed = seed;
  std::stringstream ss(id);
  std::string part;
  bool first = true;
  while (std::getline(ss, part, ';')) {
    if (first) {
      m.game = part;
      first = false;
    } else if (part.rfind("cfg=", 0) == 0) {
      m.config_hash = std::stoull(part.substr(4), nullptr, 16);
    } else if (part.rfind("rec=", 0) == 0) {
      m.recorder = parse_recorder_tag(part.substr(4));
    } else {
      throw std::invalid_argument("unrecognized game-id field '" + part + "'");
    }
  }
  return m;
}

Recording record(const GameConfig& config, const Policy& policy, std::uint64_t seed, std::size_t length,
                 RecorderTag tag) {
  if (length < 1) throw std::invalid_argument("record: length must be >= 1");
  Recording out;
  Trajectory& traj = out.trajectory;
  traj.meta = TrajectoryMeta{"minifreeway", config.hash(), seed, tag};
  GameState s = env_reset(config, seed);
  while (traj.size() < length && !is_terminal(s, config)) {
    Frame f = render(s, config);
    const Action a = policy(s, f);
    traj.frames.push_back(std::move(f));
    traj.actions.push_back(a);
    s = env_step(s, a, config).state;
  }
  out.crossings = static_cast<std::uint32_t>(eval::crossings(s));
  return out;
}

Frame resize_nearest(const Frame& frame, std::size_t size) {
  if (frame.height == size && frame.width == size) return frame;
  Frame out{size, size, std::vector<std::uint8_t>(size * size)};
  for (std::size_t r = 0; r < size; ++r) {
    const std::size_t sr = r * frame.height / size;
    for (std::size_t c = 0; c < size; ++c) out.at(r, c) = frame.at(sr, c * frame.width / size);
  }
  return out;
}

std::vector<double> background_image(const std::vector<Frame>& frames, BackgroundStatistic stat) {
  if (frames.empty()) throw std::invalid_argument("background_image: no frames");
  const std::size_t pixels = frames.front().pixels.size();
  for (const Frame& f : frames) {
    if (f.pixels.size() != pixels) throw std::invalid_argument("background_image: frames differ in size");
  }
  std::vector<double> bg(pixels, 0.0);
  const std::size_t n = frames.size();
  if (stat == BackgroundStatistic::mean) {
    for (const Frame& f : frames) {
      for (std::size_t p = 0; p < pixels; ++p) bg[p] += f.pixels[p];
    }
    for (double& v : bg) v /= static_cast<double>(n);
    return bg;
  }
  // Exact median from a 256-bin histogram; even counts average the middle pair.
  const auto kth = [](const std::array<std::size_t, 256>& hist, std::size_t k) {
    std::size_t seen = 0;
    for (int v = 0; v < 256; ++v) {
      seen += hist[v];
      if (seen > k) return v;
    }
    return 255;
  };
  std::array<std::size_t, 256> hist{};
  for (std::size_t p = 0; p < pixels; ++p) {
    hist.fill(0);
    for (const Frame& f : frames) ++hist[f.pixels[p]];
    bg[p] = n % 2 ? kth(hist, n / 2) : 0.5 * (kth(hist, n / 2 - 1) + kth(hist, n / 2));
  }
  return bg;
}

namespace {

Tensor normalize(const Frame& f, const std::vector<double>* background) {
  Tensor t({f.height, f.width});
  for (std::size_t p = 0; p < f.pixels.size(); ++p) {
    double v = f.pixels[p];
    if (background) v = std::max(0.0, v - (*background)[p]);
    t[p] = v / 255.0;
  }
  return t;
}

}  // namespace

ProcessedEpisode preprocess(const Trajectory& trajectory, const PreprocessOptions& options) {
  if (trajectory.frames.empty()) throw std::invalid_argument("preprocess: empty trajectory");
  if (trajectory.frames.size() != trajectory.actions.size()) {
    throw std::invalid_argument("preprocess: frame and action counts differ");
  }
  if (options.subsample && options.subsample_stride < 1) throw std::invalid_argument("preprocess: stride must be >= 1");
  const std::size_t stride = options.subsample ? options.subsample_stride : 1;

  std::vector<Frame> frames;
  ProcessedEpisode out;
  out.meta = trajectory.meta;
  out.background_removed = options.background_removal;
  for (std::size_t t = 0; t < trajectory.size(); t += stride) {
    frames.push_back(resize_nearest(trajectory.frames[t], options.target_size));
    out.actions.push_back(trajectory.actions[t]);
  }
  std::vector<double> bg;
  if (options.background_removal) bg = background_image(frames, options.background);
  out.frames.reserve(frames.size());
  for (const Frame& f : frames) out.frames.push_back(normalize(f, options.background_removal ? &bg : nullptr));
  return out;
}

ProcessedEpisode preprocess(const Trajectory& trajectory, const OnlinePreprocessor& preprocessor,
                            const PreprocessOptions& options) {
  if (trajectory.frames.empty()) throw std::invalid_argument("preprocess: empty trajectory");
  if (trajectory.frames.size() != trajectory.actions.size()) {
    throw std::invalid_argument("preprocess: frame and action counts differ");
  }
  if (options.subsample && options.subsample_stride < 1) throw std::invalid_argument("preprocess: stride must be >= 1");
  const std::size_t stride = options.subsample ? options.subsample_stride : 1;
  ProcessedEpisode out;
  out.meta = trajectory.meta;
  out.background_removed = preprocessor.removes_background();
  for (std::size_t t = 0; t < trajectory.size(); t += stride) {
    out.frames.push_back(preprocessor(trajectory.frames[t]));
    out.actions.push_back(trajectory.actions[t]);
  }
  return out;
}

OnlinePreprocessor::OnlinePreprocessor(std::vector<double> background, std::size_t size, bool remove_background)
    : background_(std::move(background)), size_(size), remove_background_(remove_background) {
  if (remove_background_ && background_.size() != size_ * size_) {
    throw std::invalid_argument("OnlinePreprocessor: background does not match frame size");
  }
}

OnlinePreprocessor OnlinePreprocessor::from_demonstrations(const std::vector<Trajectory>& demos,
                                                           const PreprocessOptions& options) {
  if (!options.background_removal) return OnlinePreprocessor({}, options.target_size, false);
  std::vector<Frame> frames;
  for (const Trajectory& t : demos) {
    for (const Frame& f : t.frames) frames.push_back(resize_nearest(f, options.target_size));
  }
  if (frames.empty()) throw std::invalid_argument("OnlinePreprocessor: demonstrations hold no frames");
  return OnlinePreprocessor(background_image(frames, options.background), options.target_size, true);
}

Tensor OnlinePreprocessor::operator()(const Frame& frame) const {
  const Frame f = resize_nearest(frame, size_);
  return normalize(f, remove_background_ ? &background_ : nullptr);
}

void FrameStacker::push(Tensor frame) {
  if (frames_.size() == history_) frames_.erase(frames_.begin());
  frames_.push_back(std::move(frame));
}

Tensor FrameStacker::state() const {
  if (frames_.empty()) throw std::logic_error("FrameStacker: no frames pushed");
  const Tensor& first = frames_.front();
  const std::size_t plane = first.size();
  Tensor out({history_, first.dim(0), first.dim(1)});
  const std::size_t pad = history_ - frames_.size();
  for (std::size_t j = 0; j < history_; ++j) {
    const Tensor& src = j < pad ? first : frames_[j - pad];
    std::copy(src.data().begin(), src.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(j * plane));
  }
  return out;
}

ProcessedDataset::ProcessedDataset(std::vector<ProcessedEpisode> episodes, std::size_t history)
    : episodes_(std::move(episodes)), history_(history) {
  if (history_ < 1 || history_ > 4) throw std::invalid_argument("stack: history must be in 1..4");
  std::size_t frame_dim = 0;
  for (std::size_t e = 0; e < episodes_.size(); ++e) {
    const ProcessedEpisode& ep = episodes_[e];
    if (ep.frames.size() != ep.actions.size()) throw std::invalid_argument("stack: frame and action counts differ");
    for (const Tensor& f : ep.frames) {
      if (f.rank() != 2) throw std::invalid_argument("stack: frames must be 2-D");
      if (frame_dim == 0) frame_dim = f.dim(0);
      if (f.dim(0) != frame_dim || f.dim(1) != frame_dim) throw std::invalid_argument("stack: frame sizes differ");
    }
    begin_.push_back(index_.size());
    for (std::size_t t = 0; t < ep.size(); ++t) index_.emplace_back(e, t);
  }
}

std::size_t ProcessedDataset::frame_size() const {
  for (const ProcessedEpisode& ep : episodes_) {
    if (!ep.frames.empty()) return ep.frames.front().dim(0);
  }
  return 0;
}

Tensor ProcessedDataset::state(std::size_t episode, std::size_t t) const {
  const ProcessedEpisode& ep = episodes_.at(episode);
  const Tensor& ref = ep.frames.at(t);
  const std::size_t plane = ref.size();
  Tensor out({history_, ref.dim(0), ref.dim(1)});
  for (std::size_t j = 0; j < history_; ++j) {
    const std::size_t back = history_ - 1 - j;
    const Tensor& src = ep.frames[t >= back ? t - back : 0];
    std::copy(src.data().begin(), src.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(j * plane));
  }
  return out;
}

Tensor ProcessedDataset::state(std::size_t i) const {
  const auto [e, t] = index_.at(i);
  return state(e, t);
}

Action ProcessedDataset::action(std::size_t i) const {
  const auto [e, t] = index_.at(i);
  return episodes_[e].actions[t];
}

ProcessedDataset stack(std::vector<ProcessedEpisode> episodes, std::size_t history) {
  return ProcessedDataset(std::move(episodes), history);
}

ProcessedDataset stack(const std::vector<Tensor>& frames, const std::vector<Action>& actions, std::size_t history) {
  ProcessedEpisode ep;
  ep.frames = frames;
  ep.actions = actions;
  return ProcessedDataset({std::move(ep)}, history);
}

TransitionDataset::TransitionDataset(std::shared_ptr<const ProcessedDataset> states) : states_(std::move(states)) {
  if (!states_) throw std::invalid_argument("make_transitions: null dataset");
  for (std::size_t e = 0; e < states_->episode_count(); ++e) {
    const std::size_t begin = states_->episode_begin(e);
    const std::size_t n = states_->episode(e).size();
    for (std::size_t t = 0; t + 1 < n; ++t) {
      items_.push_back({begin + t, begin + t + 1, states_->episode(e).actions[t]});
    }
  }
}

TransitionDataset TransitionDataset::subset_by_episode(const std::vector<std::size_t>& episodes) const {
  TransitionDataset out;
  out.states_ = states_;
  for (const Item& it : items_) {
    if (std::find(episodes.begin(), episodes.end(), states_->locate(it.from).first) != episodes.end()) {
      out.items_.push_back(it);
    }
  }
  return out;
}

TransitionDataset make_transitions(std::shared_ptr<const ProcessedDataset> states) {
  return TransitionDataset(std::move(states));
}

namespace {

constexpr char kMagic[4] = {'D', 'A', 'L', 'T'};
constexpr std::uint8_t kFlagNormalized = 1;
constexpr std::uint8_t kFlagBackgroundRemoved = 2;

void write_header(io::Writer& w, const TrajectoryMeta& meta, std::size_t h, std::size_t wd, std::size_t count,
                  std::uint8_t flags) {
  const std::string id = meta.game_id();
  if (id.size() > 255) throw std::invalid_argument("game id longer than 255 bytes");
  if (h > 0xffff || wd > 0xffff || count > 0xffffffffULL) throw std::invalid_argument("trajectory too large");
  w.raw(kMagic, 4);
  w.u16(kTrajectoryFormatVersion);
  w.u8(static_cast<std::uint8_t>(id.size()));
  w.text(id);
  w.u16(static_cast<std::uint16_t>(h));
  w.u16(static_cast<std::uint16_t>(wd));
  w.u32(static_cast<std::uint32_t>(count));
  w.u8(flags);
  w.u64(meta.seed);
}

struct Header {
  TrajectoryMeta meta;
  std::size_t height = 0, width = 0, count = 0;
  std::uint8_t flags = 0;
};

Header read_header(io::Reader& r) {
  const std::string magic = r.text(4, "magic");
  if (magic != std::string(kMagic, 4)) r.fail("bad magic (not a DALT trajectory)");
  const std::uint16_t version = r.u16("version");
  if (version != kTrajectoryFormatVersion) r.fail("unsupported version " + std::to_string(version));
  const std::size_t id_len = r.u8("game-id length");
  const std::string id = r.text(id_len, "game id");
  Header h;
  h.height = r.u16("height");
  h.width = r.u16("width");
  h.count = r.u32("frame count");
  h.flags = r.u8("flags");
  if (h.flags & ~(kFlagNormalized | kFlagBackgroundRemoved)) r.fail("unknown flag bits");
  try {
    h.meta = TrajectoryMeta::from_game_id(id, r.u64("seed"));
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
  return h;
}

std::vector<Action> read_actions(io::Reader& r, std::size_t count) {
  const std::uint8_t* p = r.take(count, "actions");
  std::vector<Action> actions(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (p[i] >= kNumActions) r.fail("invalid action code " + std::to_string(p[i]) + " at index " + std::to_string(i));
    actions[i] = static_cast<Action>(p[i]);
  }
  return actions;
}

std::uint32_t read_trailer(io::Reader& r) {
  const std::uint32_t crossings = r.u32("crossings trailer");
  if (r.remaining() != 0) r.fail(std::to_string(r.remaining()) + " unexpected trailing bytes");
  return crossings;
}

}  // namespace

std::size_t trajectory_header_bytes(const TrajectoryMeta& meta) { return 4 + 2 + 1 + meta.game_id().size() + 2 + 2 + 4 + 1 + 8; }

void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path, std::uint32_t crossings) {
  if (trajectory.frames.size() != trajectory.actions.size()) {
    throw std::invalid_argument("save_trajectory: frame and action counts differ");
  }
  const std::size_t h = trajectory.frames.empty() ? 0 : trajectory.frames.front().height;
  const std::size_t wd = trajectory.frames.empty() ? 0 : trajectory.frames.front().width;
  io::Writer w;
  write_header(w, trajectory.meta, h, wd, trajectory.size(), 0);
  for (const Frame& f : trajectory.frames) {
    if (f.height != h || f.width != wd) throw std::invalid_argument("save_trajectory: frame sizes differ");
    w.raw(f.pixels.data(), f.pixels.size());
  }
  for (Action a : trajectory.actions) w.u8(static_cast<std::uint8_t>(a));
  w.u32(crossings);
  w.write_file(path);
}

void save_processed(const ProcessedEpisode& episode, const std::filesystem::path& path) {
  if (episode.frames.size() != episode.actions.size()) {
    throw std::invalid_argument("save_processed: frame and action counts differ");
  }
  const std::size_t h = episode.frames.empty() ? 0 : episode.frames.front().dim(0);
  const std::size_t wd = episode.frames.empty() ? 0 : episode.frames.front().dim(1);
  io::Writer w;
  write_header(w, episode.meta, h, wd, episode.size(),
               kFlagNormalized | (episode.background_removed ? kFlagBackgroundRemoved : 0));
  for (const Tensor& f : episode.frames) {
    if (f.rank() != 2 || f.dim(0) != h || f.dim(1) != wd) throw std::invalid_argument("save_processed: frame sizes differ");
    for (double v : f.data()) w.f64(v);
  }
  for (Action a : episode.actions) w.u8(static_cast<std::uint8_t>(a));
  w.u32(0);
  w.write_file(path);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  io::Reader r = io::Reader::from_file(path, "trajectory");
  const Header h = read_header(r);
  if (h.flags & kFlagNormalized) r.fail("holds normalized frames; load it as a processed episode");
  Trajectory t;
  t.meta = h.meta;
  t.frames.reserve(h.count);
  const std::size_t plane = h.height * h.width;
  for (std::size_t i = 0; i < h.count; ++i) {
    const std::uint8_t* p = r.take(plane, "frames");
    t.frames.push_back(Frame{h.height, h.width, std::vector<std::uint8_t>(p, p + plane)});
  }
  t.actions = read_actions(r, h.count);
  read_trailer(r);
  return t;
}

ProcessedEpisode load_processed(const std::filesystem::path& path) {
  io::Reader r = io::Reader::from_file(path, "trajectory");
  const Header h = read_header(r);
  if (!(h.flags & kFlagNormalized)) r.fail("holds raw frames; preprocess it first");
  ProcessedEpisode ep;
  ep.meta = h.meta;
  ep.background_removed = h.flags & kFlagBackgroundRemoved;
  for (std::size_t i = 0; i < h.count; ++i) {
    Tensor f({h.height, h.width});
    for (double& v : f.data()) v = r.f64("frames");
    ep.frames.push_back(std::move(f));
  }
  ep.actions = read_actions(r, h.count);
  read_trailer(r);
  return ep;
}

TrajectoryFileInfo inspect_trajectory(const std::filesystem::path& path) {
  io::Reader r = io::Reader::from_file(path, "trajectory");
  const Header h = read_header(r);
  return {h.meta, h.height, h.width, h.count, (h.flags & kFlagNormalized) != 0,
          (h.flags & kFlagBackgroundRemoved) != 0};
}

std::uint32_t read_evaluation_trailer(const std::filesystem::path& path) {
  io::Reader r = io::Reader::from_file(path, "trajectory");
  const Header h = read_header(r);
  const std::size_t elem = (h.flags & kFlagNormalized) ? 8 : 1;
  r.take(h.count * h.height * h.width * elem, "frames");
  r.take(h.count, "actions");
  return read_trailer(r);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double test_fraction,
                                                                             std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("split: need at least 2 episodes, got " + std::to_string(n));
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("split: test_fraction must be in (0,1)");
  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {train, test};
}

void write_index_csv(const ProcessedDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << "index,episode,t,action\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto [e, t] = dataset.locate(i);
    out << i << ',' << e << ',' << t << ',' << action_index(dataset.action(i)) << '\n';
  }
}

}  // namespace dal
