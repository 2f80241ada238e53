#include "dal/trajectory.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "test_util.hpp"

namespace dal {
namespace {

Frame constant_frame(std::uint8_t v, std::size_t n = 83) { return Frame{n, n, std::vector<std::uint8_t>(n * n, v)}; }

Trajectory synthetic(std::size_t n, std::size_t size = 83) {
  Trajectory t;
  for (std::size_t i = 0; i < n; ++i) {
    t.frames.push_back(constant_frame(static_cast<std::uint8_t>(i), size));
    t.actions.push_back(static_cast<Action>(i % 3));
  }
  return t;
}

std::vector<Tensor> tagged_frames(std::size_t n) {
  std::vector<Tensor> frames;
  for (std::size_t i = 0; i < n; ++i) frames.push_back(Tensor({2, 2}, static_cast<double>(i)));
  return frames;
}

TEST(RecordTest, ExpertRecordingIsDeterministic) {
  const GameConfig c = GameConfig::defaults();
  const Recording a = record(c, expert_policy(c), 3, 100, RecorderTag::scripted);
  const Recording b = record(c, expert_policy(c), 3, 100, RecorderTag::scripted);
  EXPECT_EQ(a.trajectory, b.trajectory);
  EXPECT_EQ(a.trajectory.size(), 100u);
  EXPECT_EQ(a.trajectory.meta.config_hash, c.hash());
}

TEST(RecordTest, StopsAtTerminal) {
  GameConfig c = GameConfig::defaults();
  c.episode_length = 30;
  EXPECT_EQ(record(c, random_policy(1), 0, 1000, RecorderTag::random).trajectory.size(), 30u);
  EXPECT_THROW(record(c, random_policy(1), 0, 0, RecorderTag::random), std::invalid_argument);
}

TEST(RecordTest, FramesMatchResimulation) {
  const GameConfig c = GameConfig::defaults();
  const Trajectory t = record(c, random_policy(4), 9, 300, RecorderTag::random).trajectory;
  GameState s = env_reset(c, 9);
  for (std::size_t i = 0; i < t.size(); ++i) {
    ASSERT_EQ(render(s, c), t.frames[i]) << "frame " << i;
    s = env_step(s, t.actions[i], c).state;
  }
}

TEST(PreprocessTest, ConstantEpisodeBecomesZeroWithBackgroundRemoval) {
  Trajectory t;
  for (int i = 0; i < 5; ++i) {
    t.frames.push_back(constant_frame(77));
    t.actions.push_back(Action::up);
  }
  for (const Tensor& f : preprocess(t).frames) EXPECT_EQ(f.sum(), 0.0);
}

TEST(PreprocessTest, NormalizesWithoutBackgroundRemoval) {
  Trajectory t;
  t.frames.push_back(constant_frame(255));
  t.actions.push_back(Action::noop);
  PreprocessOptions opt;
  opt.background_removal = false;
  const ProcessedEpisode ep = preprocess(t, opt);
  EXPECT_FALSE(ep.background_removed);
  for (double v : ep.frames[0].data()) EXPECT_EQ(v, 1.0);
}

TEST(PreprocessTest, SubsamplesEveryFourthFrame) {
  PreprocessOptions opt;
  opt.subsample = true;
  opt.background_removal = false;
  const ProcessedEpisode ep = preprocess(synthetic(20), opt);
  ASSERT_EQ(ep.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(ep.frames[i][0], static_cast<double>(4 * i) / 255.0);
    EXPECT_EQ(ep.actions[i], static_cast<Action>((4 * i) % 3));
  }
}

TEST(PreprocessTest, DownscalesForeignFramesByNearestNeighbour) {
  Trajectory t;
  Frame big{166, 166, std::vector<std::uint8_t>(166 * 166)};
  for (std::size_t r = 0; r < 166; ++r) {
    for (std::size_t c = 0; c < 166; ++c) big.at(r, c) = static_cast<std::uint8_t>((r / 2 + c / 2) % 256);
  }
  t.frames.push_back(big);
  t.actions.push_back(Action::up);
  PreprocessOptions opt;
  opt.background_removal = false;
  const Tensor f = preprocess(t, opt).frames[0];
  ASSERT_EQ(f.shape(), (Shape{83, 83}));
  for (std::size_t r = 0; r < 83; ++r) {
    for (std::size_t c = 0; c < 83; ++c) ASSERT_EQ(f.at(r, c), double((r + c) % 256) / 255.0);
  }
}

TEST(PreprocessTest, RejectsEmptyTrajectory) { EXPECT_THROW(preprocess(Trajectory{}), std::invalid_argument); }

TEST(PreprocessTest, MedianBackgroundMatchesSortOracle) {
  std::mt19937_64 rng(2);
  for (std::size_t n : {1u, 2u, 5u, 8u}) {
    std::vector<Frame> frames;
    for (std::size_t i = 0; i < n; ++i) {
      Frame f{3, 3, std::vector<std::uint8_t>(9)};
      for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng() % 256);
      frames.push_back(f);
    }
    const std::vector<double> bg = background_image(frames, BackgroundStatistic::median);
    const std::vector<double> mean = background_image(frames, BackgroundStatistic::mean);
    for (std::size_t p = 0; p < 9; ++p) {
      std::vector<double> col;
      for (const Frame& f : frames) col.push_back(f.pixels[p]);
      std::sort(col.begin(), col.end());
      const double median = n % 2 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
      EXPECT_EQ(bg[p], median);
      double sum = 0;
      for (double v : col) sum += v;
      EXPECT_NEAR(mean[p], sum / n, 1e-12);
    }
  }
}

TEST(PreprocessTest, GameFramesKeepOnlyMovingObjects) {
  const GameConfig c = GameConfig::defaults();
  const Trajectory t = record(c, expert_policy(c), 0, 200, RecorderTag::scripted).trajectory;
  const ProcessedEpisode ep = preprocess(t);
  for (std::size_t i = 0; i < ep.size(); ++i) {
    for (std::size_t p = 0; p < ep.frames[i].size(); ++p) {
      const double v = ep.frames[i][p];
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      // Static scene pixels vanish; only cars and the agent remain.
      if (t.frames[i].pixels[p] == kBackgroundValue || t.frames[i].pixels[p] == kDividerValue) {
        ASSERT_EQ(v, 0.0);
      }
    }
  }
}

TEST(PreprocessTest, PooledBackgroundMatchesPerEpisodeBackground) {
  const GameConfig c = GameConfig::defaults();
  std::vector<Trajectory> demos;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    demos.push_back(record(c, expert_policy(c), seed, 540, RecorderTag::scripted).trajectory);
  }
  const OnlinePreprocessor online = OnlinePreprocessor::from_demonstrations(demos, PreprocessOptions{});
  const Trajectory fresh = record(c, expert_policy(c), 10, 540, RecorderTag::scripted).trajectory;
  const ProcessedEpisode ep = preprocess(fresh);
  for (std::size_t i = 0; i < fresh.size(); i += 37) EXPECT_EQ(online(fresh.frames[i]), ep.frames[i]);
}

TEST(PreprocessTest, FixedPreprocessorKeepsIdleAgentVisible) {
  const GameConfig c = GameConfig::defaults();
  std::vector<Trajectory> demos = {record(c, expert_policy(c), 0, 540, RecorderTag::scripted).trajectory};
  const OnlinePreprocessor online = OnlinePreprocessor::from_demonstrations(demos, PreprocessOptions{});
  // An agent that never moves is part of its own episode's median.
  const Trajectory idle =
      record(c, [](const GameState&, const Frame&) { return Action::noop; }, 1, 40, RecorderTag::random).trajectory;
  const ProcessedEpisode own = preprocess(idle);
  const ProcessedEpisode shared = preprocess(idle, online);
  ASSERT_EQ(shared.size(), idle.size());
  EXPECT_TRUE(shared.background_removed);
  const std::size_t row = static_cast<std::size_t>(lane_top_row(c, c.start_lane()) + 1);
  const std::size_t col = static_cast<std::size_t>(c.agent_column());
  EXPECT_EQ(own.frames[5].at(row, col), 0.0);
  EXPECT_GT(shared.frames[5].at(row, col), 0.0);
  for (std::size_t i = 0; i < idle.size(); ++i) EXPECT_EQ(shared.frames[i], online(idle.frames[i]));
  PreprocessOptions sub;
  sub.subsample = true;
  EXPECT_EQ(preprocess(idle, online, sub).size(), 10u);
}

TEST(PreprocessTest, OnlineWithoutBackgroundRemovalOnlyNormalizes) {
  PreprocessOptions opt;
  opt.background_removal = false;
  const OnlinePreprocessor online = OnlinePreprocessor::from_demonstrations({}, opt);
  const Tensor f = online(constant_frame(51));
  for (double v : f.data()) EXPECT_EQ(v, 0.2);
}

TEST(StackTest, HistoryOneIsIdentity) {
  const auto frames = tagged_frames(4);
  const ProcessedDataset d = stack(frames, {Action::up, Action::up, Action::noop, Action::down}, 1);
  ASSERT_EQ(d.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(d.state(i), frames[i].reshaped({1, 2, 2}));
  EXPECT_EQ(d.action(3), Action::down);
}

TEST(StackTest, LeftPadsByRepeatingFirstFrame) {
  const auto frames = tagged_frames(3);
  const ProcessedDataset d = stack(frames, {Action::up, Action::up, Action::up}, 2);
  const auto pair = [](double a, double b) {
    Tensor t({2, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) {
      t[i] = a;
      t[4 + i] = b;
    }
    return t;
  };
  EXPECT_EQ(d.state(0), pair(0, 0));
  EXPECT_EQ(d.state(1), pair(0, 1));
  EXPECT_EQ(d.state(2), pair(1, 2));
}

TEST(StackTest, MatchesLoopOracleAcrossEpisodes) {
  for (std::size_t h : {1u, 2u, 3u, 4u}) {
    std::vector<ProcessedEpisode> eps(3);
    double tag = 0;
    for (std::size_t e = 0; e < eps.size(); ++e) {
      for (std::size_t t = 0; t < 2 + 3 * e; ++t) {
        eps[e].frames.push_back(Tensor({2, 2}, tag++));
        eps[e].actions.push_back(Action::noop);
      }
    }
    const ProcessedDataset d = stack(eps, h);
    std::size_t i = 0;
    for (std::size_t e = 0; e < eps.size(); ++e) {
      for (std::size_t t = 0; t < eps[e].size(); ++t, ++i) {
        const Tensor s = d.state(i);
        for (std::size_t j = 0; j < h; ++j) {
          const long src = static_cast<long>(t) - static_cast<long>(h - 1 - j);
          ASSERT_EQ(s[j * 4], eps[e].frames[src < 0 ? 0 : src][0]);
        }
      }
    }
    EXPECT_EQ(i, d.size());
  }
}

TEST(StackTest, FrameStackerAgreesWithDataset) {
  const auto frames = tagged_frames(6);
  const ProcessedDataset d = stack(frames, std::vector<Action>(6, Action::up), 4);
  FrameStacker stacker(4);
  for (std::size_t t = 0; t < 6; ++t) {
    stacker.push(frames[t]);
    EXPECT_EQ(stacker.state(), d.state(t));
  }
}

TEST(StackTest, RejectsUnsupportedHistory) {
  EXPECT_THROW(stack(tagged_frames(2), {Action::up, Action::up}, 5), std::invalid_argument);
  EXPECT_THROW(stack(tagged_frames(2), {Action::up, Action::up}, 0), std::invalid_argument);
}

std::shared_ptr<const ProcessedDataset> two_episode_dataset(std::size_t n0, std::size_t n1) {
  std::vector<ProcessedEpisode> eps(2);
  double tag = 0;
  for (std::size_t t = 0; t < n0; ++t) {
    eps[0].frames.push_back(Tensor({2, 2}, tag++));
    eps[0].actions.push_back(Action::up);
  }
  for (std::size_t t = 0; t < n1; ++t) {
    eps[1].frames.push_back(Tensor({2, 2}, tag++));
    eps[1].actions.push_back(Action::down);
  }
  return std::make_shared<ProcessedDataset>(stack(eps, 2));
}

TEST(TransitionTest, CountsAndChains) {
  const auto d = two_episode_dataset(6, 4);
  const TransitionDataset tr = make_transitions(d);
  EXPECT_EQ(tr.size(), 5u + 3u);
  for (std::size_t i = 0; i + 1 < 5; ++i) EXPECT_EQ(tr.s_next(i), tr.s(i + 1));
}

TEST(TransitionTest, NeverCrossesEpisodeBoundary) {
  const auto d = two_episode_dataset(6, 4);
  const TransitionDataset tr = make_transitions(d);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto [e0, t0] = d->locate(tr.item(i).from);
    const auto [e1, t1] = d->locate(tr.item(i).to);
    EXPECT_EQ(e0, e1);
    EXPECT_EQ(t1, t0 + 1);
    EXPECT_EQ(tr.action(i), e0 == 0 ? Action::up : Action::down);
  }
  EXPECT_EQ(tr.subset_by_episode({1}).size(), 3u);
}

TEST(FormatTest, RoundTripIsBitExact) {
  const GameConfig c = GameConfig::defaults();
  const Recording rec = record(c, expert_policy(c), 2, 64, RecorderTag::scripted);
  const auto dir = testing::temp_dir("traj_roundtrip");
  save_trajectory(rec.trajectory, dir / "a.dalt", rec.crossings);
  EXPECT_EQ(load_trajectory(dir / "a.dalt"), rec.trajectory);
  EXPECT_EQ(read_evaluation_trailer(dir / "a.dalt"), rec.crossings);
  save_trajectory(load_trajectory(dir / "a.dalt"), dir / "b.dalt", rec.crossings);
  EXPECT_EQ(testing::read_bytes(dir / "a.dalt"), testing::read_bytes(dir / "b.dalt"));
}

TEST(FormatTest, FileSizeMatchesLayout) {
  const Trajectory t = [] {
    Trajectory x = synthetic(7);
    x.meta.config_hash = 0xabcdef;
    return x;
  }();
  const auto dir = testing::temp_dir("traj_size");
  save_trajectory(t, dir / "t.dalt");
  const std::string id = t.meta.game_id();
  const std::size_t header = 4 + 2 + 1 + id.size() + 2 + 2 + 4 + 1 + 8;
  EXPECT_EQ(trajectory_header_bytes(t.meta), header);
  EXPECT_EQ(testing::read_bytes(dir / "t.dalt").size(), header + 83 * 83 * 7 + 7 + 4);
}

TEST(FormatTest, HeaderBytesAreLittleEndian) {
  Trajectory t = synthetic(2, 4);
  t.meta.seed = 0x0102030405060708ULL;
  const auto dir = testing::temp_dir("traj_header");
  save_trajectory(t, dir / "t.dalt", 9);
  const auto bytes = testing::read_bytes(dir / "t.dalt");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DALT");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  const std::size_t id_len = bytes[6];
  EXPECT_EQ(std::string(bytes.begin() + 7, bytes.begin() + 7 + id_len), t.meta.game_id());
  const std::size_t p = 7 + id_len;
  EXPECT_EQ(bytes[p], 4);       // height
  EXPECT_EQ(bytes[p + 2], 4);   // width
  EXPECT_EQ(bytes[p + 4], 2);   // count
  EXPECT_EQ(bytes[p + 8], 0);   // flags
  EXPECT_EQ(bytes[p + 9], 0x08);
  EXPECT_EQ(bytes[p + 16], 0x01);
  EXPECT_EQ(bytes.back(), 0);
  EXPECT_EQ(bytes[bytes.size() - 4], 9);
}

TEST(FormatTest, ProcessedRoundTrip) {
  const GameConfig c = GameConfig::defaults();
  const ProcessedEpisode ep = preprocess(record(c, random_policy(0), 0, 20, RecorderTag::random).trajectory);
  const auto dir = testing::temp_dir("traj_processed");
  save_processed(ep, dir / "p.dalt");
  EXPECT_EQ(load_processed(dir / "p.dalt"), ep);
  EXPECT_THROW(load_trajectory(dir / "p.dalt"), std::invalid_argument);
  EXPECT_EQ(testing::read_bytes(dir / "p.dalt").size(), trajectory_header_bytes(ep.meta) + 8 * 83 * 83 * 20 + 20 + 4);
  const TrajectoryFileInfo info = inspect_trajectory(dir / "p.dalt");
  EXPECT_TRUE(info.normalized);
  EXPECT_TRUE(info.background_removed);
  EXPECT_EQ(info.count, 20u);
  EXPECT_EQ(info.meta, ep.meta);
}

TEST(FormatTest, RejectsCorruption) {
  const auto dir = testing::temp_dir("traj_corrupt");
  save_trajectory(synthetic(3), dir / "t.dalt");
  auto bytes = testing::read_bytes(dir / "t.dalt");
  const auto write = [&](const std::vector<unsigned char>& b) {
    std::ofstream out(dir / "bad.dalt", std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  };
  const auto expect_error = [&](const std::string& needle) {
    try {
      load_trajectory(dir / "bad.dalt");
      FAIL() << "expected rejection mentioning " << needle;
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  auto b = bytes;
  b[0] = 'X';
  write(b);
  expect_error("magic");
  b = bytes;
  b[4] = 2;
  write(b);
  expect_error("version");
  b = bytes;
  b.resize(b.size() - 10);
  write(b);
  expect_error("truncated");
  b = bytes;
  b.push_back(0);
  write(b);
  expect_error("trailing");
  b = bytes;
  b[b.size() - 5] = 7;  // last action byte
  write(b);
  expect_error("action");
  EXPECT_THROW(load_trajectory(dir / "missing.dalt"), std::invalid_argument);
}

TEST(GameIdTest, RoundTrip) {
  TrajectoryMeta m{"minifreeway", 0x1234abcd5678ef00ULL, 5, RecorderTag::human};
  EXPECT_EQ(m.game_id(), "minifreeway;cfg=1234abcd5678ef00;rec=human");
  EXPECT_EQ(TrajectoryMeta::from_game_id(m.game_id(), 5), m);
  EXPECT_THROW(TrajectoryMeta::from_game_id("g;bogus=1", 0), std::invalid_argument);
}

TEST(SplitTest, WholeEpisodesDeterministic) {
  std::vector<int> eps(10);
  for (int i = 0; i < 10; ++i) eps[i] = i;
  const auto [train, test] = split(eps, 0.2, 7);
  EXPECT_EQ(test.size(), 2u);
  EXPECT_EQ(train.size(), 8u);
  std::set<int> all(train.begin(), train.end());
  for (int t : test) EXPECT_TRUE(all.insert(t).second);
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(split(eps, 0.2, 7), split(eps, 0.2, 7));
}

TEST(SplitTest, RejectsTooFewEpisodes) {
  EXPECT_THROW(split(std::vector<int>{1}, 0.5, 0), std::invalid_argument);
  EXPECT_THROW(split(std::vector<int>{1, 2}, 1.5, 0), std::invalid_argument);
  const auto [train, test] = split(std::vector<int>{1, 2}, 0.01, 0);
  EXPECT_EQ(test.size(), 1u);
}

TEST(IndexCsvTest, OneRowPerState) {
  const auto d = two_episode_dataset(3, 2);
  const auto dir = testing::temp_dir("traj_csv");
  write_index_csv(*d, dir / "i.csv");
  std::ifstream in(dir / "i.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "index,episode,t,action");
  EXPECT_EQ(lines[4], "3,1,0,1");
}

}  // namespace
}  // namespace dal
