#include "cli.hpp"

#include <csignal>
#include <fstream>
#include <functional>

#include "CLI11.hpp"

#include "recorder.hpp"
#include "stages.hpp"
#include "tabular_bench.hpp"

namespace dal::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Common {
  std::string game_config;
  GameConfig game() const { return load_game(game_config); }
};

void add_game_flag(CLI::App* cmd, Common& c) {
  cmd->add_option("--game-config", c.game_config, "key=value MiniFreeway config (defaults when omitted)");
}

std::vector<std::string> transform_names() {
  std::vector<std::string> out;
  for (analysis::Strategy s : analysis::kStrategies) out.emplace_back(analysis::to_string(s));
  return out;
}

// Registers every subcommand on `app`; the chosen one stores its action in `run`.
void add_subcommands(CLI::App& app, Common& common, std::function<void()>& run, std::ostream& out) {
  {
    auto* cmd = app.add_subcommand("record-expert", "Record scripted-expert episodes as DALT files");
    add_game_flag(cmd, common);
    auto dir = std::make_shared<std::string>();
    auto episodes = std::make_shared<std::size_t>(20);
    auto seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--out", *dir, "Output directory")->required();
    cmd->add_option("--episodes", *episodes, "Episode count")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", *seed, "Seed of the first episode");
    cmd->callback([&, dir, episodes, seed] {
      run = [&, dir, episodes, seed] {
        const RecordSummary r = record_expert(common.game(), *dir, *episodes, *seed);
        out << "wrote " << r.files.size() << " expert episodes to " << *dir << "\n";
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("record-random", "Record uniformly random play as DALT files");
    add_game_flag(cmd, common);
    auto dir = std::make_shared<std::string>();
    auto episodes = std::make_shared<std::size_t>(10);
    auto seed = std::make_shared<std::uint64_t>(5000);
    cmd->add_option("--out", *dir, "Output directory")->required();
    cmd->add_option("--episodes", *episodes, "Episode count")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", *seed, "Seed of the first episode");
    cmd->callback([&, dir, episodes, seed] {
      run = [&, dir, episodes, seed] {
        const RecordSummary r = record_random(common.game(), *dir, *episodes, *seed);
        out << "wrote " << r.files.size() << " random episodes to " << *dir << "\n";
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("preprocess", "Normalize raw DALT files (background removal, scaling)");
    add_game_flag(cmd, common);
    struct Args {
      std::string in, out, expert;
      bool no_bg = false, subsample = false;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--in", a->in, "Directory of raw DALT files")->required();
    cmd->add_option("--out", a->out, "Output directory")->required();
    cmd->add_option("--background-from", a->expert,
                    "Use the pooled background of these demonstrations instead of a per-episode one");
    cmd->add_flag("--no-background-removal", a->no_bg, "Only scale to [0,1]");
    cmd->add_flag("--subsample", a->subsample, "Keep every 4th frame");
    cmd->callback([&, a] {
      run = [&, a] {
        const GameConfig game = common.game();
        PreprocessOptions opts;
        opts.background_removal = !a->no_bg;
        opts.subsample = a->subsample;
        std::optional<OnlinePreprocessor> fixed;
        if (!a->expert.empty()) fixed = preprocessor_for(load_trajectories(a->expert, game), opts.background_removal);
        ensure_dir(a->out);
        std::size_t n = 0;
        for (const fs::path& p : list_dalt(a->in)) {
          const TrajectoryFileInfo info = inspect_trajectory(p);
          if (info.normalized) throw UsageError(p.string() + " is already normalized");
          if (info.meta.config_hash != game.hash()) {
            throw UsageError("config hash mismatch: " + p.string() + " was recorded with cfg=" +
                             hash_hex(info.meta.config_hash) + ", this run uses cfg=" + hash_hex(game.hash()));
          }
          const Trajectory t = load_trajectory(p);
          save_processed(fixed ? preprocess(t, *fixed, opts) : preprocess(t, opts), fs::path(a->out) / p.filename());
          ++n;
        }
        out << "normalized " << n << " episodes into " << a->out << "\n";
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("train-daqn", "Train the DAQN classifier on expert demonstrations");
    add_game_flag(cmd, common);
    struct Args {
      std::string expert, out, report, nonlinearity = "tanh", loss = "cross_entropy";
      DaqnStageOptions o;
      bool no_bg = false;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--expert", a->expert, "Directory of expert DALT files")->required();
    cmd->add_option("--out", a->out, "Output DALN file")->required();
    cmd->add_option("--report", a->report, "Per-epoch CSV (epoch, train_error, test_error)");
    cmd->add_option("--epochs", a->o.epochs, "Epochs");
    cmd->add_option("--eta", a->o.eta, "AdaGrad learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--history", a->o.history, "Stacked frames per state")->check(CLI::PositiveNumber);
    cmd->add_option("--nonlinearity", a->nonlinearity, "logistic, tanh or rectifier");
    cmd->add_option("--loss", a->loss, "cross_entropy or squared_error");
    cmd->add_option("--batch-size", a->o.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--test-fraction", a->o.test_fraction, "Share of episodes held out")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--split-seed", a->o.split_seed, "Seed of the episode split");
    cmd->add_option("--init-seed", a->o.init_seed, "Seed of the weight initialization");
    cmd->add_option("--seed", a->o.train_seed, "Seed of the batch order");
    cmd->add_flag("--no-background-removal", a->no_bg, "Skip background subtraction");
    cmd->add_flag("--rica-pretrain", a->o.rica_pretrain, "Initialize first-layer filters with RICA (history 1)");
    cmd->callback([&, a] {
      run = [&, a] {
        a->o.nonlinearity = parse_nonlinearity(a->nonlinearity);
        a->o.loss = parse_loss_kind(a->loss);
        a->o.background_removal = !a->no_bg;
        const DaqnStageResult r = train_daqn_stage(common.game(), a->expert, a->o, a->out, a->report, out);
        out << "saved DAQN to " << a->out << "\n";
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("eval-daqn", "Misclassification error of a network on a directory of episodes");
    add_game_flag(cmd, common);
    auto net = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto no_bg = std::make_shared<bool>(false);
    cmd->add_option("--net", *net, "DALN file")->required();
    cmd->add_option("--data", *data, "Directory of DALT files")->required();
    cmd->add_flag("--no-background-removal", *no_bg, "Skip background subtraction");
    cmd->callback([&, net, data, no_bg] {
      run = [&, net, data, no_bg] {
        const GameConfig game = common.game();
        const Network n = load_network_for(*net, game, NetRole::q_network);
        PreprocessOptions opts;
        opts.background_removal = !*no_bg;
        const ProcessedDataset d = stack(load_episodes(*data, game, opts), n.arch.history);
        out << "states " << d.size() << "\nerror " << analysis::format_number(evaluate(n, d)) << "\n";
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("train-darn", "Train the reward network on random-play transitions");
    add_game_flag(cmd, common);
    struct Args {
      std::string daqn, random, expert, out, report;
      DarnStageOptions o;
      bool no_bg = false;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--daqn", a->daqn, "Trained DAQN (DALN)")->required();
    cmd->add_option("--random", a->random, "Directory of random-play DALT files")->required();
    cmd->add_option("--expert", a->expert, "Expert DALT directory; supplies the background image")->required();
    cmd->add_option("--out", a->out, "Output DALN file")->required();
    cmd->add_option("--report", a->report, "Per-epoch CSV (epoch, train_rmse, heldout_rmse)");
    cmd->add_option("--epochs", a->o.epochs, "Epochs");
    cmd->add_option("--eta", a->o.eta, "AdaGrad learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--gamma", a->o.gamma, "Discount")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--batch-size", a->o.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a->o.seed, "Seed of the batch order");
    cmd->add_flag("--no-background-removal", a->no_bg, "Skip background subtraction");
    cmd->callback([&, a] {
      run = [&, a] {
        a->o.background_removal = !a->no_bg;
        train_darn_stage(common.game(), a->daqn, a->random, a->expert, a->o, a->out, a->report, out);
        out << "saved reward network to " << a->out << "\n";
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("extract-policy", "Greedy DAQN action for every state of a directory");
    add_game_flag(cmd, common);
    auto net = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto csv = std::make_shared<std::string>();
    cmd->add_option("--net", *net, "DALN file")->required();
    cmd->add_option("--data", *data, "Directory of DALT files")->required();
    cmd->add_option("--out", *csv, "CSV (index, episode, t, recorded, greedy, q_up, q_down, q_noop)")->required();
    cmd->callback([&, net, data, csv] {
      run = [&, net, data, csv] {
        const GameConfig game = common.game();
        const Network n = load_network_for(*net, game, NetRole::q_network);
        const ProcessedDataset d = stack(load_episodes(*data, game, {}), n.arch.history);
        analysis::CsvTable t{{"index", "episode", "t", "recorded", "greedy", "q_up", "q_down", "q_noop"}, {}};
        std::size_t agree = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
          const QScores q = q_scores(n, d.state(i));
          const std::size_t g = argmax_lowest(q.presoft);
          const auto [e, tick] = d.locate(i);
          agree += g == action_index(d.action(i));
          t.rows.push_back({double(i), double(e), double(tick), double(action_index(d.action(i))), double(g),
                            q.presoft[0], q.presoft[1], q.presoft[2]});
        }
        analysis::export_csv(t, *csv);
        out << "states " << d.size() << ", greedy matches recorded action on " << agree << "\n";
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("generalize", "Replay Q-learning against the learned reward network");
    add_game_flag(cmd, common);
    struct Args {
      std::string daqn, darn, expert, out, log;
      DqnConfig q;
      bool cold = false, no_bg = false;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--daqn", a->daqn, "Trained DAQN (DALN)")->required();
    cmd->add_option("--darn", a->darn, "Trained reward network (DALN)")->required();
    cmd->add_option("--expert", a->expert, "Expert DALT directory; supplies the background image")->required();
    cmd->add_option("--out", a->out, "Output DALN file")->required();
    cmd->add_option("--log", a->log, "Per-episode CSV (episode, step, epsilon, mean_td_loss, crossings)");
    cmd->add_option("--episodes", a->q.episodes, "Episodes");
    cmd->add_option("--max-steps", a->q.max_steps, "Steps per episode (0 plays to the end)");
    cmd->add_option("--epsilon", a->q.epsilon, "Exploration rate")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--gamma", a->q.gamma, "Discount")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--eta", a->q.eta, "AdaGrad learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", a->q.batch_size, "Replay mini-batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--capacity", a->q.capacity, "Replay memory capacity")->check(CLI::PositiveNumber);
    cmd->add_option("--warmup", a->q.warmup, "Transitions stored before the first update");
    cmd->add_option("--seed", a->q.seed, "Seed of environment, exploration and sampling");
    cmd->add_flag("--cold-start", a->cold, "Start from fresh weights instead of the DAQN");
    cmd->add_flag("--no-background-removal", a->no_bg, "Skip background subtraction");
    cmd->callback([&, a] {
      run = [&, a] {
        a->q.warm_start = !a->cold;
        generalize_stage(common.game(), a->daqn, a->darn, a->expert, a->q, !a->no_bg, a->out, a->log, out);
        out << "saved generalized network to " << a->out << "\n";
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("evaluate", "Play episodes with a policy and report crossings");
    add_game_flag(cmd, common);
    struct Args {
      std::string policy = "network", net, expert, json_out;
      std::size_t episodes = 5;
      std::uint64_t seed = 1000;
      bool no_bg = false;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--policy", a->policy, "network, expert, random, always_up, do_nothing, oscillate");
    cmd->add_option("--net", a->net, "DALN file for --policy network");
    cmd->add_option("--expert", a->expert, "Expert DALT directory for the network's background image");
    cmd->add_option("--episodes", a->episodes, "Episodes")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a->seed, "Seed of the first episode");
    cmd->add_option("--json", a->json_out, "Also write {mean, min, episodes} here");
    cmd->add_flag("--no-background-removal", a->no_bg, "Skip background subtraction");
    cmd->callback([&, a] {
      run = [&, a] {
        const GameConfig game = common.game();
        std::shared_ptr<const Network> net;
        std::optional<OnlinePreprocessor> pre;
        if (a->policy == "network") {
          if (a->net.empty() || a->expert.empty()) throw UsageError("--policy network needs --net and --expert");
          net = std::make_shared<const Network>(load_network_for(a->net, game));
          pre = preprocessor_for(load_trajectories(a->expert, game), !a->no_bg);
        }
        const EvalSummary s =
            evaluate_policy(game, named_policy(a->policy, game, net, pre ? &*pre : nullptr), a->episodes, a->seed);
        out << "episodes";
        for (int c : s.crossings) out << ' ' << c;
        out << "\nmean crossings " << analysis::format_number(s.mean()) << "\nmin crossings " << s.min() << "\n";
        if (!a->json_out.empty()) std::ofstream(a->json_out) << s.to_json().dump(2) << '\n';
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("influence", "Input-gradient maps of a network on one state, as PGM images");
    add_game_flag(cmd, common);
    struct Args {
      std::string net, data, out;
      std::size_t index = 0;
      int action = -1;
      std::string output = "presoft";
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--net", a->net, "DALN file")->required();
    cmd->add_option("--data", a->data, "Directory of DALT files")->required();
    cmd->add_option("--index", a->index, "State index across the directory");
    cmd->add_option("--action", a->action, "Action unit (default: the greedy one)");
    cmd->add_option("--output", a->output, "presoft or probability")->check(CLI::IsMember({"presoft", "probability"}));
    cmd->add_option("--out", a->out, "Output directory")->required();
    cmd->callback([&, a] {
      run = [&, a] {
        const GameConfig game = common.game();
        const Network n = load_network_for(a->net, game);
        const ProcessedDataset d = stack(load_episodes(a->data, game, {}), n.arch.history);
        if (a->index >= d.size()) throw UsageError("--index out of range (" + std::to_string(d.size()) + " states)");
        const Tensor state = d.state(a->index);
        std::optional<std::size_t> action;
        if (a->action >= 0) action = static_cast<std::size_t>(a->action);
        const Tensor map = analysis::influence_map(
            n, state, action,
            a->output == "presoft" ? analysis::InfluenceOutput::presoft : analysis::InfluenceOutput::probability);
        ensure_dir(a->out);
        for (std::size_t h = 0; h < n.arch.history; ++h) {
          const std::string k = std::to_string(h);
          analysis::export_pgm(analysis::plane(state, h), fs::path(a->out) / ("input_" + k + ".pgm"));
          analysis::export_pgm(analysis::plane(map, h), fs::path(a->out) / ("influence_" + k + ".pgm"));
        }
        out << "wrote " << 2 * n.arch.history << " images to " << a->out << "\n";
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("reward-trace", "Cumulative learned reward along scripted strategies");
    add_game_flag(cmd, common);
    struct Args {
      std::string darn, expert, out, strategy = "all";
      std::size_t length = 540;
      std::uint64_t seed = 1000;
      bool no_bg = false;
    };
    auto a = std::make_shared<Args>();
    std::vector<std::string> choices = transform_names();
    choices.emplace_back("all");
    cmd->add_option("--darn", a->darn, "Reward network (DALN)")->required();
    cmd->add_option("--expert", a->expert, "Expert DALT directory; supplies the background image")->required();
    cmd->add_option("--strategy", a->strategy, "Strategy name or all")->check(CLI::IsMember(choices));
    cmd->add_option("--length", a->length, "Ticks")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a->seed, "Environment seed");
    cmd->add_option("--out", a->out, "Directory for reward_trace_<strategy>.csv");
    cmd->add_flag("--no-background-removal", a->no_bg, "Skip background subtraction");
    cmd->callback([&, a] {
      run = [&, a] {
        const GameConfig game = common.game();
        const Network net = load_network_for(a->darn, game, NetRole::reward_network);
        const OnlinePreprocessor pre = preprocessor_for(load_trajectories(a->expert, game), !a->no_bg);
        ensure_dir(a->out);
        for (analysis::Strategy s : analysis::kStrategies) {
          if (a->strategy != "all" && a->strategy != analysis::to_string(s)) continue;
          const analysis::RewardTrace t = analysis::cumulative_reward_trace(net, game, pre, s, a->length, a->seed);
          out << analysis::to_string(s) << ' ' << analysis::format_number(t.total()) << "\n";
          if (!a->out.empty()) {
            analysis::export_csv(analysis::to_table(t),
                                 fs::path(a->out) / (std::string("reward_trace_") + analysis::to_string(s) + ".csv"));
          }
        }
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("tabular-bench", "Value iteration, Q-learning, CSI and gradient IRL on an MDP");
    struct Args {
      std::string mdp, out;
      TabularBenchOptions o;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--mdp", a->mdp, "MDP text file (default: 5-cell line world, goal in cell 3)");
    cmd->add_option("--out", a->out, "Directory for the CSV tables");
    cmd->add_option("--seed", a->o.seed, "Seed");
    cmd->callback([&, a] {
      run = [&, a] {
        tabular::Mdp mdp;
        if (a->mdp.empty()) {
          mdp = tabular::line_world(5, 3, 0.9);
        } else {
          if (!fs::exists(a->mdp)) throw UsageError("MDP file not found: " + a->mdp);
          mdp = tabular::load_mdp(a->mdp);
        }
        run_tabular_bench(mdp, a->o, a->out, out);
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("serve-recorder", "HTTP endpoint for recording human demonstrations");
    add_game_flag(cmd, common);
    struct Args {
      std::string host = "127.0.0.1", out;
      int port = 8765;
      std::uint64_t seed = 0;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--host", a->host, "Bind address");
    cmd->add_option("--port", a->port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    cmd->add_option("--out", a->out, "Directory for recorded DALT files")->required();
    cmd->add_option("--seed", a->seed, "Seed of the first episode");
    cmd->callback([&, a] {
      run = [&, a] {
        RecorderServer server(common.game(), a->out, a->seed);
        const int port = server.bind(a->host, a->port);
        out << "recorder listening on http://" << a->host << ":" << port << "\n";
        out.flush();
        server.listen();
      };
    });
  }
}

struct PipelineArgs {
  std::string config, run_dir;
};

void add_pipeline_flags(CLI::App* cmd, PipelineArgs& a) {
  cmd->add_option("--config", a.config, "Run config JSON (defaults when omitted)");
  cmd->add_option("--run-dir", a.run_dir, "Directory for every artifact of the run")->required();
}

void run_pipeline_args(const PipelineArgs& a, std::ostream& out) {
  const RunConfig config = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  const json report = run_pipeline(config, a.run_dir, out);
  out << report.dump(2) << "\n";
}

int guarded(CLI::App& app, const std::vector<std::string>& args, const std::function<void()>& after_parse,
            std::ostream& out, std::ostream& err) {
  std::vector<char*> argv;
  std::vector<std::string> copy = args;
  for (std::string& s : copy) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    after_parse();
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep apprenticeship learning toolkit", "dal"};
  app.require_subcommand(1);
  Common common;
  std::function<void()> run;
  add_subcommands(app, common, run, out);
  PipelineArgs pa;
  auto* pipe = app.add_subcommand("pipeline", "Record, train DAQN and DARN, generalize and evaluate");
  add_pipeline_flags(pipe, pa);
  pipe->callback([&] { run = [&] { run_pipeline_args(pa, out); }; });
  return guarded(app, args, [&] { run(); }, out, err);
}

int run_pipeline_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep apprenticeship learning pipeline", "dal-pipeline"};
  PipelineArgs pa;
  add_pipeline_flags(&app, pa);
  return guarded(app, args, [&] { run_pipeline_args(pa, out); }, out, err);
}

}  // namespace dal::cli
