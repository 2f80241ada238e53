#include "dal/daqn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace dal {

namespace {

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
}

double glorot_bound(double fan_in, double fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); }

}  // namespace

Network build_network(const Architecture& arch, std::uint64_t seed, const Tensor* init_filters) {
  arch.validate();
  if (arch.num_actions < 2) throw std::invalid_argument("build: need at least 2 actions");
  if (arch.history < 1 || arch.history > 4) throw std::invalid_argument("build: history must be in 1..4");
  std::mt19937_64 rng(seed);
  Network net;
  net.arch = arch;
  const double k0 = static_cast<double>(arch.conv0_kernel * arch.conv0_kernel);
  const double k1 = static_cast<double>(arch.conv1_kernel * arch.conv1_kernel);

  LayerParams conv0{Tensor({arch.conv0_maps, arch.history, arch.conv0_kernel, arch.conv0_kernel}),
                    Tensor({arch.conv0_maps})};
  fill_uniform(conv0.weights,
               glorot_bound(arch.history * k0, arch.conv0_maps * k0 / static_cast<double>(arch.pool0 * arch.pool0)),
               rng);
  LayerParams conv1{Tensor({arch.conv1_maps, arch.conv0_maps, arch.conv1_kernel, arch.conv1_kernel}),
                    Tensor({arch.conv1_maps})};
  fill_uniform(conv1.weights,
               glorot_bound(arch.conv0_maps * k1, arch.conv1_maps * k1 / static_cast<double>(arch.pool1 * arch.pool1)),
               rng);
  LayerParams hidden{Tensor({arch.flattened_size(), arch.hidden}), Tensor({arch.hidden})};
  fill_uniform(hidden.weights, glorot_bound(static_cast<double>(arch.flattened_size()), static_cast<double>(arch.hidden)),
               rng);
  LayerParams output{Tensor({arch.hidden, arch.num_actions}), Tensor({arch.num_actions})};
  fill_uniform(output.weights, glorot_bound(static_cast<double>(arch.hidden), static_cast<double>(arch.num_actions)),
               rng);

  if (init_filters) {
    if (arch.history != 1) throw std::invalid_argument("build: pre-trained filters need history 1");
    if (init_filters->shape() != conv0.weights.shape()) {
      throw std::invalid_argument("build: filters " + shape_string(init_filters->shape()) + " do not match conv0 " +
                                  shape_string(conv0.weights.shape()));
    }
    conv0.weights = *init_filters;
  }
  net.params = {std::move(conv0), std::move(conv1), std::move(hidden), std::move(output)};
  return net;
}

Network build(std::size_t num_actions, std::size_t history, Nonlinearity nonlinearity, std::uint64_t seed,
              const Tensor* init_filters) {
  if (history < 1 || history > 4) throw std::invalid_argument("build: history must be in 1..4");
  return build_network(Architecture::standard(num_actions, history, nonlinearity), seed, init_filters);
}

QScores q_scores(const Network& net, const Tensor& state) {
  if (state.shape() != net.arch.input_shape()) {
    throw std::invalid_argument("q_scores: state " + shape_string(state.shape()) + " does not match network input " +
                                shape_string(net.arch.input_shape()));
  }
  Tensor presoft = presoft_scores(net, state);
  Tensor probs = softmax(presoft);
  return {std::move(presoft), std::move(probs)};
}

std::size_t argmax_lowest(const Tensor& values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Action greedy_action(const Network& net, const Tensor& state) {
  return action_from_index(argmax_lowest(q_scores(net, state).probs));
}

BatchGradient classification_gradient(const Network& net, const std::vector<Tensor>& states,
                                      const std::vector<std::size_t>& targets, LossKind kind) {
  if (states.empty() || states.size() != targets.size()) {
    throw std::invalid_argument("classification_gradient: need matching, nonempty states and targets");
  }
  BatchGradient out;
  out.grads = zeros_like(net.params);
  const double scale = 1.0 / static_cast<double>(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const ActivationTrace trace = forward(net, states[i]);
    out.loss += loss(trace.probs, targets[i], kind) * scale;
    if (argmax_lowest(trace.probs) != targets[i]) ++out.errors;
    axpy(out.grads, backward(net, trace, loss_gradient_presoft(trace.presoft, targets[i], kind)), scale);
  }
  return out;
}

EpochStats train_epoch(Network& net, const ProcessedDataset& data, AdaGradState& opt, const TrainOptions& options,
                       std::mt19937_64& rng) {
  if (data.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  if (options.batch_size < 1) throw std::invalid_argument("train_epoch: batch size must be >= 1");
  EpochStats stats;
  double loss_sum = 0.0;
  std::size_t errors = 0, batches = 0;
  std::vector<Tensor> states;
  std::vector<std::size_t> targets;
  for (std::size_t e = 0; e < data.episode_count(); ++e) {
    const std::size_t n = data.episode(e).size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b + options.batch_size <= n; b += options.batch_size) {
      states.clear();
      targets.clear();
      for (std::size_t j = b; j < b + options.batch_size; ++j) {
        states.push_back(data.state(e, order[j]));
        targets.push_back(action_index(data.episode(e).actions[order[j]]));
      }
      const BatchGradient g = classification_gradient(net, states, targets, options.loss);
      adagrad_step(net.params, g.grads, opt);
      loss_sum += g.loss;
      errors += g.errors;
      stats.samples += options.batch_size;
      ++batches;
    }
  }
  if (batches > 0) {
    stats.mean_loss = loss_sum / static_cast<double>(batches);
    stats.train_error = static_cast<double>(errors) / static_cast<double>(stats.samples);
  }
  return stats;
}

double evaluate(const Network& net, const ProcessedDataset& data) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) wrong += greedy_action(net, data.state(i)) != data.action(i);
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

TrainReport train_daqn(Network& net, const ProcessedDataset& train, const ProcessedDataset* test,
                       const DaqnTrainConfig& config, const EpochCallback& on_epoch) {
  AdaGradState opt = AdaGradState::for_params(net.params, config.eta);
  std::mt19937_64 rng(config.seed);
  TrainReport report;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const EpochStats stats = train_epoch(net, train, opt, config.options, rng);
    TrainReportRow row;
    row.epoch = epoch;
    row.train_error = stats.train_error;
    row.test_error = (test && !test->empty()) ? evaluate(net, *test) : 0.0;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return report;
}

namespace {

constexpr char kMagic[4] = {'D', 'A', 'L', 'N'};

void write_tensor(io::Writer& w, const Tensor& t) {
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.data()) w.f64(v);
}

Tensor read_tensor(io::Reader& r, const Shape& expected) {
  const std::size_t rank = r.u8("tensor rank");
  Shape shape(rank);
  for (std::size_t& d : shape) d = r.u32("tensor extent");
  if (shape != expected) {
    r.fail("tensor shape " + shape_string(shape) + " does not match architecture " + shape_string(expected));
  }
  Tensor t(shape);
  for (double& v : t.data()) v = r.f64("tensor data");
  return t;
}

std::vector<Shape> expected_shapes(const Architecture& a) {
  return {{a.conv0_maps, a.history, a.conv0_kernel, a.conv0_kernel},
          {a.conv0_maps},
          {a.conv1_maps, a.conv0_maps, a.conv1_kernel, a.conv1_kernel},
          {a.conv1_maps},
          {a.flattened_size(), a.hidden},
          {a.hidden},
          {a.hidden, a.num_actions},
          {a.num_actions}};
}

}  // namespace

void save_network(const Network& net, const std::filesystem::path& path) {
  require_matching_params(net);
  const Architecture& a = net.arch;
  io::Writer w;
  w.raw(kMagic, 4);
  w.u16(kNetworkFormatVersion);
  w.u8(static_cast<std::uint8_t>(net.role));
  w.u8(static_cast<std::uint8_t>(a.nonlinearity));
  w.u64(net.config_hash);
  for (std::size_t v : {a.history, a.input_size, a.conv0_maps, a.conv0_kernel, a.pool0, a.conv1_maps, a.conv1_kernel,
                        a.pool1, a.hidden, a.num_actions}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(2 * net.params.size()));
  for (const LayerParams& p : net.params) {
    write_tensor(w, p.weights);
    write_tensor(w, p.bias);
  }
  w.write_file(path);
}

Network load_network(const std::filesystem::path& path) {
  io::Reader r = io::Reader::from_file(path, "network");
  if (r.text(4, "magic") != std::string(kMagic, 4)) r.fail("bad magic (not a DALN network)");
  const std::uint16_t version = r.u16("version");
  if (version != kNetworkFormatVersion) r.fail("unsupported version " + std::to_string(version));
  Network net;
  const std::uint8_t role = r.u8("role");
  if (role > 1) r.fail("unknown role tag " + std::to_string(role));
  net.role = static_cast<NetRole>(role);
  const std::uint8_t nl = r.u8("nonlinearity");
  if (nl > 2) r.fail("unknown nonlinearity tag " + std::to_string(nl));
  net.config_hash = r.u64("config hash");
  Architecture& a = net.arch;
  a.nonlinearity = static_cast<Nonlinearity>(nl);
  for (std::size_t* field : {&a.history, &a.input_size, &a.conv0_maps, &a.conv0_kernel, &a.pool0, &a.conv1_maps,
                             &a.conv1_kernel, &a.pool1, &a.hidden, &a.num_actions}) {
    *field = r.u32("architecture");
  }
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(std::string("invalid architecture: ") + e.what());
  }
  const std::vector<Shape> shapes = expected_shapes(a);
  if (r.u32("tensor count") != shapes.size()) r.fail("unexpected tensor count");
  for (std::size_t i = 0; i < shapes.size(); i += 2) {
    LayerParams p;
    p.weights = read_tensor(r, shapes[i]);
    p.bias = read_tensor(r, shapes[i + 1]);
    net.params.push_back(std::move(p));
  }
  if (r.remaining() != 0) r.fail(std::to_string(r.remaining()) + " unexpected trailing bytes");
  return net;
}

Network load_network(const std::filesystem::path& path, const Architecture& expected, std::optional<NetRole> role) {
  Network net = load_network(path);
  if (!(net.arch == expected)) {
    throw std::invalid_argument("network file " + path.string() + " has architecture with " +
                                std::to_string(net.arch.num_actions) + " actions, history " +
                                std::to_string(net.arch.history) + ", nonlinearity " +
                                std::string(to_string(net.arch.nonlinearity)) + "; expected " +
                                std::to_string(expected.num_actions) + " actions, history " +
                                std::to_string(expected.history) + ", nonlinearity " +
                                std::string(to_string(expected.nonlinearity)));
  }
  if (role && net.role != *role) throw std::invalid_argument("network file " + path.string() + " has the wrong role");
  return net;
}

Policy network_policy(std::shared_ptr<const Network> net, OnlinePreprocessor preprocessor) {
  auto stacker = std::make_shared<FrameStacker>(net->arch.history);
  return [net, preprocessor = std::move(preprocessor), stacker](const GameState& s, const Frame& frame) {
    if (s.tick == 0) stacker->reset();
    stacker->push(preprocessor(frame));
    return greedy_action(*net, stacker->state());
  };
}

}  // namespace dal
