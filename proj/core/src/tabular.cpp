#include "dal/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dal::tabular {

Table make_table(std::size_t n_states, std::size_t n_actions, double value) {
  return Table(n_states, std::vector<double>(n_actions, value));
}

Mdp Mdp::blank(std::size_t n_states, std::size_t n_actions, double gamma) {
  Mdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.transitions.assign(n_states * n_actions * n_states, 0.0);
  m.rewards = make_table(n_states, n_actions);
  return m;
}

void Mdp::validate() const {
  if (n_states == 0 || n_actions == 0) throw std::invalid_argument("mdp: needs at least one state and action");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("mdp: gamma must be in [0,1)");
  if (transitions.size() != n_states * n_actions * n_states) throw std::invalid_argument("mdp: transition size");
  if (rewards.size() != n_states) throw std::invalid_argument("mdp: reward rows");
  for (const auto& row : rewards) {
    if (row.size() != n_actions) throw std::invalid_argument("mdp: reward columns");
  }
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (std::size_t s2 = 0; s2 < n_states; ++s2) {
        const double v = p(s, a, s2);
        if (v < 0.0) throw std::invalid_argument("mdp: negative transition probability");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("mdp: P(.|" + std::to_string(s) + "," + std::to_string(a) + ") sums to " +
                                    std::to_string(sum));
      }
    }
  }
}

bool Mdp::deterministic() const {
  return std::all_of(transitions.begin(), transitions.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::size_t Mdp::next_state(std::size_t s, std::size_t a) const {
  for (std::size_t s2 = 0; s2 < n_states; ++s2) {
    if (p(s, a, s2) == 1.0) return s2;
  }
  throw std::logic_error("mdp: transition is not deterministic");
}

std::string to_text(const Mdp& mdp) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << mdp.n_states << ' ' << mdp.n_actions << ' ' << mdp.gamma << '\n';
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) out << (s2 ? " " : "") << mdp.p(s, a, s2);
      out << '\n';
    }
  }
  for (const auto& row : mdp.rewards) {
    for (std::size_t a = 0; a < row.size(); ++a) out << (a ? " " : "") << row[a];
    out << '\n';
  }
  return out.str();
}

Mdp parse_mdp(const std::string& text) {
  std::istringstream lines(text);
  std::ostringstream stripped;
  std::string line;
  while (std::getline(lines, line)) stripped << line.substr(0, line.find('#')) << '\n';
  std::istringstream in(stripped.str());
  std::size_t n = 0, m = 0;
  double gamma = 0.0;
  if (!(in >> n >> m >> gamma)) throw std::invalid_argument("mdp: bad header, expected 'states actions gamma'");
  if (n == 0 || m == 0 || n > 100000 || m > 1000) throw std::invalid_argument("mdp: bad sizes in header");
  Mdp mdp = Mdp::blank(n, m, gamma);
  for (double& v : mdp.transitions) {
    if (!(in >> v)) throw std::invalid_argument("mdp: truncated transition rows");
  }
  for (auto& row : mdp.rewards) {
    for (double& v : row) {
      if (!(in >> v)) throw std::invalid_argument("mdp: truncated reward rows");
    }
  }
  std::string extra;
  if (in >> extra) throw std::invalid_argument("mdp: trailing data '" + extra + "'");
  mdp.validate();
  return mdp;
}

Mdp load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_mdp(buf.str());
}

void save_mdp(const Mdp& mdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_text(mdp);
}

Mdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, std::mt19937_64& rng) {
  Mdp mdp = Mdp::blank(n_states, n_actions, gamma);
  std::uniform_real_distribution<double> unit(0.0, 1.0), reward(-1.0, 1.0);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (std::size_t s2 = 0; s2 < n_states; ++s2) sum += mdp.p(s, a, s2) = unit(rng);
      // Normalise, then put the rounding remainder on the last entry.
      double acc = 0.0;
      for (std::size_t s2 = 0; s2 + 1 < n_states; ++s2) acc += mdp.p(s, a, s2) /= sum;
      mdp.p(s, a, n_states - 1) = 1.0 - acc;
      mdp.rewards[s][a] = reward(rng);
    }
  }
  return mdp;
}

Mdp line_world(std::size_t n, std::size_t goal, double gamma) {
  if (n == 0 || goal >= n) throw std::invalid_argument("line_world: goal outside the row");
  Mdp mdp = Mdp::blank(n, 3, gamma);
  for (std::size_t s = 0; s < n; ++s) {
    mdp.p(s, 0, s == 0 ? 0 : s - 1) = 1.0;
    mdp.p(s, 1, s) = 1.0;
    mdp.p(s, 2, s + 1 == n ? s : s + 1) = 1.0;
    if (s == goal) mdp.rewards[s] = {1.0, 1.0, 1.0};
  }
  return mdp;
}

Mdp chain(std::size_t n, double gamma) {
  if (n == 0) throw std::invalid_argument("chain: needs a state");
  Mdp mdp = Mdp::blank(n, 2, gamma);
  for (std::size_t s = 0; s < n; ++s) {
    mdp.p(s, 0, s == 0 ? 0 : s - 1) = 1.0;
    mdp.p(s, 1, s + 1 == n ? s : s + 1) = 1.0;
  }
  mdp.rewards[n - 1][1] = 1.0;
  return mdp;
}

Table q_from_v(const Mdp& mdp, const std::vector<double>& v) {
  Table q = make_table(mdp.n_states, mdp.n_actions);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      double expect = 0.0;
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) expect += mdp.p(s, a, s2) * v[s2];
      q[s][a] = mdp.rewards[s][a] + mdp.gamma * expect;
    }
  }
  return q;
}

double bellman_residual(const Mdp& mdp, const std::vector<double>& v) {
  const Table q = q_from_v(mdp, v);
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    worst = std::max(worst, std::abs(v[s] - *std::max_element(q[s].begin(), q[s].end())));
  }
  return worst;
}

ValueTables value_iteration(const Mdp& mdp, double tol, std::size_t max_iterations) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  mdp.validate();
  ValueTables out;
  out.v.assign(mdp.n_states, 0.0);
  for (out.iterations = 1; out.iterations <= max_iterations; ++out.iterations) {
    const Table q = q_from_v(mdp, out.v);
    double change = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      const double best = *std::max_element(q[s].begin(), q[s].end());
      change = std::max(change, std::abs(best - out.v[s]));
      out.v[s] = best;
    }
    if (change < tol) break;
  }
  out.q = q_from_v(mdp, out.v);
  return out;
}

void q_update(Table& q, std::size_t s, std::size_t a, double r, std::size_t s2, double alpha, double gamma) {
  const double best = *std::max_element(q[s2].begin(), q[s2].end());
  q[s][a] += alpha * (r + gamma * best - q[s][a]);
}

std::size_t argmax_lowest(const std::vector<double>& row) {
  if (row.empty()) throw std::invalid_argument("argmax of an empty row");
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

ValueTables q_learning(const Mdp& mdp, const QLearningConfig& config) {
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) throw std::invalid_argument("q_learning: alpha in [0,1]");
  if (!(config.epsilon >= 0.0 && config.epsilon <= 1.0)) throw std::invalid_argument("q_learning: epsilon in [0,1]");
  mdp.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_state(0, mdp.n_states - 1), any_action(0, mdp.n_actions - 1);
  ValueTables out;
  out.q = make_table(mdp.n_states, mdp.n_actions);
  std::vector<double> row(mdp.n_states);
  for (std::size_t e = 0; e < config.episodes; ++e) {
    std::size_t s = any_state(rng);
    for (std::size_t t = 0; t < config.steps_per_episode; ++t) {
      const std::size_t a = unit(rng) < config.epsilon ? any_action(rng) : argmax_lowest(out.q[s]);
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) row[s2] = mdp.p(s, a, s2);
      const std::size_t s2 = std::discrete_distribution<std::size_t>(row.begin(), row.end())(rng);
      q_update(out.q, s, a, mdp.rewards[s][a], s2, config.alpha, mdp.gamma);
      s = s2;
    }
  }
  out.iterations = config.episodes;
  out.v.resize(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) out.v[s] = *std::max_element(out.q[s].begin(), out.q[s].end());
  return out;
}

std::vector<std::size_t> greedy_actions(const Table& q) {
  std::vector<std::size_t> out;
  out.reserve(q.size());
  for (const auto& row : q) out.push_back(argmax_lowest(row));
  return out;
}

std::vector<std::size_t> PolicyTable::greedy() const { return greedy_actions(probs); }

PolicyTable greedy_policy(const Table& q) {
  PolicyTable p;
  p.probs = make_table(q.size(), q.empty() ? 0 : q[0].size());
  for (std::size_t s = 0; s < q.size(); ++s) p.probs[s][argmax_lowest(q[s])] = 1.0;
  return p;
}

PolicyTable boltzmann_policy(const Table& q, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("boltzmann_policy: beta must be positive");
  PolicyTable p;
  p.probs = q;
  for (auto& row : p.probs) {
    const double top = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) sum += v = std::exp(beta * (v - top));
    for (double& v : row) v /= sum;
  }
  return p;
}

EmpiricalStats empirical_stats(const std::vector<Episode>& episodes, std::size_t n_states, std::size_t n_actions) {
  EmpiricalStats st;
  st.psi.assign(n_states, 0.0);
  st.pi = make_table(n_states, n_actions);
  st.defined.assign(n_states, false);
  std::size_t total = 0;
  for (const Episode& ep : episodes) {
    for (const StateAction& sa : ep) {
      if (sa.s >= n_states || sa.a >= n_actions) throw std::invalid_argument("empirical_stats: index out of range");
      st.psi[sa.s] += 1.0;
      st.pi[sa.s][sa.a] += 1.0;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("empirical_stats: no recorded visits");
  for (std::size_t s = 0; s < n_states; ++s) {
    if (st.psi[s] == 0.0) continue;
    st.defined[s] = true;
    for (double& v : st.pi[s]) v /= st.psi[s];
    st.psi[s] /= static_cast<double>(total);
  }
  return st;
}

double imitation_loss(const PolicyTable& policy, const EmpiricalStats& stats) {
  double j = 0.0;
  for (std::size_t s = 0; s < stats.psi.size(); ++s) {
    if (!stats.defined[s]) continue;
    for (std::size_t a = 0; a < stats.pi[s].size(); ++a) {
      const double d = policy.probs[s][a] - stats.pi[s][a];
      j += stats.psi[s] * d * d;
    }
  }
  return j;
}

Episode rollout(const Mdp& mdp, const std::vector<std::size_t>& actions, std::size_t start, std::size_t length) {
  Episode ep;
  std::size_t s = start;
  for (std::size_t t = 0; t < length; ++t) {
    ep.push_back({s, actions[s]});
    s = mdp.next_state(s, actions[s]);
  }
  return ep;
}

CsiResult csi(const std::vector<StateAction>& expert_pairs, const std::vector<Transition>& transitions,
              std::size_t n_states, std::size_t n_actions, double gamma, const CsiOptions& options) {
  if (expert_pairs.empty()) throw std::invalid_argument("csi: no expert pairs");
  for (const StateAction& sa : expert_pairs) {
    if (sa.s >= n_states || sa.a >= n_actions) throw std::invalid_argument("csi: expert pair out of range");
  }
  // Softmax regression with one weight per (state, action); with one-hot
  // inputs the gradient separates by state.
  CsiResult out;
  out.scores = make_table(n_states, n_actions);
  Table counts = make_table(n_states, n_actions);
  std::vector<double> visits(n_states, 0.0);
  for (const StateAction& sa : expert_pairs) {
    counts[sa.s][sa.a] += 1.0;
    visits[sa.s] += 1.0;
  }
  const double n = static_cast<double>(expert_pairs.size());
  for (std::size_t it = 0; it < options.iterations; ++it) {
    for (std::size_t s = 0; s < n_states; ++s) {
      if (visits[s] == 0.0) continue;
      std::vector<double>& w = out.scores[s];
      const double top = *std::max_element(w.begin(), w.end());
      std::vector<double> p(n_actions);
      double sum = 0.0;
      for (std::size_t a = 0; a < n_actions; ++a) sum += p[a] = std::exp(w[a] - top);
      for (std::size_t a = 0; a < n_actions; ++a) {
        const double grad = (visits[s] * p[a] / sum - counts[s][a]) / n + options.l2 * w[a];
        w[a] -= options.learning_rate * grad;
      }
    }
  }
  out.classifier = greedy_actions(out.scores);

  Table sums = make_table(n_states, n_actions);
  Table hits = make_table(n_states, n_actions);
  for (const Transition& t : transitions) {
    if (t.s >= n_states || t.a >= n_actions || t.s2 >= n_states) throw std::invalid_argument("csi: transition out of range");
    sums[t.s][t.a] += out.scores[t.s][t.a] - gamma * out.scores[t.s2][out.classifier[t.s2]];
    hits[t.s][t.a] += 1.0;
  }
  out.rewards = make_table(n_states, n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      if (hits[s][a] == 0.0) {
        ++out.unobserved_cells;
      } else {
        out.rewards[s][a] = sums[s][a] / hits[s][a];
      }
    }
  }
  return out;
}

Features one_hot_features(std::size_t n_states) {
  Features f(n_states, std::vector<double>(n_states, 0.0));
  for (std::size_t s = 0; s < n_states; ++s) f[s][s] = 1.0;
  return f;
}

Mdp with_state_reward(Mdp mdp, const Features& features, const std::vector<double>& theta) {
  if (features.size() != mdp.n_states) throw std::invalid_argument("features: one row per state");
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (features[s].size() != theta.size()) throw std::invalid_argument("features: width must match theta");
    double r = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) r += theta[i] * features[s][i];
    mdp.rewards[s].assign(mdp.n_actions, r);
  }
  return mdp;
}

FixedPoint q_sensitivity(const Mdp& mdp, const Features& features, const Table& policy, double tol,
                         std::size_t max_iterations) {
  const std::size_t d = features.empty() ? 0 : features[0].size();
  if (d == 0) throw std::invalid_argument("q_sensitivity: need at least one feature");
  FixedPoint fp;
  fp.phi.assign(d, make_table(mdp.n_states, mdp.n_actions));
  for (fp.iterations = 1; fp.iterations <= max_iterations; ++fp.iterations) {
    double change = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const Table& old = fp.phi[i];
      std::vector<double> next_value(mdp.n_states, 0.0);
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        for (std::size_t a2 = 0; a2 < mdp.n_actions; ++a2) next_value[s2] += policy[s2][a2] * old[s2][a2];
      }
      Table fresh = make_table(mdp.n_states, mdp.n_actions);
      for (std::size_t s = 0; s < mdp.n_states; ++s) {
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
          double expect = 0.0;
          for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) expect += mdp.p(s, a, s2) * next_value[s2];
          fresh[s][a] = features[s][i] + mdp.gamma * expect;
          change = std::max(change, std::abs(fresh[s][a] - old[s][a]));
        }
      }
      fp.phi[i] = std::move(fresh);
    }
    fp.residual = change;
    if (change < tol) {
      fp.converged = true;
      break;
    }
  }
  return fp;
}

std::vector<double> irl_gradient(const Mdp& mdp, const Features& features, const std::vector<double>& theta,
                                 const EmpiricalStats& stats, const IrlOptions& options, double* loss,
                                 FixedPoint* fixed_point) {
  const Mdp planted = with_state_reward(mdp, features, theta);
  const ValueTables vt = value_iteration(planted, options.value_tol);
  const PolicyTable pi = boltzmann_policy(vt.q, options.beta);
  // Q* is a max over actions, so its derivative follows the greedy action.
  FixedPoint fp = q_sensitivity(planted, features, greedy_policy(vt.q).probs, options.fixed_point_tol);
  if (loss) *loss = imitation_loss(pi, stats);
  std::vector<double> grad(theta.size(), 0.0);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (!stats.defined[s]) continue;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const std::vector<double>& phi = fp.phi[i][s];
      double mean_phi = 0.0;
      for (std::size_t b = 0; b < mdp.n_actions; ++b) mean_phi += pi.probs[s][b] * phi[b];
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        const double dpi = options.beta * pi.probs[s][a] * (phi[a] - mean_phi);
        grad[i] += stats.psi[s] * 2.0 * (pi.probs[s][a] - stats.pi[s][a]) * dpi;
      }
    }
  }
  if (fixed_point) *fixed_point = std::move(fp);
  return grad;
}

IrlResult gradient_irl(const Mdp& mdp, const EmpiricalStats& stats, const Features& features,
                       std::vector<double> theta, const IrlOptions& options) {
  if (!(options.beta > 0.0)) throw std::invalid_argument("gradient_irl: beta must be positive");
  if (theta.empty()) throw std::invalid_argument("gradient_irl: theta must be nonempty");
  IrlResult out;
  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    double j = 0.0;
    FixedPoint fp;
    const std::vector<double> grad = irl_gradient(mdp, features, theta, stats, options, &j, &fp);
    out.losses.push_back(j);
    out.fixed_point_residual = fp.residual;
    if (!fp.converged) {
      out.fixed_point_failed = true;
      break;
    }
    if (j < options.eps) {
      out.reached_eps = true;
      break;
    }
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= options.eta * grad[i];
  }
  const ValueTables vt = value_iteration(with_state_reward(mdp, features, theta), options.value_tol);
  out.policy = boltzmann_policy(vt.q, options.beta);
  if (!out.reached_eps && !out.fixed_point_failed) {
    const double j = imitation_loss(out.policy, stats);
    out.losses.push_back(j);
    out.reached_eps = j < options.eps;
  }
  out.theta = std::move(theta);
  return out;
}

}  // namespace dal::tabular
