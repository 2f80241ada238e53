#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace dal::tabular {

// Row-major [state][action] table.
using Table = std::vector<std::vector<double>>;

Table make_table(std::size_t n_states, std::size_t n_actions, double value = 0.0);

struct Mdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  double gamma = 0.9;
  std::vector<double> transitions;  // P(s'|s,a) at (s * n_actions + a) * n_states + s'
  Table rewards;                    // R(s,a)

  static Mdp blank(std::size_t n_states, std::size_t n_actions, double gamma);
  double p(std::size_t s, std::size_t a, std::size_t s2) const {
    return transitions[(s * n_actions + a) * n_states + s2];
  }
  double& p(std::size_t s, std::size_t a, std::size_t s2) { return transitions[(s * n_actions + a) * n_states + s2]; }
  // Every row of P sums to 1 within 1e-12, gamma in [0,1), shapes agree.
  void validate() const;
  bool deterministic() const;
  // Successor of a deterministic (s, a).
  std::size_t next_state(std::size_t s, std::size_t a) const;
};

// Text format: "states actions gamma", then states*actions lines of P(.|s,a)
// with n_states entries, then states lines of R(s,.) with n_actions entries.
// '#' starts a comment.
std::string to_text(const Mdp& mdp);
Mdp parse_mdp(const std::string& text);
Mdp load_mdp(const std::filesystem::path& path);
void save_mdp(const Mdp& mdp, const std::filesystem::path& path);

// Random dense transition rows and uniform rewards in [-1, 1].
Mdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, std::mt19937_64& rng);
// n cells in a row; actions left, stay, right, clamped at the ends. Reward 1
// for any action taken in the goal cell.
Mdp line_world(std::size_t n, std::size_t goal, double gamma);
// n cells; action 0 moves left, action 1 moves right, clamped. Reward 1 for
// moving right in the last cell.
Mdp chain(std::size_t n, double gamma);

struct ValueTables {
  std::vector<double> v;
  Table q;
  std::size_t iterations = 0;
};

// Iterates V <- max_a [R + gamma P V] until the sup-norm change drops below tol.
ValueTables value_iteration(const Mdp& mdp, double tol = 1e-12, std::size_t max_iterations = 1000000);
// Q(s,a) = R(s,a) + gamma sum_s' P(s'|s,a) V(s').
Table q_from_v(const Mdp& mdp, const std::vector<double>& v);
// sup_s |V(s) - max_a [R + gamma P V](s,a)|.
double bellman_residual(const Mdp& mdp, const std::vector<double>& v);

// Q(s,a) += alpha (r + gamma max_a' Q(s',a') - Q(s,a)).
void q_update(Table& q, std::size_t s, std::size_t a, double r, std::size_t s2, double alpha, double gamma);

struct QLearningConfig {
  double alpha = 0.5;
  double epsilon = 0.2;
  std::size_t episodes = 5000;
  std::size_t steps_per_episode = 20;  // episodes start in a uniformly random state
  std::uint64_t seed = 0;
};

// epsilon-greedy tabular Q-learning, sampling transitions from P and rewards from R.
ValueTables q_learning(const Mdp& mdp, const QLearningConfig& config);

std::size_t argmax_lowest(const std::vector<double>& row);
std::vector<std::size_t> greedy_actions(const Table& q);

struct PolicyTable {
  Table probs;
  std::vector<std::size_t> greedy() const;
};

PolicyTable greedy_policy(const Table& q);
PolicyTable boltzmann_policy(const Table& q, double beta);

struct StateAction {
  std::size_t s = 0;
  std::size_t a = 0;
};
using Episode = std::vector<StateAction>;

struct EmpiricalStats {
  std::vector<double> psi;    // visit frequency over all recorded visits
  Table pi;                   // conditional action frequencies; zero rows where undefined
  std::vector<bool> defined;  // state visited at least once
};

EmpiricalStats empirical_stats(const std::vector<Episode>& episodes, std::size_t n_states, std::size_t n_actions);

// sum_s sum_a psi(s) (pi(a|s) - pi_hat(a|s))^2 over visited states.
double imitation_loss(const PolicyTable& policy, const EmpiricalStats& stats);

// Rolls out a deterministic action table from a start state.
Episode rollout(const Mdp& mdp, const std::vector<std::size_t>& actions, std::size_t start, std::size_t length);

struct Transition {
  std::size_t s = 0;
  std::size_t a = 0;
  std::size_t s2 = 0;
};

struct CsiOptions {
  double learning_rate = 0.5;
  std::size_t iterations = 2000;
  double l2 = 1e-3;
};

struct CsiResult {
  Table scores;                         // classifier logits q(s,a)
  std::vector<std::size_t> classifier;  // argmax_a q(s,a)
  Table rewards;                        // per-cell mean of q(s,a) - gamma q(s', pi_C(s'))
  std::size_t unobserved_cells = 0;     // cells with no transition, left at 0
};

// Cascaded supervised IRL: multinomial logistic regression on one-hot states
// over the expert pairs, then reward regression on the transitions. Only sees
// the datasets, never an MDP reward.
CsiResult csi(const std::vector<StateAction>& expert_pairs, const std::vector<Transition>& transitions,
              std::size_t n_states, std::size_t n_actions, double gamma, const CsiOptions& options = {});

// features[s][i]; reward r_theta(s,a) = sum_i theta_i features[s][i].
using Features = std::vector<std::vector<double>>;
Features one_hot_features(std::size_t n_states);
Mdp with_state_reward(Mdp mdp, const Features& features, const std::vector<double>& theta);

struct FixedPoint {
  std::vector<Table> phi;  // phi[i][s][a] = dQ*(s,a)/d theta_i
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Solves phi = dr/dtheta + gamma P pi phi by iteration, with the given policy
// weighting successor actions.
FixedPoint q_sensitivity(const Mdp& mdp, const Features& features, const Table& policy, double tol = 1e-8,
                         std::size_t max_iterations = 100000);

struct IrlOptions {
  double beta = 5.0;
  double eta = 0.1;
  std::size_t max_iterations = 500;
  double eps = 1e-3;
  double value_tol = 1e-10;
  double fixed_point_tol = 1e-8;
};

struct IrlResult {
  std::vector<double> theta;
  PolicyTable policy;
  std::vector<double> losses;  // J before each update, then the final J
  std::size_t iterations = 0;
  bool reached_eps = false;
  bool fixed_point_failed = false;
  double fixed_point_residual = 0.0;
};

// Gradient of J with respect to theta at the given parameters.
std::vector<double> irl_gradient(const Mdp& mdp, const Features& features, const std::vector<double>& theta,
                                 const EmpiricalStats& stats, const IrlOptions& options, double* loss = nullptr,
                                 FixedPoint* fixed_point = nullptr);

// Boltzmann-policy gradient IRL; mdp.rewards is ignored.
IrlResult gradient_irl(const Mdp& mdp, const EmpiricalStats& stats, const Features& features,
                       std::vector<double> theta, const IrlOptions& options = {});

}  // namespace dal::tabular
