#include "cnemf/nagent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cnemf/measures.hpp"
#include "cnemf/rng.hpp"

namespace cnemf {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("nagent: " + msg);
}

}  // namespace

long long n_encode(const std::vector<int>& digits, int radix) {
  long long code = 0;
  for (int d : digits) {
    require(d >= 0 && d < radix, "digit out of range");
    code = code * radix + d;
  }
  return code;
}

std::vector<int> n_decode(long long code, int N, int radix) {
  std::vector<int> digits(N);
  for (int i = N - 1; i >= 0; --i) {
    digits[i] = static_cast<int>(code % radix);
    code /= radix;
  }
  require(code == 0, "code out of range");
  return digits;
}

long double n_agent_budget_cost(const ModelSpec& model, int N) {
  long double c = model.noise.common.size();
  for (int i = 0; i < N; ++i)
    c *= static_cast<long double>(model.state.size()) * model.action.size() *
         model.noise.idio.size();
  return c;
}

namespace {

struct AgentLaws {
  double reward = 0.0;
  // next-state pmf per (common noise, agent): laws[(e0 * N + i) * X + y]
  std::vector<double> rows;
};

AgentLaws laws_for(const ModelSpec& model, const NAgentSpec& nagent, int N,
                   const std::vector<int>& xs, const std::vector<int>& as) {
  const int X = model.state.size();
  const int A = model.action.size();
  const int E = model.noise.idio.size();
  const int E0 = model.noise.common.size();
  const JointControlMeasure joint = make_empirical_lifted(xs, as, X, A);
  const JointControlMeasure mKN = aggregate_blocks(joint, nagent.K_N);

  AgentLaws out;
  out.rows.assign(static_cast<std::size_t>(E0) * N * X, 0.0);
  for (int i = 0; i < N; ++i) {
    const int b = agent_block(i, N, nagent.K_N);
    out.reward += eval_f_N(model, nagent, b, xs[i], as[i], mKN);
    for (int e0 = 0; e0 < E0; ++e0)
      for (int e = 0; e < E; ++e) {
        const int y = eval_F_N(model, nagent, b, xs[i], as[i], mKN, e, e0);
        out.rows[(static_cast<std::size_t>(e0) * N + i) * X + y] += model.noise.idio.probs[e];
      }
  }
  out.reward /= N;
  return out;
}

// Expectation of W over the product of per-agent next-state laws.
double product_expectation(const double* rows, int N, int X, const std::vector<double>& W) {
  // Depth-first accumulation with running products and a running state code.
  double total = 0.0;
  std::vector<int> digit(N, 0);
  std::vector<double> prod(N + 1);
  std::vector<long long> code(N + 1, 0);
  prod[0] = 1.0;
  int level = 0;
  while (level >= 0) {
    if (level == N) {
      total += prod[N] * W[code[N]];
      --level;
      ++digit[level];
      continue;
    }
    if (digit[level] == X) {
      --level;
      if (level >= 0) ++digit[level];
      continue;
    }
    const double p = rows[static_cast<std::size_t>(level) * X + digit[level]];
    if (p == 0.0) {
      ++digit[level];
      continue;
    }
    prod[level + 1] = prod[level] * p;
    code[level + 1] = code[level] * X + digit[level];
    ++level;
    if (level < N)
      digit[level] = 0;
  }
  return total;
}

}  // namespace

NAgentBellman::NAgentBellman(const ModelSpec& model, const NAgentSpec& nagent, int N,
                             long long budget)
    : model_(model), nagent_(nagent), N_(N) {
  require(N >= 1, "population size must be positive");
  require(N % nagent.K_N == 0, "N-agent blocks must divide the population size");
  const long double cost = n_agent_budget_cost(model, N);
  if (cost > static_cast<long double>(budget)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.3Le", cost);
    throw std::invalid_argument(
        "nagent: exact solve refused, enumeration cost " + std::string(buf) + " exceeds budget " +
        std::to_string(budget) + "; reduce N or the noise resolution, or raise the budget");
  }
  const int X = model.state.size();
  const int A = model.action.size();
  const int E0 = model.noise.common.size();
  for (int i = 0; i < N; ++i) {
    n_states_ *= X;
    n_actions_ *= A;
  }
  const long double mem = static_cast<long double>(n_states_) * n_actions_ *
                          (sizeof(double) + static_cast<long double>(E0) * N * X * sizeof(double));
  require(mem <= 1024.0L * 1024 * 1024, "transition tables exceed the memory cap");

  reward_.resize(static_cast<std::size_t>(n_states_) * n_actions_);
  rows_.resize(static_cast<std::size_t>(n_states_) * n_actions_ * E0 * N * X);
  for (long long xg = 0; xg < n_states_; ++xg) {
    const std::vector<int> xs = n_decode(xg, N, X);
    for (long long ag = 0; ag < n_actions_; ++ag) {
      const std::vector<int> as = n_decode(ag, N, A);
      const AgentLaws laws = laws_for(model_, nagent_, N_, xs, as);
      reward_[xg * n_actions_ + ag] = laws.reward;
      std::copy(laws.rows.begin(), laws.rows.end(),
                rows_.begin() + (xg * n_actions_ + ag) * E0 * N * X);
    }
  }
}

double NAgentBellman::expected_value(long long xg, long long ag,
                                     const std::vector<double>& W) const {
  const int X = model_.state.size();
  const int E0 = model_.noise.common.size();
  double v = reward_[xg * n_actions_ + ag];
  const double* base = rows_.data() + (xg * n_actions_ + ag) * E0 * N_ * X;
  for (int e0 = 0; e0 < E0; ++e0)
    v += model_.beta * model_.noise.common.probs[e0] *
         product_expectation(base + static_cast<std::size_t>(e0) * N_ * X, N_, X, W);
  return v;
}

std::vector<double> NAgentBellman::apply_sup(const std::vector<double>& W,
                                             std::vector<std::vector<int>>* argmax) const {
  require(static_cast<long long>(W.size()) == n_states_, "value table size mismatch");
  std::vector<double> out(n_states_);
  if (argmax) argmax->assign(n_states_, {});
  for (long long xg = 0; xg < n_states_; ++xg) {
    double best = -std::numeric_limits<double>::infinity();
    long long best_ag = 0;
    for (long long ag = 0; ag < n_actions_; ++ag) {
      const double v = expected_value(xg, ag, W);
      if (v > best) {  // strict: first maximizer is the lexicographically smallest
        best = v;
        best_ag = ag;
      }
    }
    out[xg] = best;
    if (argmax) (*argmax)[xg] = n_decode(best_ag, N_, model_.action.size());
  }
  return out;
}

std::vector<double> NAgentBellman::apply_table(const std::vector<double>& W,
                                               const std::vector<std::vector<int>>& actions) const {
  require(static_cast<long long>(W.size()) == n_states_, "value table size mismatch");
  require(static_cast<long long>(actions.size()) == n_states_, "action table size mismatch");
  std::vector<double> out(n_states_);
  for (long long xg = 0; xg < n_states_; ++xg)
    out[xg] = expected_value(xg, n_encode(actions[xg], model_.action.size()), W);
  return out;
}

NAgentSolution solve_n_agent(const ModelSpec& model, const NAgentSpec& nagent, int N, double tol,
                             long long budget) {
  require(tol > 0.0, "tolerance must be positive");
  NAgentBellman bell(model, nagent, N, budget);
  const double beta = model.beta;
  const double thresh =
      beta > 0.0 ? tol * (1.0 - beta) / (2.0 * beta) : std::numeric_limits<double>::infinity();

  NAgentSolution sol;
  std::vector<double> W(bell.state_count(), 0.0);
  std::vector<std::vector<int>> argmax;
  double delta = 0.0;
  const int max_iter = 200000;
  while (true) {
    ++sol.iterations;
    require(sol.iterations <= max_iter, "value iteration failed to converge");
    std::vector<double> next = bell.apply_sup(W, &argmax);
    delta = 0.0;
    for (std::size_t i = 0; i < W.size(); ++i) delta = std::max(delta, std::fabs(next[i] - W[i]));
    W = std::move(next);
    if (delta <= thresh) break;
  }
  sol.value.N = N;
  sol.value.n_states = model.state.size();
  sol.value.v = std::move(W);
  sol.policy = std::move(argmax);
  sol.tol = tol;
  sol.residual_bound = beta > 0.0 ? beta * delta / (1.0 - beta) : 0.0;
  return sol;
}

double n_fixed_action_value(const ModelSpec& model, const NAgentSpec& nagent, int N,
                            const std::vector<int>& xs, const std::vector<int>& as,
                            const std::vector<double>& W) {
  require(static_cast<int>(xs.size()) == N && static_cast<int>(as.size()) == N,
          "configuration sizes must equal N");
  const int X = model.state.size();
  long long S = 1;
  for (int i = 0; i < N; ++i) S *= X;
  require(static_cast<long long>(W.size()) == S, "value table size mismatch");
  const AgentLaws laws = laws_for(model, nagent, N, xs, as);
  double v = laws.reward;
  for (int e0 = 0; e0 < model.noise.common.size(); ++e0)
    v += model.beta * model.noise.common.probs[e0] *
         product_expectation(laws.rows.data() + static_cast<std::size_t>(e0) * N * X, N, X, W);
  return v;
}

NPolicy npolicy_from_table(const std::vector<std::vector<int>>& table, int N, int n_states) {
  long long S = 1;
  for (int i = 0; i < N; ++i) S *= n_states;
  require(static_cast<long long>(table.size()) == S, "policy table size mismatch");
  return NPolicy{[table, n_states](int, const std::vector<int>& x,
                                   const std::vector<double>&) {
    return table[n_encode(x, n_states)];
  }};
}

NTrajectory simulate_n(const ModelSpec& model, const NAgentSpec& nagent, int N,
                       const NPolicy& policy, const std::vector<int>& x0, int horizon,
                       std::uint64_t seed, std::uint64_t sample_index) {
  require(static_cast<int>(x0.size()) == N, "initial configuration size must equal N");
  require(N % nagent.K_N == 0, "N-agent blocks must divide the population size");
  require(horizon >= 0, "horizon must be >= 0");
  const int X = model.state.size();
  const int A = model.action.size();
  for (int x : x0) require(x >= 0 && x < X, "initial state out of range");

  RngStream z_stream(seed, "sim-z", sample_index);
  RngStream e_stream(seed, "sim-idio", sample_index);
  RngStream c_stream(seed, "sim-common", sample_index);

  NTrajectory traj;
  std::vector<int> x = x0;
  std::vector<double> z(N);
  for (int t = 0; t < horizon; ++t) {
    NTrajectoryStep step;
    step.x = x;
    for (int i = 0; i < N; ++i) z[i] = z_stream.uniform01();
    step.a = policy.act(t, x, z);
    require(static_cast<int>(step.a.size()) == N, "policy returned a wrong-size action vector");
    for (int a : step.a) require(a >= 0 && a < A, "policy returned an action out of range");
    step.e.resize(N);
    for (int i = 0; i < N; ++i) step.e[i] = e_stream.sample_pmf(model.noise.idio.probs);
    step.e0 = c_stream.sample_pmf(model.noise.common.probs);

    const JointControlMeasure joint = make_empirical_lifted(step.x, step.a, X, A);
    const JointControlMeasure mKN = aggregate_blocks(joint, nagent.K_N);
    double reward = 0.0;
    std::vector<int> x_next(N);
    for (int i = 0; i < N; ++i) {
      const int b = agent_block(i, N, nagent.K_N);
      reward += eval_f_N(model, nagent, b, step.x[i], step.a[i], mKN);
      x_next[i] = eval_F_N(model, nagent, b, step.x[i], step.a[i], mKN, step.e[i], step.e0);
    }
    step.mean_reward = reward / N;
    traj.steps.push_back(std::move(step));
    x = std::move(x_next);
  }
  traj.x_final = x;
  return traj;
}

McGain mc_policy_gain(const ModelSpec& model, const NAgentSpec& nagent, int N,
                      const NPolicy& policy, const std::vector<int>& x0, double tol, int samples,
                      std::uint64_t seed) {
  require(samples >= 2, "need at least two samples");
  require(tol > 0.0, "tolerance must be positive");
  const double beta = model.beta;
  const double bound = nagent.reward_bound;
  int T = 1;
  if (beta > 0.0 && bound > 0.0) {
    const double target = tol * (1.0 - beta) / (2.0 * bound);
    if (target < 1.0) T = std::max(1, static_cast<int>(std::ceil(std::log(target) / std::log(beta))));
  }
  McGain out;
  out.samples = samples;
  out.horizon = T;
  out.truncation_bound = beta > 0.0 ? std::pow(beta, T) * bound / (1.0 - beta) : 0.0;

  std::vector<double> gains(samples);
  for (int s = 0; s < samples; ++s) {
    const NTrajectory traj =
        simulate_n(model, nagent, N, policy, x0, T, seed, static_cast<std::uint64_t>(s));
    double g = 0.0, disc = 1.0;
    for (const auto& step : traj.steps) {
      g += disc * step.mean_reward;
      disc *= beta;
    }
    gains[s] = g;
  }
  double mean = 0.0;
  for (double g : gains) mean += g;
  mean /= samples;
  double ss = 0.0;
  for (double g : gains) ss += (g - mean) * (g - mean);
  out.mean = mean;
  out.std_error = samples > 1 ? std::sqrt(ss / (samples - 1)) / std::sqrt(samples) : 0.0;
  out.ci95 = 1.96 * out.std_error;
  return out;
}

}  // namespace cnemf
