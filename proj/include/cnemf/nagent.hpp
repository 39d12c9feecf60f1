#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cnemf/model.hpp"

namespace cnemf {

/// Mixed-radix coding of joint state/action vectors; agent 0 occupies the most
/// significant digit, so ascending codes enumerate vectors lexicographically.
long long n_encode(const std::vector<int>& digits, int radix);
std::vector<int> n_decode(long long code, int N, int radix);

/// Headline enumeration cost |X|^N |A|^N |E|^N |E0| used by the budget gate.
long double n_agent_budget_cost(const ModelSpec& model, int N);

/**
 * Exact Bellman operators of the N-agent problem on joint state vectors.
 * Rewards average the N-agent reward coefficients over agents; transitions
 * push every agent through the N-agent dynamics with independent
 * idiosyncratic noises, conditionally on the shared common noise, and the
 * expectation over next joint states factorizes over agents.
 *
 * Construction refuses instances whose headline cost exceeds the budget.
 */
class NAgentBellman {
 public:
  NAgentBellman(const ModelSpec& model, const NAgentSpec& nagent, int N,
                long long budget = 10000000);

  /// Sup over all action vectors, lexicographically smallest argmax on ties.
  std::vector<double> apply_sup(const std::vector<double>& W,
                                std::vector<std::vector<int>>* argmax = nullptr) const;
  /// Fixed feedback table: one action vector per joint state.
  std::vector<double> apply_table(const std::vector<double>& W,
                                  const std::vector<std::vector<int>>& actions) const;

  long long state_count() const { return n_states_; }
  long long action_count() const { return n_actions_; }
  int population() const { return N_; }
  const ModelSpec& model() const { return model_; }
  const NAgentSpec& nagent() const { return nagent_; }

 private:
  ModelSpec model_;
  NAgentSpec nagent_;
  int N_;
  long long n_states_ = 1, n_actions_ = 1;
  // Precomputed per (joint state, joint action): average reward, and per
  // (common noise, agent) the next-state law.
  std::vector<double> reward_;
  std::vector<double> rows_;
  double expected_value(long long xg, long long ag, const std::vector<double>& W) const;
};

struct NTable {
  int N = 1;
  int n_states = 2;
  std::vector<double> v;
};

struct NAgentSolution {
  NTable value;
  std::vector<std::vector<int>> policy;  // argmax action vector per joint state
  int iterations = 0;
  double tol = 0.0;
  double residual_bound = 0.0;
};

/// Value iteration from zero with the same stopping rule as the mean-field
/// solver; the policy is the lexicographically smallest argmax family.
NAgentSolution solve_n_agent(const ModelSpec& model, const NAgentSpec& nagent, int N, double tol,
                             long long budget = 10000000);

/**
 * One fixed-action Bellman evaluation (no budget gate): average N-agent reward
 * of (xs, as) plus the discounted factorized expectation of W at the successor
 * configuration.
 */
double n_fixed_action_value(const ModelSpec& model, const NAgentSpec& nagent, int N,
                            const std::vector<int>& xs, const std::vector<int>& as,
                            const std::vector<double>& W);

/// A (possibly open-loop, possibly randomized) joint policy for simulation:
/// maps (step, joint state, one uniform per agent) to an action vector.
struct NPolicy {
  std::function<std::vector<int>(int t, const std::vector<int>& x, const std::vector<double>& z)>
      act;
};

NPolicy npolicy_from_table(const std::vector<std::vector<int>>& table, int N, int n_states);

struct NTrajectoryStep {
  std::vector<int> x, a, e;
  int e0 = 0;
  double mean_reward = 0.0;
};

struct NTrajectory {
  std::vector<NTrajectoryStep> steps;
  std::vector<int> x_final;
};

/**
 * Simulates the N-agent system for `horizon` steps.  Draw order per step:
 * policy uniforms (agents ascending), idiosyncratic noises (agents ascending),
 * then the common noise; each group uses its own counter-based stream keyed by
 * (seed, purpose, sample_index), so trajectories are reproducible and
 * independent across sample indices.
 */
NTrajectory simulate_n(const ModelSpec& model, const NAgentSpec& nagent, int N,
                       const NPolicy& policy, const std::vector<int>& x0, int horizon,
                       std::uint64_t seed, std::uint64_t sample_index);

struct McGain {
  double mean = 0.0;
  double std_error = 0.0;
  double ci95 = 0.0;
  int samples = 0;
  int horizon = 0;
  double truncation_bound = 0.0;  // discarded-tail bound beta^T bound(f)/(1-beta)
};

/**
 * Monte-Carlo discounted gain of a policy from x0.  The horizon is chosen so
 * the discarded tail is at most tol/2: T = ceil(ln(tol (1-beta) / (2 bound)) /
 * ln beta), at least 1.
 */
McGain mc_policy_gain(const ModelSpec& model, const NAgentSpec& nagent, int N,
                      const NPolicy& policy, const std::vector<int>& x0, double tol, int samples,
                      std::uint64_t seed);

}  // namespace cnemf
