#include "cnemf/measures.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cnemf {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

bool LiftedMeasure::rows_normalized(double tol) const {
  for (const auto& row : rows)
    if (!is_probability_vector(row, tol)) return false;
  return true;
}

double JointControlMeasure::total_mass() const {
  double s = 0.0;
  for (double v : w) s += v;
  return s;
}

double JointControlMeasure::block_mass(int b) const {
  double s = 0.0;
  for (int x = 0; x < n_states; ++x)
    for (int a = 0; a < n_actions; ++a) s += at(b, x, a);
  return s;
}

LiftedMeasure JointControlMeasure::marginal_label_state() const {
  LiftedMeasure m;
  m.grid = grid;
  m.rows.assign(grid.K, std::vector<double>(n_states, 0.0));
  for (int b = 0; b < grid.K; ++b)
    for (int x = 0; x < n_states; ++x) {
      double s = 0.0;
      for (int a = 0; a < n_actions; ++a) s += at(b, x, a);
      m.rows[b][x] = s * grid.K;  // conditional row given the block
    }
  return m;
}

std::vector<double> PolicyKernel::cell(int b, int x) const {
  std::vector<double> out(n_actions);
  for (int a = 0; a < n_actions; ++a) out[a] = at(b, x, a);
  return out;
}

AtomicMeasure make_empirical_atoms(const std::vector<double>& labels, const std::vector<int>& states,
                                   const std::vector<int>* actions) {
  require(!labels.empty(), "empirical measure needs at least one atom");
  require(labels.size() == states.size(), "labels and states must have equal length");
  if (actions) require(actions->size() == states.size(), "actions must match states in length");
  AtomicMeasure m;
  m.atoms.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] > 0.0 && labels[i] <= 1.0,
            "label " + std::to_string(labels[i]) + " outside (0,1]");
    AtomicMeasure::Atom atom;
    atom.label = labels[i];
    atom.state = states[i];
    if (actions) atom.action = (*actions)[i];
    m.atoms.push_back(atom);
  }
  return m;
}

std::vector<double> canonical_labels(int N) {
  std::vector<double> u(N);
  for (int i = 0; i < N; ++i) u[i] = static_cast<double>(i + 1) / N;
  return u;
}

int agent_block(int agent, int N, int K) {
  require(N >= 1 && K >= 1, "population and block counts must be positive");
  require(agent >= 0 && agent < N, "agent index out of range");
  // Label (agent+1)/N lies in block ceil((agent+1) K / N) - 1 under the
  // right-closed block convention.
  const long long num = static_cast<long long>(agent + 1) * K;
  return static_cast<int>((num + N - 1) / N) - 1;
}

namespace {

void require_canonical(const std::vector<double>* labels, int N) {
  if (!labels) return;
  require(static_cast<int>(labels->size()) == N, "label count must equal state count");
  for (int i = 0; i < N; ++i)
    require(std::abs((*labels)[i] - static_cast<double>(i + 1) / N) <= 1e-12,
            "lifted empirical requires the canonical label grid i/N");
}

}  // namespace

LiftedMeasure make_empirical_lifted(const std::vector<int>& states, int n_states,
                                    const std::vector<double>* labels) {
  const int N = static_cast<int>(states.size());
  require(N >= 1, "empirical measure needs at least one agent");
  require_canonical(labels, N);
  LiftedMeasure m;
  m.grid.K = N;
  m.rows.assign(N, std::vector<double>(n_states, 0.0));
  for (int i = 0; i < N; ++i) {
    require(states[i] >= 0 && states[i] < n_states, "state index out of range");
    m.rows[i][states[i]] = 1.0;
  }
  return m;
}

JointControlMeasure make_empirical_lifted(const std::vector<int>& states,
                                          const std::vector<int>& actions, int n_states,
                                          int n_actions, const std::vector<double>* labels) {
  const int N = static_cast<int>(states.size());
  require(N >= 1, "empirical measure needs at least one agent");
  require(actions.size() == states.size(), "actions must match states in length");
  require_canonical(labels, N);
  JointControlMeasure a;
  a.grid.K = N;
  a.n_states = n_states;
  a.n_actions = n_actions;
  a.w.assign(static_cast<std::size_t>(N) * n_states * n_actions, 0.0);
  for (int i = 0; i < N; ++i) {
    require(states[i] >= 0 && states[i] < n_states, "state index out of range");
    require(actions[i] >= 0 && actions[i] < n_actions, "action index out of range");
    a.at(i, states[i], actions[i]) = 1.0 / N;
  }
  return a;
}

Disintegration disintegrate(const JointControlMeasure& a) {
  require(a.total_mass() > 0.0, "cannot disintegrate a zero-mass measure");
  const double block_tol = 1e-9;
  for (int b = 0; b < a.blocks(); ++b)
    require(std::abs(a.block_mass(b) - 1.0 / a.blocks()) <= block_tol,
            "disintegration requires per-block mass 1/K");

  Disintegration out;
  out.marginal.grid = a.grid;
  out.marginal.rows.assign(a.blocks(), std::vector<double>(a.n_states, 0.0));
  out.kernel.n_blocks = a.blocks();
  out.kernel.n_states = a.n_states;
  out.kernel.n_actions = a.n_actions;
  out.kernel.p.assign(a.w.size(), 0.0);

  const double uniform = 1.0 / a.n_actions;
  for (int b = 0; b < a.blocks(); ++b)
    for (int x = 0; x < a.n_states; ++x) {
      double mass = 0.0;
      for (int act = 0; act < a.n_actions; ++act) mass += a.at(b, x, act);
      out.marginal.rows[b][x] = mass * a.blocks();
      if (mass > 0.0) {
        for (int act = 0; act < a.n_actions; ++act) out.kernel.at(b, x, act) = a.at(b, x, act) / mass;
      } else {
        for (int act = 0; act < a.n_actions; ++act) out.kernel.at(b, x, act) = uniform;
      }
    }
  return out;
}

JointControlMeasure compose_kernel(const LiftedMeasure& mu, const PolicyKernel& k) {
  require(mu.blocks() == k.n_blocks && mu.states() == k.n_states,
          "kernel shape does not match the measure");
  JointControlMeasure a;
  a.grid = mu.grid;
  a.n_states = k.n_states;
  a.n_actions = k.n_actions;
  a.w.assign(static_cast<std::size_t>(mu.blocks()) * k.n_states * k.n_actions, 0.0);
  const double bm = mu.grid.block_mass();
  for (int b = 0; b < mu.blocks(); ++b)
    for (int x = 0; x < k.n_states; ++x) {
      const double cell = bm * mu.rows[b][x];
      for (int act = 0; act < k.n_actions; ++act) a.at(b, x, act) = cell * k.at(b, x, act);
    }
  return a;
}

JointControlMeasure coupling_project(const LiftedMeasure& mu, const JointControlMeasure& a) {
  require(mu.blocks() == a.blocks(), "measures live on different label grids");
  require(mu.states() == a.n_states, "measures live on different state spaces");

  // If a already has label-state marginal mu, return it untouched so repeated
  // projection is an exact array identity.
  bool matches = true;
  const double bm = mu.grid.block_mass();
  for (int b = 0; b < a.blocks() && matches; ++b)
    for (int x = 0; x < a.n_states && matches; ++x) {
      double mass = 0.0;
      for (int act = 0; act < a.n_actions; ++act) mass += a.at(b, x, act);
      if (std::abs(mass - bm * mu.rows[b][x]) > 1e-12) matches = false;
    }
  if (matches) return a;
  return compose_kernel(mu, disintegrate(a).kernel);
}

LiftedMeasure aggregate_blocks(const LiftedMeasure& mu, int K) {
  const int N = mu.blocks();
  require(K >= 1 && N % K == 0, "block count " + std::to_string(K) + " does not divide " +
                                    std::to_string(N));
  const int g = N / K;
  LiftedMeasure out;
  out.grid.K = K;
  out.rows.assign(K, std::vector<double>(mu.states(), 0.0));
  for (int j = 0; j < K; ++j)
    for (int i = 0; i < g; ++i)
      for (int x = 0; x < mu.states(); ++x) out.rows[j][x] += mu.rows[j * g + i][x] / g;
  return out;
}

JointControlMeasure aggregate_blocks(const JointControlMeasure& a, int K) {
  const int N = a.blocks();
  require(K >= 1 && N % K == 0, "block count " + std::to_string(K) + " does not divide " +
                                    std::to_string(N));
  const int g = N / K;
  JointControlMeasure out;
  out.grid.K = K;
  out.n_states = a.n_states;
  out.n_actions = a.n_actions;
  out.w.assign(static_cast<std::size_t>(K) * a.n_states * a.n_actions, 0.0);
  for (int j = 0; j < K; ++j)
    for (int i = 0; i < g; ++i)
      for (int x = 0; x < a.n_states; ++x)
        for (int act = 0; act < a.n_actions; ++act) out.at(j, x, act) += a.at(j * g + i, x, act);
  return out;
}

}  // namespace cnemf
