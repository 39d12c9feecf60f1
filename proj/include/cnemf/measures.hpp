#pragma once

#include <optional>
#include <vector>

#include "cnemf/spaces.hpp"

namespace cnemf {

/**
 * A label-state measure with uniform label marginal: K equal-mass label blocks,
 * each carrying a probability row over the finite state space.  Total weight of
 * cell (block b, state x) is rows[b][x] / K.
 */
struct LiftedMeasure {
  LabelGrid grid;
  std::vector<std::vector<double>> rows;  // K rows, each a probability vector over X

  int blocks() const { return grid.K; }
  int states() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }
  /// True when every row is a valid probability vector within tol.
  bool rows_normalized(double tol = 1e-12) const;
};

/**
 * A joint label-state-action measure: dense nonnegative weights indexed by
 * (block, state, action), total mass 1.  When the label-marginal constraint is
 * asserted, each block carries mass exactly 1/K.
 */
struct JointControlMeasure {
  LabelGrid grid;
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> w;  // dense, index (b * n_states + x) * n_actions + a

  double& at(int b, int x, int a) { return w[(static_cast<std::size_t>(b) * n_states + x) * n_actions + a]; }
  double at(int b, int x, int a) const {
    return w[(static_cast<std::size_t>(b) * n_states + x) * n_actions + a];
  }
  int blocks() const { return grid.K; }
  double total_mass() const;
  double block_mass(int b) const;
  /// Label-state marginal: sum over actions.
  LiftedMeasure marginal_label_state() const;
};

/// Per-(block,state) probability vector over actions: a policy kernel.
struct PolicyKernel {
  int n_blocks = 0;
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> p;  // dense, same layout as JointControlMeasure

  double& at(int b, int x, int a) { return p[(static_cast<std::size_t>(b) * n_states + x) * n_actions + a]; }
  double at(int b, int x, int a) const {
    return p[(static_cast<std::size_t>(b) * n_states + x) * n_actions + a];
  }
  /// The action vector at one (block, state) cell.
  std::vector<double> cell(int b, int x) const;
};

/// Equal-weight atoms (label, state[, action]); weights are all 1/N.
struct AtomicMeasure {
  struct Atom {
    double label = 0.0;
    int state = 0;
    std::optional<int> action;
  };
  std::vector<Atom> atoms;
  int size() const { return static_cast<int>(atoms.size()); }
};

/// Equal-weight atomic empirical measure at the given labels (each in (0,1]).
AtomicMeasure make_empirical_atoms(const std::vector<double>& labels, const std::vector<int>& states,
                                   const std::vector<int>* actions = nullptr);

/// Canonical N-agent labels i/N, i = 1..N.
std::vector<double> canonical_labels(int N);

/**
 * Block (0-based, K blocks) containing the canonical label of agent i
 * (0-based, label (i+1)/N).  Exact integer arithmetic; agrees with
 * LabelGrid::block_of at the canonical labels for any K and N.
 */
int agent_block(int agent, int N, int K);

/**
 * Lifted empirical measure of a state configuration: N blocks, row i = point
 * mass at states[i].  `labels`, when given, must be the canonical i/N grid.
 */
LiftedMeasure make_empirical_lifted(const std::vector<int>& states, int n_states,
                                    const std::vector<double>* labels = nullptr);

/// Lifted empirical with actions: N blocks, full weight of block i on (states[i], actions[i]).
JointControlMeasure make_empirical_lifted(const std::vector<int>& states,
                                          const std::vector<int>& actions, int n_states,
                                          int n_actions,
                                          const std::vector<double>* labels = nullptr);

/**
 * Disintegration of a joint measure with uniform label-state marginal blocks:
 * returns the label-state marginal and the action kernel.  On cells with zero
 * marginal mass the kernel defaults to the uniform law on actions.
 */
struct Disintegration {
  LiftedMeasure marginal;
  PolicyKernel kernel;
};
Disintegration disintegrate(const JointControlMeasure& a);

/// Kernel composition: weights(b,x,a) = (1/K) rows[b][x] kernel(b,x)(a).
JointControlMeasure compose_kernel(const LiftedMeasure& mu, const PolicyKernel& k);

/**
 * Coupling projection: re-attaches a's action kernel to mu.  When a's
 * label-state marginal already equals mu (cell-wise within 1e-12) the input is
 * returned unchanged, which makes the operation idempotent as an array
 * identity; otherwise the result is compose_kernel(mu, disintegrate(a).kernel).
 */
JointControlMeasure coupling_project(const LiftedMeasure& mu, const JointControlMeasure& a);

/// Averages consecutive groups of blocks: N-block measure down to K blocks (K | N).
LiftedMeasure aggregate_blocks(const LiftedMeasure& mu, int K);
JointControlMeasure aggregate_blocks(const JointControlMeasure& a, int K);

}  // namespace cnemf
