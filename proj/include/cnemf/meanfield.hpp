#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cnemf/measures.hpp"
#include "cnemf/model.hpp"

namespace cnemf {

/**
 * Finite lattice over the label-state measure space: each of the K blocks
 * carries a probability row over states with entries on the mesh 1/q.  Rows
 * are compositions of q into n_states parts, enumerated in ascending
 * lexicographic order; a grid point is the mixed-radix code of its K local
 * row indices (block 0 most significant).
 */
struct MeasureGrid {
  LabelGrid labels;
  int n_states = 2;
  int q = 10;
  std::vector<std::vector<int>> comps;  // shared per-block lattice rows (counts summing to q)

  static MeasureGrid make(int K, int n_states, int q, long long cap = 2000000);

  int per_block() const { return static_cast<int>(comps.size()); }
  long long size() const;
  std::vector<int> decode(long long g) const;
  long long encode(const std::vector<int>& locals) const;
  LiftedMeasure measure_at(long long g) const;

  /// Documented bound on the W1 distance from any lifted measure to the grid.
  double covering_radius(double state_diameter) const;

  struct Projection {
    long long index = 0;
    double l1_total = 0.0;  // summed per-block L1 row distances
    double w1_bound = 0.0;  // transport bound implied by the row distances
  };
  /// Per-block nearest lattice row in L1; ties resolved toward the
  /// lexicographically smallest composition.
  Projection project(const LiftedMeasure& mu, double state_diameter) const;
};

/**
 * One-step lifted dynamics: reattaches a's action kernel to mu, pushes every
 * (block, state, action) cell through the dynamics averaged over the
 * idiosyncratic noise, conditionally on the common noise outcome e0.  mu may
 * carry any multiple of the model's K blocks; coefficients then see the
 * K-block aggregate.
 */
LiftedMeasure lifted_step(const ModelSpec& model, const LiftedMeasure& mu,
                          const JointControlMeasure& a, int e0);

/// Mean reward of the reattached control: integral of f against the coupling.
double lifted_reward(const ModelSpec& model, const LiftedMeasure& mu,
                     const JointControlMeasure& a);

struct ValueTable {
  std::vector<double> v;
  int iterations = 0;
  double tol = 0.0;
  double residual_bound = 0.0;  // contraction bound on |V - TV| after stopping
};

/// Feedback policy on the grid: an action kernel per (grid point, block, state).
struct GridPolicy {
  int K = 1, X = 1, A = 1;
  std::vector<double> p;

  double at(long long g, int b, int x, int a) const {
    return p[((g * K + b) * X + x) * A + a];
  }
  double& at(long long g, int b, int x, int a) { return p[((g * K + b) * X + x) * A + a]; }
  PolicyKernel kernel_at(long long g) const;
  /// Samples an action from the cell law by inverse CDF at uniform z.
  int sample(long long g, int b, int x, double z) const;
};

struct SearchConfig {
  long long exhaustive_budget = 1000000;  // deterministic maps enumerated per grid point
  int ascent_restarts = 5;                // coordinate-ascent fallback restarts
  int ascent_sweeps = 64;
  std::uint64_t seed = 0;
};

struct BellmanStats {
  double max_projection_slack = 0.0;  // worst grid-projection W1 bound seen
  bool exhaustive = true;             // false when coordinate ascent was used
  long long maps_evaluated = 0;
};

/**
 * Bellman operators on the measure lattice.  The sup ranges over deterministic
 * cell-to-action maps (enumerated exhaustively within the search budget, with
 * a deterministic coordinate-ascent fallback beyond it); fixed-control and
 * fixed-policy applications evaluate a supplied kernel.  Transitions and
 * rewards are precomputed where exhaustive enumeration is active.
 */
class MeanFieldBellman {
 public:
  MeanFieldBellman(const ModelSpec& model, MeasureGrid grid, SearchConfig search = {});

  std::vector<double> apply_sup(const std::vector<double>& W, BellmanStats* stats = nullptr,
                                std::vector<std::vector<int>>* argmax_maps = nullptr) const;
  std::vector<double> apply_kernel(const std::vector<double>& W, const PolicyKernel& kernel,
                                   BellmanStats* stats = nullptr) const;
  std::vector<double> apply_policy(const std::vector<double>& W, const GridPolicy& policy,
                                   BellmanStats* stats = nullptr) const;

  /**
   * Randomized-control audit: at each grid point compares the deterministic
   * map sup against the sup over kernels whose cell rows live on the action
   * simplex mesh 1/q_a; returns the largest positive excess of the randomized
   * lattice over the map search.
   */
  double audit_gap(const std::vector<double>& W, int q_a, long long budget) const;

  const MeasureGrid& grid() const { return grid_; }
  const ModelSpec& model() const { return model_; }
  bool exhaustive() const { return exhaustive_; }
  long long map_count() const { return n_maps_; }

  /// Reward and per-common-noise successor of one grid point under one map.
  void evaluate_map(long long g, const std::vector<int>& map, double* reward,
                    std::vector<long long>* next, double* slack) const;

 private:
  ModelSpec model_;
  MeasureGrid grid_;
  SearchConfig search_;
  bool exhaustive_ = true;
  long long n_maps_ = 0;
  double state_diameter_ = 0.0;
  // Precomputed when exhaustive: per (grid point, map): reward and successors.
  std::vector<double> pre_reward_;
  std::vector<long long> pre_next_;
  double pre_slack_ = 0.0;

  double value_of(long long g, const std::vector<int>& map, const std::vector<double>& W,
                  double* slack) const;
  std::vector<double> ascent_sup(const std::vector<double>& W, BellmanStats* stats,
                                 std::vector<std::vector<int>>* argmax_maps) const;
};

struct MeanFieldSolution {
  ValueTable value;
  GridPolicy policy;
  BellmanStats stats;
  double stop_threshold = 0.0;
};

/**
 * Value iteration from zero to the fixed point of the sup operator; stops when
 * the sup-norm update drop is at most tol (1 - beta) / (2 beta), which bounds
 * the fixed-point error by tol / 2.  The policy is the argmax map family of a
 * final sweep.
 */
MeanFieldSolution solve_mean_field(const ModelSpec& model, const MeasureGrid& grid, double tol,
                                   const SearchConfig& search = {});

/// Iterates the fixed-policy operator to its own fixed point.
ValueTable solve_policy_value(const MeanFieldBellman& bellman, const GridPolicy& policy,
                              double tol);

/// Value-scale Holder exponent: min(1, |ln beta| / ln(2L)), with the clamp at
/// 1 applied whenever 2L <= 1.
double gamma_exponent(double beta, double L, bool* clamped = nullptr);

struct HolderData {
  double gamma_dynamics = 1.0;  // exponent from the dynamics constant
  double gamma_reward = 1.0;    // exponent from the reward constant
  double L_dynamics = 0.0;
  double L_reward = 0.0;
  bool clamped_dynamics = false;
  bool clamped_reward = false;
  std::string chosen_source = "dynamics";  // which exponent downstream bounds use
  double gamma() const { return chosen_source == "reward" ? gamma_reward : gamma_dynamics; }
};

HolderData make_holder_data(double beta, double L_dynamics, double L_reward,
                            const std::string& chosen_source = "dynamics");

struct HolderDiagnostic {
  double max_ratio = 0.0;  // max |V(mu) - V(nu)| / W1(mu, nu)^gamma over sampled pairs
  int pairs = 0;
};

HolderDiagnostic holder_diagnostic(const ModelSpec& model, const MeasureGrid& grid,
                                   const std::vector<double>& V, double gamma, int pairs,
                                   std::uint64_t seed);

/**
 * Fixed-control Bellman value at an off-grid lifted measure: reward of the
 * coupling plus the discounted grid value of the (aggregated, projected)
 * successor.  `slack` receives the worst projection bound encountered.
 */
double unlifted_bellman_value(const ModelSpec& model, const MeasureGrid& grid,
                              const std::vector<double>& V, const LiftedMeasure& mu,
                              const JointControlMeasure& a, double* slack = nullptr);

}  // namespace cnemf
