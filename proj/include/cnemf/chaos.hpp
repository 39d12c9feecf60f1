#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cnemf/meanfield.hpp"
#include "cnemf/model.hpp"
#include "cnemf/nagent.hpp"
#include "cnemf/transport.hpp"

namespace cnemf {

struct ChaosParams {
  std::vector<int> Ns;          // population sizes, each a multiple of K
  std::vector<int> x0_profile;  // one state per block, replicated to X^N
  int q = 10;                   // measure-lattice resolution
  double mf_tol = 1e-6;
  double n_tol = 1e-6;
  int mn_samples = 200;             // Monte-Carlo clouds per M_N estimate
  long long gap_enum_cap = 1000000;  // exhaustive coefficient-gap cap
  int gap_samples = 2000;            // sampled configurations above the cap
  long long n_budget = 10000000;     // exact-solver enumeration budget
  int lipschitz_probes = 24;
  double denom_floor = 0.01;
  std::string gamma_source = "dynamics";  // "dynamics" | "reward"
  std::uint64_t seed = 1;
};

struct ChaosRow {
  int N = 0;
  bool skipped = false;
  std::string skip_reason;
  double v_n = 0.0;             // V_N at the replicated profile
  double v_hat = 0.0;           // grid value at the aggregated lifted empirical
  double gap = 0.0;             // |v_n - v_hat|
  double projection_w1 = 0.0;   // W1 bound of the grid projection of mu_N
  double m_hat = 0.0;           // E[W1(N-cloud, visited coupling)] on I x X x A
  double m_hat_se = 0.0;
  double eps_f = 0.0;           // reward-coefficient gap at this N
  double eps_F = 0.0;           // dynamics-coefficient gap at this N
  bool gaps_exhaustive = true;
  double bound = 0.0;           // m_hat^gamma + eps_f + eps_F^gamma
  double ratio = 0.0;           // gap / bound
  double solver_slack = 0.0;    // value-iteration residuals + projection bound
};

struct ChaosReport {
  int K = 1, n_states = 1, n_actions = 1, q = 1;
  double beta = 0.0;
  double gamma = 0.0;
  HolderData holder;
  LipschitzEstimate lipschitz;
  double mf_residual_bound = 0.0;
  double mf_search_slack = 0.0;
  std::uint64_t seed = 0;
  std::string mn_note;  // proxy caveat: visited measures only, not a sup
  std::vector<ChaosRow> rows;
};

/**
 * Value-gap experiment: solves the mean-field problem once on the lattice and,
 * for each admissible N, solves the N-agent problem exactly at the blockwise
 * replication of x0_profile, then assembles the gap |V_N - V_hat| next to the
 * rate components M_hat^gamma + eps_f + eps_F^gamma.  Rows whose N violates
 * divisibility or the enumeration budget are reported as skipped rather than
 * failing the run.
 */
ChaosReport run_chaos_experiment(const ModelSpec& model,
                                 const std::function<NAgentSpec(int)>& nagent_for,
                                 const ChaosParams& params);

struct OperatorGapParams {
  int samples = 40;        // sampled (joint state, control pairing) instances
  int mn_samples = 200;    // clouds for the M_N proxy on I x X x A
  int cloud_samples = 200; // clouds for the sampled-cloud distance check
  long long gap_enum_cap = 1000000;
  int gap_samples = 2000;
  std::uint64_t seed = 1;
};

struct OperatorGapRow {
  bool paired = false;    // action vector induced from the map (driver 0)
  double gap = 0.0;       // |unlifted fixed-map value - N-agent fixed-action value|
  double driver_w = 0.0;  // W1 between the two (label, state, action) couplings
  double rhs = 0.0;       // m_hat^gamma + driver^gamma + eps_f + eps_F^gamma
};

struct OperatorGapReport {
  int N = 0;
  double gamma = 0.0;
  double m_hat = 0.0, m_hat_se = 0.0;
  double eps_f = 0.0, eps_F = 0.0;
  double unlift_projection_w1 = 0.0;  // worst projection slack in the tilde-V table
  std::vector<OperatorGapRow> rows;
  double slope = 0.0;      // through-origin regression of gap against rhs
  double max_ratio = 0.0;  // max gap / rhs over rows
  // Sampled-cloud distance check: E[W1(cloud from the lifted empirical,
  // atomic empirical)] <= m_hat(I x X) + 1/(2N) + 3 SE + mesh allowance.
  double cloud_mean = 0.0, cloud_se = 0.0;
  double cloud_m_hat = 0.0, cloud_m_hat_se = 0.0;  // M_N proxy on I x X
  double cloud_bound = 0.0;
  bool cloud_ok = false;
  double cloud_pathwise_excess = 0.0;  // max over clouds of the triangle slack
};

/**
 * Operator-proximity diagnostics at one N: samples joint states with paired
 * (map-induced, driver-zero) and independent (random map, random actions)
 * control pairings, computes the unlifted mean-field operator value against
 * the exact N-agent fixed-action operator on the unlifted value table, and
 * regresses the observed gap on the rate expression.  Also runs the
 * sampled-cloud Wasserstein check at the replicated profile.
 */
OperatorGapReport operator_gap_diagnostics(const ModelSpec& model, const NAgentSpec& nagent,
                                           int N, const MeasureGrid& grid,
                                           const std::vector<double>& V, double gamma,
                                           const std::vector<int>& x0_profile,
                                           const OperatorGapParams& params);

struct WeakStrongResult {
  double weak_mean = 0.0, weak_se = 0.0, weak_ci95 = 0.0;
  double strong_mean = 0.0, strong_se = 0.0, strong_ci95 = 0.0;
  double diff_mean = 0.0, diff_se = 0.0, diff_ci95 = 0.0;  // paired differences
  int samples = 0;
  int horizon = 0;
  int chains = 0;              // simulated strong-formulation chains
  double truncation_bound = 0.0;
  bool ci_overlap = false;     // |weak - strong| within the summed 95% CIs
};

/**
 * Implementation-level equivalence of the weak and strong formulations under
 * one randomized feedback policy.  Per sample: one common-noise path drives
 * both sides; the weak gain integrates the reward against the exact lifted
 * flow (zero conditional variance), while the strong gain averages per-label
 * chains whose measure argument is that same flow.  The strong estimator is
 * conditionally unbiased for the weak one, so the paired difference has mean
 * zero up to Monte-Carlo error.
 */
WeakStrongResult weak_strong_equivalence(const ModelSpec& model, const MeasureGrid& grid,
                                         const GridPolicy& pol, const LiftedMeasure& mu0,
                                         double tol, int samples, int chains_per_block,
                                         std::uint64_t seed);

}  // namespace cnemf
