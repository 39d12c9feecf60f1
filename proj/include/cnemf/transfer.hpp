#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cnemf/meanfield.hpp"
#include "cnemf/nagent.hpp"
#include "cnemf/transport.hpp"

namespace cnemf {

/**
 * One action vector chosen by Wasserstein matching at a fixed joint state: the
 * candidate empirical (label, state, action) measure closest to the target
 * measure that spreads each agent's kernel row across actions, with ground
 * distance |label - label'| + d_X + d_A.  Both measures carry their labels at
 * the agents' segment representatives (i+1)/N; replacing the segment-uniform
 * labels by their representatives moves each side by at most 1/(2N) in W1, so
 * the recorded substitution slack is 1/N in total.
 */
struct MatchingResult {
  std::vector<int> actions;
  double achieved_w = 0.0;
  bool exhaustive = true;          // full scan of A^N (vs coordinate descent)
  long long grid_index = 0;        // lattice point whose kernel was matched
  double projection_w1 = 0.0;      // W1 bound of the grid projection
  double substitution_slack = 0.0; // label-representative substitution, = 1/N
};

/**
 * W1-matching action selection (requires K | N).  Exhaustive over A^N with
 * lexicographically-smallest tie-breaking while |A|^N <= budget; otherwise
 * coordinate descent started from the per-agent kernel argmax, sweeping until
 * stable or the sweep cap.
 */
MatchingResult transfer_matching(const ModelSpec& model, const MeasureGrid& grid,
                                 const GridPolicy& pol, int N, const std::vector<int>& x,
                                 long long budget = 4096, int descent_sweeps = 64);

struct TransferConfig {
  std::string mode = "direct";       // "direct" | "matching"
  long long matching_budget = 4096;  // exhaustive search while |A|^N <= budget
  int descent_sweeps = 64;           // coordinate-descent sweeps above the budget
};

/// Running diagnostics gathered while a transferred policy acts.
struct TransferStats {
  long long calls = 0;
  double max_projection_w1 = 0.0;  // worst grid-projection transport bound seen
  double max_matching_w1 = 0.0;    // worst achieved candidate-target distance
  bool exhaustive = true;          // every matching search was exhaustive
};

/**
 * N-agent policy induced by a mean-field feedback policy.
 *
 * Both modes aggregate the empirical lifted measure of the current joint
 * state to the grid's K blocks (requires K | N), project it onto the measure
 * lattice and read the action kernel stored at that grid point.
 *
 *  - "direct": agent i samples its action from the kernel at (block(i), x_i)
 *    with its own uniform, so one-hot kernels act deterministically.
 *  - "matching": transfer_matching at every visited joint state; results are
 *    memoized per (grid point, joint state).
 */
struct TransferPolicy {
  NPolicy policy;
  std::string mode;
  std::shared_ptr<TransferStats> stats;
};

TransferPolicy transfer_policy(const ModelSpec& model, const MeasureGrid& grid,
                               const GridPolicy& pol, int N, const TransferConfig& cfg = {});

/**
 * Regularity constant of a grid policy in its (label, state) arguments: the
 * maximum over grid points and over cell pairs (b,x) != (b',x') of
 *
 *     E[ d_A(a, a') with both kernels driven by one shared uniform ]
 *     -----------------------------------------------------------
 *              |rep(b) - rep(b')| + d(x, x')
 *
 * The numerator is the exact inverse-CDF coupling cost (piecewise-constant
 * CDF overlap); labels enter at block representatives.  Pairs with zero
 * denominator are skipped; if every pair is degenerate (single-cell policy),
 * throws std::domain_error.
 */
struct RegularityEstimate {
  double K_hat = 0.0;
  long long pairs = 0;           // (grid point, cell pair) combinations counted
  double max_numerator = 0.0;    // worst kernel discrepancy seen
  double min_denominator = 0.0;  // smallest cell distance among counted pairs
};

RegularityEstimate estimate_regularity(const ModelSpec& model, const MeasureGrid& grid,
                                       const GridPolicy& pol);

}  // namespace cnemf
