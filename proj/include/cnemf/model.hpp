#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cnemf/measures.hpp"
#include "cnemf/spaces.hpp"

namespace cnemf {

/**
 * A conditional non-exchangeable mean-field model with K-block label
 * coefficients.  Dynamics F map (block, state, action, joint control measure,
 * idiosyncratic noise, common noise) to a next state; rewards f map the same
 * data without the noises to a real number.  The joint control measure handed
 * to the coefficients is always aggregated to the model's own K blocks.
 */
struct ModelSpec {
  std::string family;
  FiniteMetricSpace state;
  FiniteMetricSpace action;
  LabelGrid labels;
  NoiseSpec noise;
  double beta = 0.5;
  double reward_bound = 1.0;  // uniform bound on |f|
  std::optional<double> lip_F, lip_f;
  std::function<int(int block, int x, int a, const JointControlMeasure& m, int e, int e0)> F;
  std::function<double(int block, int x, int a, const JointControlMeasure& m)> f;
};

/// Checked coefficient evaluation: validates argument ranges, the measure's
/// block resolution, and the returned state index / reward bound.
int eval_F(const ModelSpec& model, int block, int x, int a, const JointControlMeasure& m, int e,
           int e0);
double eval_f(const ModelSpec& model, int block, int x, int a, const JointControlMeasure& m);

/**
 * N-agent level coefficients over the same state/action/noise spaces.  They
 * may differ from the mean-field coefficients (finite-level deviations) and
 * carry their own block resolution K_N; agent i with label (i+1)/N is mapped
 * to the K_N-block containing that label.
 */
struct NAgentSpec {
  std::string variant = "same";
  int K_N = 1;
  double reward_bound = 1.0;
  std::function<int(int block, int x, int a, const JointControlMeasure& m, int e, int e0)> F_N;
  std::function<double(int block, int x, int a, const JointControlMeasure& m)> f_N;
};

int eval_F_N(const ModelSpec& model, const NAgentSpec& nagent, int block, int x, int a,
             const JointControlMeasure& m, int e, int e0);
double eval_f_N(const ModelSpec& model, const NAgentSpec& nagent, int block, int x, int a,
                const JointControlMeasure& m);

/// N-agent spec that reuses the mean-field coefficients verbatim.
NAgentSpec nagent_from_model(const ModelSpec& model);

/// Measured coefficient deviations between the two levels at population size N.
struct ModelGaps {
  double eps_f = 0.0;
  double eps_F = 0.0;
  bool exhaustive = true;  // false when the configuration space was sampled
  long long configs_checked = 0;
};

/**
 * Sup (over joint state-action configurations) of the average per-agent
 * coefficient deviations.  Enumerates exhaustively when the configuration
 * count fits in enum_cap, otherwise draws sample_count random configurations
 * and reports a sampled lower estimate.
 */
ModelGaps model_gaps(const ModelSpec& model, const NAgentSpec& nagent, int N,
                     long long enum_cap = 1000000, int sample_count = 2000,
                     std::uint64_t seed = 0);

struct LipschitzEstimate {
  double L_f = 0.0;
  double L_F = 0.0;
  double L_f_action = 0.0;  // denominators include the action distance
  double L_F_action = 0.0;
  int probe_pairs = 0;
  double denominator_floor = 0.0;
  std::optional<double> declared_F, declared_f;
  bool declared_f_exceeded = false;
  bool declared_F_exceeded = false;
};

/**
 * Finite-resolution slope estimates of the coefficient Lipschitz constants,
 * probing block representatives, all state/action cells, and a deterministic
 * pool of corner and random control measures.  Pairs whose total denominator
 * falls below denom_floor are skipped (block coefficients are step functions
 * of the label, so arbitrarily close probes would not produce finite slopes).
 */
LipschitzEstimate estimate_lipschitz(const ModelSpec& model, int probe_count, std::uint64_t seed,
                                     double denom_floor = 0.01);

// ---------------------------------------------------------------------------
// Built-in model families
// ---------------------------------------------------------------------------

struct BuiltinModelConfig {
  std::string family = "threshold-graphon";
  int blocks = 1;
  double beta = 0.5;
  int idio_levels = 8;            // uniform idiosyncratic noise resolution
  double common_shock_prob = 0.1; // P(common noise = shock)

  // threshold-graphon: block interaction kernel G weighs the active mass into
  // a normalized statistic; activation probability ramps linearly in it.
  std::vector<std::vector<double>> graphon;  // K x K, defaults to all ones
  double threshold = 0.5;
  double gain = 0.8;
  double base_rate = 0.5;
  double push = 0.25;     // action a1 raises the activation probability
  double inertia = 0.3;   // active states activate more easily again
  double common_damp = 0.2;  // shock multiplies the activation probability
  std::vector<double> reward_weight;  // per block, defaults to 1
  double reward_statistic = 0.5;
  double action_cost = 0.25;

  // heterogeneous-sis
  std::vector<double> susceptibility;  // per block, defaults to 0.8
  double recovery = 0.4;
  double distancing_factor = 0.4;  // multiplies infection pressure under a1
  double outbreak_factor = 2.0;    // multiplies infection pressure under a shock
  std::vector<double> infection_loss;  // per block, defaults to 1
  double distancing_cost = 0.2;

  // identity
  double reward_constant = 1.0;

  // finite-level coefficient perturbation (used by the perturbed N-agent
  // variant): the N-agent kernel is G + kernel_shift/N entrywise.
  double kernel_shift = 0.5;
};

std::vector<std::string> builtin_model_families();

/// Constructs a built-in model; throws std::invalid_argument with the list of
/// known families on an unknown name, and on malformed parameters.
ModelSpec make_builtin_model(const BuiltinModelConfig& cfg);

/**
 * N-agent coefficients for a built-in model.  Variants: "same" (identical
 * coefficients) and "perturbed-graphon" (threshold-graphon with the kernel
 * shifted by kernel_shift/N, giving level gaps that vanish as N grows).
 */
NAgentSpec make_builtin_nagent(const BuiltinModelConfig& cfg, const std::string& variant, int N);

/// Conservative closed-form bound dominating what estimate_lipschitz can
/// report for the threshold-graphon family at the given denominator floor.
double graphon_lipschitz_bound(const BuiltinModelConfig& cfg, double denom_floor = 0.01);

}  // namespace cnemf
