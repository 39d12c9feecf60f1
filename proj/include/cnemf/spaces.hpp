#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cnemf {

/**
 * A finite metric space: named points plus a dense symmetric distance matrix.
 * Houses both the state space and the action space.
 */
struct FiniteMetricSpace {
  std::vector<std::string> labels;         // point identifiers
  std::vector<std::vector<double>> dist;   // square, symmetric, zero diagonal

  int size() const { return static_cast<int>(labels.size()); }
  double d(int i, int j) const { return dist[i][j]; }

  /// Largest pairwise distance.
  double diameter() const;
  /// Smallest nonzero pairwise distance (0 for a single point).
  double min_positive_distance() const;
  /// Index of a point identifier, or nullopt.
  std::optional<int> index_of(const std::string& label) const;
};

/// Result of checking the metric axioms; `ok` iff no violation found.
struct MetricValidation {
  bool ok = true;
  std::string violation;  // human-readable description of the first failed axiom
};

/**
 * Checks squareness, finiteness, nonnegativity, zero diagonal, symmetry and the
 * triangle inequality; reports the first violated axiom.
 */
MetricValidation validate_metric_space(const FiniteMetricSpace& space);

/**
 * The label interval [0,1] discretized into K equal-mass blocks
 * ((i-1)/K, i/K], each represented by its right endpoint u_i = i/K.
 */
struct LabelGrid {
  int K = 1;

  double representative(int block) const { return static_cast<double>(block + 1) / K; }
  double block_mass() const { return 1.0 / K; }
  /// Block containing a label u in (0,1]: smallest i with u <= i/K.
  int block_of(double u) const {
    int b = static_cast<int>(u * K);
    if (b > 0 && u * K <= static_cast<double>(b)) --b;  // right-closed blocks
    if (b >= K) b = K - 1;
    if (b < 0) b = 0;
    return b;
  }
};

/// Finite outcome set with its probability vector.
struct FiniteLaw {
  std::vector<double> probs;
  int size() const { return static_cast<int>(probs.size()); }
};

/// Idiosyncratic and common noise laws.
struct NoiseSpec {
  FiniteLaw idio;    // law of each per-agent draw
  FiniteLaw common;  // law of the shared draw
};

/// Checks nonnegativity and sum-to-1 within 1e-12.
bool is_probability_vector(const std::vector<double>& p, double tol = 1e-12);

/**
 * Product distance |u-u'| + d(x,x') [+ dA(a,a')] between label-state(-action)
 * points.  Labels are reals in [0,1]; states/actions are indices into their
 * declared spaces.
 */
double product_distance(double u1, int x1, double u2, int x2, const FiniteMetricSpace& state);
double product_distance(double u1, int x1, int a1, double u2, int x2, int a2,
                        const FiniteMetricSpace& state, const FiniteMetricSpace& action);

/// Diameter of the label-state product: 1 (label interval) + state diameter.
double diameter_label_state(const FiniteMetricSpace& state);
/// Diameter of the label-state-action product.
double diameter_label_state_action(const FiniteMetricSpace& state, const FiniteMetricSpace& action);

}  // namespace cnemf
