#include "cnemf/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cnemf {

double FiniteMetricSpace::diameter() const {
  double m = 0.0;
  for (const auto& row : dist)
    for (double v : row) m = std::max(m, v);
  return m;
}

double FiniteMetricSpace::min_positive_distance() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& row : dist)
    for (double v : row)
      if (v > 0.0) m = std::min(m, v);
  return std::isfinite(m) ? m : 0.0;
}

std::optional<int> FiniteMetricSpace::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  return std::nullopt;
}

MetricValidation validate_metric_space(const FiniteMetricSpace& space) {
  const int n = space.size();
  auto fail = [](std::string msg) { return MetricValidation{false, std::move(msg)}; };

  if (static_cast<int>(space.dist.size()) != n)
    return fail("distance matrix has " + std::to_string(space.dist.size()) + " rows, expected " +
                std::to_string(n));
  for (int i = 0; i < n; ++i)
    if (static_cast<int>(space.dist[i].size()) != n)
      return fail("distance matrix row " + std::to_string(i) + " has " +
                  std::to_string(space.dist[i].size()) + " entries, expected " + std::to_string(n));

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = space.dist[i][j];
      if (!std::isfinite(v) || v < 0.0) {
        std::ostringstream os;
        os << "non-finite or negative distance at (" << i << "," << j << ")";
        return fail(os.str());
      }
    }
  for (int i = 0; i < n; ++i)
    if (space.dist[i][i] != 0.0)
      return fail("nonzero diagonal at (" + std::to_string(i) + "," + std::to_string(i) + ")");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (space.dist[i][j] != space.dist[j][i]) {
        std::ostringstream os;
        os << "symmetry violation at (" << i << "," << j << ")";
        return fail(os.str());
      }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (space.dist[i][j] > space.dist[i][k] + space.dist[k][j] + 1e-15) {
          std::ostringstream os;
          os << "triangle violation: d(" << i << "," << j << ") > d(" << i << "," << k << ") + d("
             << k << "," << j << ")";
          return fail(os.str());
        }
  return MetricValidation{};
}

bool is_probability_vector(const std::vector<double>& p, double tol) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= tol;
}

double product_distance(double u1, int x1, double u2, int x2, const FiniteMetricSpace& state) {
  return std::abs(u1 - u2) + state.d(x1, x2);
}

double product_distance(double u1, int x1, int a1, double u2, int x2, int a2,
                        const FiniteMetricSpace& state, const FiniteMetricSpace& action) {
  return std::abs(u1 - u2) + state.d(x1, x2) + action.d(a1, a2);
}

double diameter_label_state(const FiniteMetricSpace& state) { return 1.0 + state.diameter(); }

double diameter_label_state_action(const FiniteMetricSpace& state,
                                   const FiniteMetricSpace& action) {
  return 1.0 + state.diameter() + action.diameter();
}

}  // namespace cnemf
