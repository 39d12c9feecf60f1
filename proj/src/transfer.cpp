#include "cnemf/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cnemf/measures.hpp"
#include "cnemf/rng.hpp"

namespace cnemf {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("transfer: " + msg);
}

// Deterministic per-cell argmax (first maximizer) used to seed the matching
// coordinate descent.
int kernel_argmax(const GridPolicy& pol, long long g, int b, int x) {
  int best = 0;
  double bw = pol.at(g, b, x, 0);
  for (int a = 1; a < pol.A; ++a)
    if (pol.at(g, b, x, a) > bw) {
      bw = pol.at(g, b, x, a);
      best = a;
    }
  return best;
}

struct MatchingProblem {
  FiniteMetricSpace prod;      // state x action, flattened
  DiscreteMeasure target;      // kernel rows spread across actions
  std::vector<double> labels;  // agent segment representatives (i+1)/N
  std::vector<int> states;     // current joint state
  int A = 1;

  double cost(const std::vector<int>& actions) const {
    DiscreteMeasure cand;
    const int N = static_cast<int>(states.size());
    cand.labels = labels;
    cand.comps.resize(N);
    cand.weights.assign(N, 1.0 / N);
    for (int i = 0; i < N; ++i) cand.comps[i] = states[i] * A + actions[i];
    return w1_discrete(cand, target, prod).value;
  }
};

// Exhaustive scan over action vectors in lexicographic order; strict
// improvement keeps the lexicographically smallest minimizer.
std::vector<int> matching_exhaustive(const MatchingProblem& prob, int N, double* achieved) {
  const int A = prob.A;
  long long total = 1;
  for (int i = 0; i < N; ++i) total *= A;
  std::vector<int> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (long long code = 0; code < total; ++code) {
    const std::vector<int> as = n_decode(code, N, A);
    const double c = prob.cost(as);
    if (c < best_cost) {
      best_cost = c;
      best = as;
    }
  }
  *achieved = best_cost;
  return best;
}

// Coordinate descent from the seed vector: per-agent best response holding the
// others fixed, sweeps until stable.  Ties keep the incumbent action.  Once
// single moves stall, coordinated two-agent moves are tried as well: the
// matching objective often plateaus where lowering the cost needs two agents
// to exchange actions in one step, and no single reassignment improves.
std::vector<int> matching_descent(const MatchingProblem& prob, std::vector<int> as, int sweeps,
                                  double* achieved) {
  const int N = static_cast<int>(as.size());
  double cur = prob.cost(as);
  for (int s = 0; s < sweeps; ++s) {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      const int keep = as[i];
      int best_a = keep;
      double best_c = cur;
      for (int a = 0; a < prob.A; ++a) {
        if (a == keep) continue;
        as[i] = a;
        const double c = prob.cost(as);
        if (c < best_c - 1e-15) {
          best_c = c;
          best_a = a;
        }
      }
      as[i] = best_a;
      if (best_a != keep) {
        cur = best_c;
        changed = true;
      }
    }
    if (!changed) {
      for (int i = 0; i < N && !changed; ++i)
        for (int j = i + 1; j < N && !changed; ++j) {
          const int ki = as[i];
          const int kj = as[j];
          for (int ai = 0; ai < prob.A && !changed; ++ai)
            for (int aj = 0; aj < prob.A && !changed; ++aj) {
              if (ai == ki && aj == kj) continue;
              as[i] = ai;
              as[j] = aj;
              const double c = prob.cost(as);
              if (c < cur - 1e-15) {
                cur = c;
                changed = true;
              } else {
                as[i] = ki;
                as[j] = kj;
              }
            }
        }
    }
    if (!changed) break;
  }
  *achieved = cur;
  return as;
}

void check_shapes(const ModelSpec& model, const MeasureGrid& grid, const GridPolicy& pol, int N) {
  const int K = grid.labels.K;
  require(N >= 1 && N % K == 0,
          "the population size must be a positive multiple of the grid's block count");
  require(pol.K == K && pol.X == grid.n_states, "policy and grid shapes disagree");
  require(pol.X == model.state.size() && pol.A == model.action.size(),
          "policy and model shapes disagree");
}

}  // namespace

MatchingResult transfer_matching(const ModelSpec& model, const MeasureGrid& grid,
                                 const GridPolicy& pol, int N, const std::vector<int>& x,
                                 long long budget, int descent_sweeps) {
  check_shapes(model, grid, pol, N);
  require(static_cast<int>(x.size()) == N, "joint state size must equal N");
  require(budget >= 1, "matching budget must be positive");
  require(descent_sweeps >= 1, "descent sweep count must be positive");
  const int K = grid.labels.K;
  const int X = model.state.size();
  const int A = model.action.size();
  for (int xi : x) require(xi >= 0 && xi < X, "joint state entry out of range");

  const LiftedMeasure mu = aggregate_blocks(make_empirical_lifted(x, X), K);
  const MeasureGrid::Projection proj = grid.project(mu, model.state.diameter());

  MatchingProblem prob;
  prob.prod = product_metric_space(model.state, model.action);
  prob.labels = canonical_labels(N);
  prob.states = x;
  prob.A = A;
  std::vector<int> blocks(N);
  for (int i = 0; i < N; ++i) blocks[i] = agent_block(i, N, K);
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < A; ++a) {
      const double w = pol.at(proj.index, blocks[i], x[i], a) / N;
      if (w <= 0.0) continue;
      prob.target.labels.push_back(prob.labels[i]);
      prob.target.comps.push_back(x[i] * A + a);
      prob.target.weights.push_back(w);
    }

  long long combos = 1;
  bool exhaustive = true;
  for (int i = 0; i < N; ++i) {
    combos *= A;
    if (combos > budget) {
      exhaustive = false;
      break;
    }
  }

  MatchingResult out;
  out.exhaustive = exhaustive;
  out.grid_index = proj.index;
  out.projection_w1 = proj.w1_bound;
  out.substitution_slack = 1.0 / N;
  if (exhaustive) {
    out.actions = matching_exhaustive(prob, N, &out.achieved_w);
  } else {
    std::vector<int> seed(N);
    for (int i = 0; i < N; ++i) seed[i] = kernel_argmax(pol, proj.index, blocks[i], x[i]);
    out.actions = matching_descent(prob, std::move(seed), descent_sweeps, &out.achieved_w);
  }
  return out;
}

TransferPolicy transfer_policy(const ModelSpec& model, const MeasureGrid& grid,
                               const GridPolicy& pol, int N, const TransferConfig& cfg) {
  require(cfg.mode == "direct" || cfg.mode == "matching",
          "mode must be \"direct\" or \"matching\"");
  check_shapes(model, grid, pol, N);
  require(cfg.matching_budget >= 1, "matching budget must be positive");
  require(cfg.descent_sweeps >= 1, "descent sweep count must be positive");

  auto stats = std::make_shared<TransferStats>();
  // Matching results depend only on (grid point, joint state); memoize them so
  // repeated simulation steps don't re-run the transport searches.
  auto cache = std::make_shared<std::map<std::pair<long long, long long>, std::vector<int>>>();

  const int K = grid.labels.K;
  const int X = model.state.size();
  const double diam = model.state.diameter();
  const bool matching = cfg.mode == "matching";
  std::vector<int> blocks(N);
  for (int i = 0; i < N; ++i) blocks[i] = agent_block(i, N, K);

  NPolicy np;
  // Everything is captured by value so the policy stays valid after the grid
  // and the mean-field solution go out of scope.
  np.act = [=](int, const std::vector<int>& x, const std::vector<double>& z) {
    require(static_cast<int>(x.size()) == N, "joint state size must equal N");
    ++stats->calls;
    if (!matching) {
      const LiftedMeasure mu = aggregate_blocks(make_empirical_lifted(x, X), K);
      const MeasureGrid::Projection proj = grid.project(mu, diam);
      stats->max_projection_w1 = std::max(stats->max_projection_w1, proj.w1_bound);
      std::vector<int> as(N);
      for (int i = 0; i < N; ++i) as[i] = pol.sample(proj.index, blocks[i], x[i], z[i]);
      return as;
    }

    const MatchingResult res =
        transfer_matching(model, grid, pol, N, x, cfg.matching_budget, cfg.descent_sweeps);
    stats->max_projection_w1 = std::max(stats->max_projection_w1, res.projection_w1);
    const auto key = std::make_pair(res.grid_index, n_encode(x, X));
    if (auto it = cache->find(key); it != cache->end()) return it->second;
    stats->max_matching_w1 = std::max(stats->max_matching_w1, res.achieved_w);
    if (!res.exhaustive) stats->exhaustive = false;
    (*cache)[key] = res.actions;
    return res.actions;
  };

  TransferPolicy out;
  out.policy = std::move(np);
  out.mode = cfg.mode;
  out.stats = stats;
  return out;
}

namespace {

// Expected action distance when both kernels are driven by one shared uniform
// through their inverse CDFs (merge of the two CDF breakpoint sequences).
double shared_uniform_coupling(const double* p, const double* q, const FiniteMetricSpace& dA) {
  const int A = dA.size();
  std::vector<double> cp(A), cq(A);
  double s = 0.0;
  for (int a = 0; a < A; ++a) cp[a] = (s += p[a]);
  s = 0.0;
  for (int a = 0; a < A; ++a) cq[a] = (s += q[a]);
  cp[A - 1] = cq[A - 1] = 1.0;

  double prev = 0.0, cost = 0.0;
  int i = 0, j = 0;
  while (prev < 1.0) {
    while (i < A - 1 && cp[i] <= prev + 1e-18) ++i;
    while (j < A - 1 && cq[j] <= prev + 1e-18) ++j;
    const double nxt = std::min(cp[i], cq[j]);
    cost += (nxt - prev) * dA.d(i, j);
    prev = nxt;
  }
  return cost;
}

}  // namespace

RegularityEstimate estimate_regularity(const ModelSpec& model, const MeasureGrid& grid,
                                       const GridPolicy& pol) {
  require(pol.K == grid.labels.K && pol.X == grid.n_states, "policy and grid shapes disagree");
  require(pol.A == model.action.size(), "policy and model action counts disagree");
  const long long G = grid.size();
  const int K = grid.labels.K;
  const int X = grid.n_states;
  const int A = pol.A;

  RegularityEstimate out;
  out.min_denominator = std::numeric_limits<double>::infinity();
  std::vector<double> row1(A), row2(A);
  for (long long g = 0; g < G; ++g)
    for (int c1 = 0; c1 < K * X; ++c1)
      for (int c2 = c1 + 1; c2 < K * X; ++c2) {
        const int b1 = c1 / X, x1 = c1 % X;
        const int b2 = c2 / X, x2 = c2 % X;
        const double denom = std::fabs(grid.labels.representative(b1) -
                                       grid.labels.representative(b2)) +
                             model.state.d(x1, x2);
        if (denom <= 0.0) continue;
        for (int a = 0; a < A; ++a) {
          row1[a] = pol.at(g, b1, x1, a);
          row2[a] = pol.at(g, b2, x2, a);
        }
        const double num = shared_uniform_coupling(row1.data(), row2.data(), model.action);
        ++out.pairs;
        out.max_numerator = std::max(out.max_numerator, num);
        out.min_denominator = std::min(out.min_denominator, denom);
        out.K_hat = std::max(out.K_hat, num / denom);
      }
  if (out.pairs == 0)
    throw std::domain_error(
        "transfer: every (label, state) pair is degenerate; the regularity "
        "ratio needs at least two distinct policy cells");
  return out;
}

}  // namespace cnemf
