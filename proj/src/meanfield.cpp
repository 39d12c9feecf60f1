#include "cnemf/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "cnemf/rng.hpp"
#include "cnemf/transport.hpp"

namespace cnemf {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("meanfield: " + msg);
}

void compositions_rec(int remaining, int parts, std::vector<int>& cur,
                      std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(remaining);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int c = 0; c <= remaining; ++c) {
    cur.push_back(c);
    compositions_rec(remaining - c, parts - 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

MeasureGrid MeasureGrid::make(int K, int n_states, int q, long long cap) {
  require(K >= 1, "block count must be positive");
  require(n_states >= 1, "state count must be positive");
  require(q >= 1, "mesh denominator must be positive");
  MeasureGrid g;
  g.labels = LabelGrid{K};
  g.n_states = n_states;
  g.q = q;
  std::vector<int> cur;
  compositions_rec(q, n_states, cur, g.comps);
  long long size = 1;
  for (int b = 0; b < K; ++b) {
    size *= g.per_block();
    require(size <= cap, "measure lattice exceeds the size cap");
  }
  return g;
}

long long MeasureGrid::size() const {
  long long s = 1;
  for (int b = 0; b < labels.K; ++b) s *= per_block();
  return s;
}

std::vector<int> MeasureGrid::decode(long long g) const {
  std::vector<int> locals(labels.K);
  const long long P = per_block();
  for (int b = labels.K - 1; b >= 0; --b) {
    locals[b] = static_cast<int>(g % P);
    g /= P;
  }
  require(g == 0, "grid index out of range");
  return locals;
}

long long MeasureGrid::encode(const std::vector<int>& locals) const {
  require(static_cast<int>(locals.size()) == labels.K, "one local row index per block");
  const long long P = per_block();
  long long g = 0;
  for (int b = 0; b < labels.K; ++b) {
    require(locals[b] >= 0 && locals[b] < P, "local row index out of range");
    g = g * P + locals[b];
  }
  return g;
}

LiftedMeasure MeasureGrid::measure_at(long long g) const {
  const std::vector<int> locals = decode(g);
  LiftedMeasure mu;
  mu.grid = labels;
  mu.rows.assign(labels.K, std::vector<double>(n_states, 0.0));
  for (int b = 0; b < labels.K; ++b)
    for (int x = 0; x < n_states; ++x)
      mu.rows[b][x] = static_cast<double>(comps[locals[b]][x]) / q;
  return mu;
}

double MeasureGrid::covering_radius(double state_diameter) const {
  return state_diameter * (n_states / 2) / static_cast<double>(q);
}

MeasureGrid::Projection MeasureGrid::project(const LiftedMeasure& mu,
                                             double state_diameter) const {
  require(mu.blocks() == labels.K, "measure block count differs from the grid");
  require(mu.states() == n_states, "measure state count differs from the grid");
  Projection out;
  std::vector<int> locals(labels.K);
  for (int b = 0; b < labels.K; ++b) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (int j = 0; j < per_block(); ++j) {
      double l1 = 0.0;
      for (int x = 0; x < n_states; ++x)
        l1 += std::fabs(mu.rows[b][x] - static_cast<double>(comps[j][x]) / q);
      if (l1 < best) {
        best = l1;
        best_j = j;
      }
    }
    locals[b] = best_j;
    out.l1_total += best;
  }
  out.index = encode(locals);
  out.w1_bound = state_diameter * out.l1_total / (2.0 * labels.K);
  return out;
}

// ---------------------------------------------------------------------------
// Lifted dynamics
// ---------------------------------------------------------------------------

LiftedMeasure lifted_step(const ModelSpec& model, const LiftedMeasure& mu,
                          const JointControlMeasure& a, int e0) {
  const int B = mu.blocks();
  const int K = model.labels.K;
  require(B % K == 0, "measure blocks must be a multiple of the coefficient blocks");
  require(e0 >= 0 && e0 < model.noise.common.size(), "common noise index out of range");
  const JointControlMeasure p = coupling_project(mu, a);
  const JointControlMeasure mK = (B == K) ? p : aggregate_blocks(p, K);

  const int X = model.state.size();
  const int A = model.action.size();
  const int E = model.noise.idio.size();
  LiftedMeasure out;
  out.grid = mu.grid;
  out.rows.assign(B, std::vector<double>(X, 0.0));
  for (int b = 0; b < B; ++b) {
    const int kb = agent_block(b, B, K);
    for (int x = 0; x < X; ++x)
      for (int act = 0; act < A; ++act) {
        const double mass = p.at(b, x, act) * B;  // conditional weight within the block
        if (mass <= 0.0) continue;
        for (int e = 0; e < E; ++e) {
          const int y = eval_F(model, kb, x, act, mK, e, e0);
          out.rows[b][y] += mass * model.noise.idio.probs[e];
        }
      }
    double total = 0.0;
    for (int x = 0; x < X; ++x) total += out.rows[b][x];
    if (std::fabs(total - 1.0) > 1e-9)
      throw std::logic_error("meanfield: pushforward row mass drifted beyond tolerance");
    for (int x = 0; x < X; ++x) out.rows[b][x] /= total;
  }
  return out;
}

double lifted_reward(const ModelSpec& model, const LiftedMeasure& mu,
                     const JointControlMeasure& a) {
  const int B = mu.blocks();
  const int K = model.labels.K;
  require(B % K == 0, "measure blocks must be a multiple of the coefficient blocks");
  const JointControlMeasure p = coupling_project(mu, a);
  const JointControlMeasure mK = (B == K) ? p : aggregate_blocks(p, K);
  double r = 0.0;
  for (int b = 0; b < B; ++b) {
    const int kb = agent_block(b, B, K);
    for (int x = 0; x < model.state.size(); ++x)
      for (int act = 0; act < model.action.size(); ++act) {
        const double mass = p.at(b, x, act);
        if (mass <= 0.0) continue;
        r += mass * eval_f(model, kb, x, act, mK);
      }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Bellman operators
// ---------------------------------------------------------------------------

PolicyKernel GridPolicy::kernel_at(long long g) const {
  PolicyKernel k;
  k.n_blocks = K;
  k.n_states = X;
  k.n_actions = A;
  k.p.resize(static_cast<std::size_t>(K) * X * A);
  for (int b = 0; b < K; ++b)
    for (int x = 0; x < X; ++x)
      for (int a = 0; a < A; ++a) k.at(b, x, a) = at(g, b, x, a);
  return k;
}

int GridPolicy::sample(long long g, int b, int x, double z) const {
  std::vector<double> pmf(A);
  for (int a = 0; a < A; ++a) pmf[a] = at(g, b, x, a);
  return RngStream::invert_cdf(pmf, z);
}

namespace {

JointControlMeasure compose_map(const LiftedMeasure& mu, const std::vector<int>& map, int A) {
  const int K = mu.blocks();
  const int X = mu.states();
  JointControlMeasure a;
  a.grid = mu.grid;
  a.n_states = X;
  a.n_actions = A;
  a.w.assign(static_cast<std::size_t>(K) * X * A, 0.0);
  for (int b = 0; b < K; ++b)
    for (int x = 0; x < X; ++x) a.at(b, x, map[b * X + x]) = mu.rows[b][x] / K;
  return a;
}

}  // namespace

MeanFieldBellman::MeanFieldBellman(const ModelSpec& model, MeasureGrid grid, SearchConfig search)
    : model_(model), grid_(std::move(grid)), search_(search) {
  require(grid_.labels.K == model_.labels.K, "grid and model block counts differ");
  require(grid_.n_states == model_.state.size(), "grid and model state counts differ");
  state_diameter_ = model_.state.diameter();

  const int cells = model_.labels.K * model_.state.size();
  const int A = model_.action.size();
  long double count = 1.0L;
  for (int c = 0; c < cells; ++c) count *= A;
  exhaustive_ = count <= static_cast<long double>(search_.exhaustive_budget);
  n_maps_ = exhaustive_ ? static_cast<long long>(count) : -1;

  if (exhaustive_) {
    const long long size = grid_.size();
    const int E0 = model_.noise.common.size();
    const long double mem =
        static_cast<long double>(size) * n_maps_ * (sizeof(double) + sizeof(long long) * E0);
    require(mem <= 512.0L * 1024 * 1024, "exhaustive transition table exceeds the memory cap");
    pre_reward_.resize(static_cast<std::size_t>(size) * n_maps_);
    pre_next_.resize(static_cast<std::size_t>(size) * n_maps_ * E0);
    std::vector<int> map(cells, 0);
    for (long long g = 0; g < size; ++g) {
      for (long long code = 0; code < n_maps_; ++code) {
        long long rest = code;
        for (int c = cells - 1; c >= 0; --c) {
          map[c] = static_cast<int>(rest % A);
          rest /= A;
        }
        double reward = 0.0, slack = 0.0;
        std::vector<long long> next(E0);
        evaluate_map(g, map, &reward, &next, &slack);
        pre_reward_[g * n_maps_ + code] = reward;
        for (int e0 = 0; e0 < E0; ++e0) pre_next_[(g * n_maps_ + code) * E0 + e0] = next[e0];
        pre_slack_ = std::max(pre_slack_, slack);
      }
    }
  }
}

void MeanFieldBellman::evaluate_map(long long g, const std::vector<int>& map, double* reward,
                                    std::vector<long long>* next, double* slack) const {
  const LiftedMeasure mu = grid_.measure_at(g);
  const JointControlMeasure a = compose_map(mu, map, model_.action.size());
  *reward = lifted_reward(model_, mu, a);
  const int E0 = model_.noise.common.size();
  next->resize(E0);
  for (int e0 = 0; e0 < E0; ++e0) {
    const LiftedMeasure nu = lifted_step(model_, mu, a, e0);
    const MeasureGrid::Projection proj = grid_.project(nu, state_diameter_);
    (*next)[e0] = proj.index;
    *slack = std::max(*slack, proj.w1_bound);
  }
}

double MeanFieldBellman::value_of(long long g, const std::vector<int>& map,
                                  const std::vector<double>& W, double* slack) const {
  double reward = 0.0;
  std::vector<long long> next;
  double s = 0.0;
  evaluate_map(g, map, &reward, &next, &s);
  if (slack) *slack = std::max(*slack, s);
  double v = reward;
  for (int e0 = 0; e0 < model_.noise.common.size(); ++e0)
    v += model_.beta * model_.noise.common.probs[e0] * W[next[e0]];
  return v;
}

std::vector<double> MeanFieldBellman::apply_sup(const std::vector<double>& W, BellmanStats* stats,
                                                std::vector<std::vector<int>>* argmax_maps) const {
  const long long size = grid_.size();
  require(static_cast<long long>(W.size()) == size, "value table size mismatch");
  if (!exhaustive_) return ascent_sup(W, stats, argmax_maps);

  const int E0 = model_.noise.common.size();
  const int cells = model_.labels.K * model_.state.size();
  const int A = model_.action.size();
  std::vector<double> out(size);
  if (argmax_maps) argmax_maps->assign(size, std::vector<int>(cells, 0));
  for (long long g = 0; g < size; ++g) {
    double best = -std::numeric_limits<double>::infinity();
    long long best_code = 0;
    for (long long code = 0; code < n_maps_; ++code) {
      double v = pre_reward_[g * n_maps_ + code];
      for (int e0 = 0; e0 < E0; ++e0)
        v += model_.beta * model_.noise.common.probs[e0] *
             W[pre_next_[(g * n_maps_ + code) * E0 + e0]];
      if (v > best) {  // strict: the first maximizer is the smallest map code
        best = v;
        best_code = code;
      }
    }
    out[g] = best;
    if (argmax_maps) {
      long long rest = best_code;
      for (int c = cells - 1; c >= 0; --c) {
        (*argmax_maps)[g][c] = static_cast<int>(rest % A);
        rest /= A;
      }
    }
  }
  if (stats) {
    stats->max_projection_slack = std::max(stats->max_projection_slack, pre_slack_);
    stats->exhaustive = true;
    stats->maps_evaluated += size * n_maps_;
  }
  return out;
}

std::vector<double> MeanFieldBellman::ascent_sup(const std::vector<double>& W, BellmanStats* stats,
                                                 std::vector<std::vector<int>>* argmax_maps) const {
  const long long size = grid_.size();
  const int cells = model_.labels.K * model_.state.size();
  const int A = model_.action.size();
  std::vector<double> out(size);
  if (argmax_maps) argmax_maps->assign(size, std::vector<int>(cells, 0));
  double slack = 0.0;
  long long evals = 0;
  for (long long g = 0; g < size; ++g) {
    std::map<std::vector<int>, double> memo;
    auto value = [&](const std::vector<int>& map) {
      auto it = memo.find(map);
      if (it != memo.end()) return it->second;
      const double v = value_of(g, map, W, &slack);
      ++evals;
      memo.emplace(map, v);
      return v;
    };
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> best_map(cells, 0);
    for (int r = 0; r < search_.ascent_restarts; ++r) {
      std::vector<int> map(cells, 0);
      if (r > 0) {
        RngStream gen(search_.seed, "mf-ascent",
                      static_cast<std::uint64_t>(g) * 1000003ULL + static_cast<std::uint64_t>(r));
        for (int c = 0; c < cells; ++c) map[c] = static_cast<int>(gen.uniform_int(A));
      }
      double cur = value(map);
      for (int sweep = 0; sweep < search_.ascent_sweeps; ++sweep) {
        bool improved = false;
        for (int c = 0; c < cells; ++c) {
          const int keep = map[c];
          int best_a = keep;
          double best_v = cur;
          for (int a = 0; a < A; ++a) {
            if (a == keep) continue;
            map[c] = a;
            const double v = value(map);
            if (v > best_v + 1e-15) {
              best_v = v;
              best_a = a;
            }
          }
          map[c] = best_a;
          if (best_a != keep) {
            cur = best_v;
            improved = true;
          }
        }
        if (!improved) break;
      }
      if (cur > best) {
        best = cur;
        best_map = map;
      }
    }
    out[g] = best;
    if (argmax_maps) (*argmax_maps)[g] = best_map;
  }
  if (stats) {
    stats->max_projection_slack = std::max(stats->max_projection_slack, slack);
    stats->exhaustive = false;
    stats->maps_evaluated += evals;
  }
  return out;
}

std::vector<double> MeanFieldBellman::apply_kernel(const std::vector<double>& W,
                                                   const PolicyKernel& kernel,
                                                   BellmanStats* stats) const {
  const long long size = grid_.size();
  require(static_cast<long long>(W.size()) == size, "value table size mismatch");
  require(kernel.n_blocks == model_.labels.K && kernel.n_states == model_.state.size() &&
              kernel.n_actions == model_.action.size(),
          "kernel dimensions differ from the model");
  std::vector<double> out(size);
  double slack = 0.0;
  for (long long g = 0; g < size; ++g) {
    const LiftedMeasure mu = grid_.measure_at(g);
    const JointControlMeasure a = compose_kernel(mu, kernel);
    double v = lifted_reward(model_, mu, a);
    for (int e0 = 0; e0 < model_.noise.common.size(); ++e0) {
      const LiftedMeasure nu = lifted_step(model_, mu, a, e0);
      const MeasureGrid::Projection proj = grid_.project(nu, state_diameter_);
      slack = std::max(slack, proj.w1_bound);
      v += model_.beta * model_.noise.common.probs[e0] * W[proj.index];
    }
    out[g] = v;
  }
  if (stats) stats->max_projection_slack = std::max(stats->max_projection_slack, slack);
  return out;
}

std::vector<double> MeanFieldBellman::apply_policy(const std::vector<double>& W,
                                                   const GridPolicy& policy,
                                                   BellmanStats* stats) const {
  const long long size = grid_.size();
  require(static_cast<long long>(W.size()) == size, "value table size mismatch");
  std::vector<double> out(size);
  double slack = 0.0;
  for (long long g = 0; g < size; ++g) {
    const LiftedMeasure mu = grid_.measure_at(g);
    const JointControlMeasure a = compose_kernel(mu, policy.kernel_at(g));
    double v = lifted_reward(model_, mu, a);
    for (int e0 = 0; e0 < model_.noise.common.size(); ++e0) {
      const LiftedMeasure nu = lifted_step(model_, mu, a, e0);
      const MeasureGrid::Projection proj = grid_.project(nu, state_diameter_);
      slack = std::max(slack, proj.w1_bound);
      v += model_.beta * model_.noise.common.probs[e0] * W[proj.index];
    }
    out[g] = v;
  }
  if (stats) stats->max_projection_slack = std::max(stats->max_projection_slack, slack);
  return out;
}

double MeanFieldBellman::audit_gap(const std::vector<double>& W, int q_a, long long budget) const {
  require(q_a >= 1, "audit mesh must be positive");
  const int A = model_.action.size();
  const int cells = model_.labels.K * model_.state.size();
  std::vector<std::vector<int>> rows;
  std::vector<int> cur;
  compositions_rec(q_a, A, cur, rows);
  const long long R = static_cast<long long>(rows.size());
  long double combos = 1.0L;
  for (int c = 0; c < cells; ++c) combos *= R;
  require(combos <= static_cast<long double>(budget), "audit lattice exceeds the budget");
  const long long n_combos = static_cast<long long>(combos);

  const long long size = grid_.size();
  require(static_cast<long long>(W.size()) == size, "value table size mismatch");
  double worst = 0.0;
  std::vector<int> map(cells, 0);
  PolicyKernel kernel;
  kernel.n_blocks = model_.labels.K;
  kernel.n_states = model_.state.size();
  kernel.n_actions = A;
  kernel.p.assign(static_cast<std::size_t>(cells) * A, 0.0);
  for (long long g = 0; g < size; ++g) {
    // Deterministic-map sup at this grid point.
    double map_best = -std::numeric_limits<double>::infinity();
    const long long maps = [&] {
      long long m = 1;
      for (int c = 0; c < cells; ++c) m *= A;
      return m;
    }();
    for (long long code = 0; code < maps; ++code) {
      long long rest = code;
      for (int c = cells - 1; c >= 0; --c) {
        map[c] = static_cast<int>(rest % A);
        rest /= A;
      }
      map_best = std::max(map_best, value_of(g, map, W, nullptr));
    }
    // Randomized lattice sup.
    const LiftedMeasure mu = grid_.measure_at(g);
    double lattice_best = -std::numeric_limits<double>::infinity();
    for (long long combo = 0; combo < n_combos; ++combo) {
      long long rest = combo;
      for (int c = cells - 1; c >= 0; --c) {
        const auto& row = rows[rest % R];
        rest /= R;
        for (int a = 0; a < A; ++a)
          kernel.p[static_cast<std::size_t>(c) * A + a] = static_cast<double>(row[a]) / q_a;
      }
      const JointControlMeasure a = compose_kernel(mu, kernel);
      double v = lifted_reward(model_, mu, a);
      for (int e0 = 0; e0 < model_.noise.common.size(); ++e0) {
        const LiftedMeasure nu = lifted_step(model_, mu, a, e0);
        v += model_.beta * model_.noise.common.probs[e0] *
             W[grid_.project(nu, state_diameter_).index];
      }
      lattice_best = std::max(lattice_best, v);
    }
    worst = std::max(worst, lattice_best - map_best);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

namespace {

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

double stop_threshold_for(double beta, double tol) {
  return beta > 0.0 ? tol * (1.0 - beta) / (2.0 * beta)
                    : std::numeric_limits<double>::infinity();
}

}  // namespace

MeanFieldSolution solve_mean_field(const ModelSpec& model, const MeasureGrid& grid, double tol,
                                   const SearchConfig& search) {
  require(tol > 0.0, "tolerance must be positive");
  MeanFieldBellman bell(model, grid, search);
  const long long size = grid.size();
  const double thresh = stop_threshold_for(model.beta, tol);

  MeanFieldSolution sol;
  std::vector<double> W(size, 0.0);
  std::vector<std::vector<int>> maps;
  double delta = 0.0;
  int iter = 0;
  const int max_iter = 200000;
  while (true) {
    ++iter;
    require(iter <= max_iter, "value iteration failed to converge within the iteration cap");
    std::vector<double> next = bell.apply_sup(W, &sol.stats, &maps);
    delta = sup_diff(next, W);
    W = std::move(next);
    if (delta <= thresh) break;
  }

  sol.value.v = std::move(W);
  sol.value.iterations = iter;
  sol.value.tol = tol;
  sol.value.residual_bound = model.beta > 0.0 ? model.beta * delta / (1.0 - model.beta) : 0.0;
  sol.stop_threshold = thresh;

  const int cells = model.labels.K * model.state.size();
  sol.policy.K = model.labels.K;
  sol.policy.X = model.state.size();
  sol.policy.A = model.action.size();
  sol.policy.p.assign(static_cast<std::size_t>(size) * cells * model.action.size(), 0.0);
  for (long long g = 0; g < size; ++g)
    for (int b = 0; b < model.labels.K; ++b)
      for (int x = 0; x < model.state.size(); ++x)
        sol.policy.at(g, b, x, maps[g][b * model.state.size() + x]) = 1.0;
  return sol;
}

ValueTable solve_policy_value(const MeanFieldBellman& bellman, const GridPolicy& policy,
                              double tol) {
  require(tol > 0.0, "tolerance must be positive");
  const double beta = bellman.model().beta;
  const double thresh = stop_threshold_for(beta, tol);
  std::vector<double> W(bellman.grid().size(), 0.0);
  ValueTable out;
  double delta = 0.0;
  const int max_iter = 200000;
  while (true) {
    ++out.iterations;
    require(out.iterations <= max_iter, "policy evaluation failed to converge");
    std::vector<double> next = bellman.apply_policy(W, policy, nullptr);
    delta = sup_diff(next, W);
    W = std::move(next);
    if (delta <= thresh) break;
  }
  out.v = std::move(W);
  out.tol = tol;
  out.residual_bound = beta > 0.0 ? beta * delta / (1.0 - beta) : 0.0;
  return out;
}

double gamma_exponent(double beta, double L, bool* clamped) {
  require(beta >= 0.0 && beta < 1.0, "discount factor must lie in [0, 1)");
  require(L >= 0.0, "Lipschitz constant must be >= 0");
  if (clamped) *clamped = false;
  if (beta == 0.0 || 2.0 * L <= 1.0) {
    if (clamped) *clamped = true;
    return 1.0;
  }
  const double g = -std::log(beta) / std::log(2.0 * L);
  if (g >= 1.0) {
    if (clamped) *clamped = true;
    return 1.0;
  }
  return g;
}

HolderData make_holder_data(double beta, double L_dynamics, double L_reward,
                            const std::string& chosen_source) {
  require(chosen_source == "dynamics" || chosen_source == "reward",
          "holder constant source must be 'dynamics' or 'reward'");
  HolderData h;
  h.L_dynamics = L_dynamics;
  h.L_reward = L_reward;
  h.chosen_source = chosen_source;
  h.gamma_dynamics = gamma_exponent(beta, L_dynamics, &h.clamped_dynamics);
  h.gamma_reward = gamma_exponent(beta, L_reward, &h.clamped_reward);
  return h;
}

HolderDiagnostic holder_diagnostic(const ModelSpec& model, const MeasureGrid& grid,
                                   const std::vector<double>& V, double gamma, int pairs,
                                   std::uint64_t seed) {
  require(pairs >= 1, "pair count must be positive");
  require(gamma > 0.0 && gamma <= 1.0, "exponent must lie in (0, 1]");
  const long long size = grid.size();
  require(static_cast<long long>(V.size()) == size, "value table size mismatch");
  require(size >= 2, "need at least two grid points");
  HolderDiagnostic out;
  RngStream gen(seed, "holder-pairs");
  for (int p = 0; p < pairs; ++p) {
    const long long g1 = static_cast<long long>(gen.uniform_int(static_cast<std::uint64_t>(size)));
    long long g2 = static_cast<long long>(gen.uniform_int(static_cast<std::uint64_t>(size - 1)));
    if (g2 >= g1) ++g2;
    const DiscreteMeasure m1 = lifted_at_representatives(grid.measure_at(g1));
    const DiscreteMeasure m2 = lifted_at_representatives(grid.measure_at(g2));
    const double w = w1_discrete(m1, m2, model.state).value;
    out.max_ratio = std::max(out.max_ratio, std::fabs(V[g1] - V[g2]) / std::pow(w, gamma));
    ++out.pairs;
  }
  return out;
}

double unlifted_bellman_value(const ModelSpec& model, const MeasureGrid& grid,
                              const std::vector<double>& V, const LiftedMeasure& mu,
                              const JointControlMeasure& a, double* slack) {
  const int K = model.labels.K;
  const double diam = model.state.diameter();
  double v = lifted_reward(model, mu, a);
  for (int e0 = 0; e0 < model.noise.common.size(); ++e0) {
    LiftedMeasure nu = lifted_step(model, mu, a, e0);
    if (nu.blocks() != K) nu = aggregate_blocks(nu, K);
    const MeasureGrid::Projection proj = grid.project(nu, diam);
    if (slack) *slack = std::max(*slack, proj.w1_bound);
    v += model.beta * model.noise.common.probs[e0] * V[proj.index];
  }
  return v;
}

}  // namespace cnemf
