#include "cnemf/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cnemf/measures.hpp"
#include "cnemf/rng.hpp"

namespace cnemf {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument("chaos: " + what);
}

/// Blockwise replication of a per-block state profile to an N-agent vector.
std::vector<int> replicate_profile(const std::vector<int>& profile, int N, int K) {
  std::vector<int> x(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) x[static_cast<std::size_t>(i)] = profile[static_cast<std::size_t>(agent_block(i, N, K))];
  return x;
}

/// Views a joint (label, state, action) measure as a lifted measure whose
/// component space is the flattened state-action product, so the generic
/// cloud-distance estimator can run on I x X x A.
LiftedMeasure joint_as_lifted(const JointControlMeasure& a) {
  LiftedMeasure out;
  out.grid = a.grid;
  const int K = a.blocks();
  out.rows.assign(static_cast<std::size_t>(K),
                  std::vector<double>(static_cast<std::size_t>(a.n_states) * a.n_actions, 0.0));
  for (int b = 0; b < K; ++b)
    for (int x = 0; x < a.n_states; ++x)
      for (int ac = 0; ac < a.n_actions; ++ac)
        out.rows[static_cast<std::size_t>(b)][static_cast<std::size_t>(x) * a.n_actions + ac] =
            a.at(b, x, ac) * K;  // block mass 1/K -> probability row
  return out;
}

double safe_pow(double base, double expo) { return base <= 0.0 ? 0.0 : std::pow(base, expo); }

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  const std::size_t n = xs.size();
  if (n == 0) return r;
  double s = 0.0;
  for (double v : xs) s += v;
  r.mean = s / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : xs) ss += (v - r.mean) * (v - r.mean);
    r.se = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return r;
}

/// Truncation horizon making the discarded tail at most tol/2 in value.
int value_horizon(double beta, double reward_bound, double tol, double* tail_bound) {
  if (beta <= 0.0) {
    if (tail_bound) *tail_bound = 0.0;
    return 1;
  }
  const double target = tol * (1.0 - beta) / (2.0 * std::max(reward_bound, 1e-300));
  int T = 1;
  if (target < 1.0) {
    T = std::max(1, static_cast<int>(std::ceil(std::log(target) / std::log(beta))));
  }
  if (tail_bound) *tail_bound = std::pow(beta, T) * reward_bound / (1.0 - beta);
  return T;
}

}  // namespace

ChaosReport run_chaos_experiment(const ModelSpec& model,
                                 const std::function<NAgentSpec(int)>& nagent_for,
                                 const ChaosParams& params) {
  const int K = model.labels.K;
  const int X = model.state.size();
  const int A = model.action.size();
  require(static_cast<bool>(nagent_for), "the N-agent coefficient factory is empty");
  require(!params.Ns.empty(), "Ns is empty");
  require(static_cast<int>(params.x0_profile.size()) == K,
          "x0_profile needs exactly one state per block (" + std::to_string(K) + " entries)");
  for (int s : params.x0_profile)
    require(s >= 0 && s < X, "x0_profile entry " + std::to_string(s) + " outside the state space");
  require(params.q >= 1, "q must be >= 1");
  require(params.mf_tol > 0.0 && params.n_tol > 0.0, "tolerances must be positive");
  require(params.mn_samples >= 2, "mn_samples must be >= 2");
  require(params.gap_enum_cap >= 1 && params.gap_samples >= 1, "gap budgets must be positive");
  require(params.lipschitz_probes >= 1, "lipschitz_probes must be >= 1");
  require(params.gamma_source == "dynamics" || params.gamma_source == "reward",
          "gamma_source must be \"dynamics\" or \"reward\"");

  const MeasureGrid grid = MeasureGrid::make(K, X, params.q);
  SearchConfig search;
  search.seed = RngStream(params.seed, "chaos-mf").u64();
  const MeanFieldSolution mf = solve_mean_field(model, grid, params.mf_tol, search);

  ChaosReport report;
  report.K = K;
  report.n_states = X;
  report.n_actions = A;
  report.q = params.q;
  report.beta = model.beta;
  report.seed = params.seed;
  report.lipschitz = estimate_lipschitz(model, params.lipschitz_probes,
                                        RngStream(params.seed, "chaos-lip").u64(),
                                        params.denom_floor);
  const double L_dyn = model.lip_F ? *model.lip_F : report.lipschitz.L_F;
  const double L_rew = model.lip_f ? *model.lip_f : report.lipschitz.L_f;
  report.holder = make_holder_data(model.beta, L_dyn, L_rew, params.gamma_source);
  report.gamma = report.holder.gamma();
  report.mf_residual_bound = mf.value.residual_bound;
  report.mf_search_slack = mf.stats.exhaustive ? 0.0 : mf.stats.max_projection_slack;
  report.mn_note =
      "M-hat is a Monte-Carlo cloud estimate at the visited coupling (initial configuration "
      "under the solved policy), a proxy for the sup over all label-state-action measures in "
      "the theoretical rate constant.";

  const double diam = model.state.diameter();
  for (int N : params.Ns) {
    ChaosRow row;
    row.N = N;
    if (N < 1) {
      row.skipped = true;
      row.skip_reason = "population size must be >= 1";
      report.rows.push_back(row);
      continue;
    }
    if (N % K != 0) {
      row.skipped = true;
      row.skip_reason = "the block count " + std::to_string(K) + " does not divide N = " +
                        std::to_string(N);
      report.rows.push_back(row);
      continue;
    }
    try {
      const NAgentSpec nagent = nagent_for(N);
      const NAgentSolution sol = solve_n_agent(model, nagent, N, params.n_tol, params.n_budget);
      const std::vector<int> x0 = replicate_profile(params.x0_profile, N, K);
      row.v_n = sol.value.v[static_cast<std::size_t>(n_encode(x0, X))];

      const LiftedMeasure muN = aggregate_blocks(make_empirical_lifted(x0, X), K);
      const MeasureGrid::Projection proj = grid.project(muN, diam);
      row.projection_w1 = proj.w1_bound;
      row.v_hat = mf.value.v[static_cast<std::size_t>(proj.index)];
      row.gap = std::fabs(row.v_n - row.v_hat);

      const JointControlMeasure visited =
          compose_kernel(grid.measure_at(proj.index), mf.policy.kernel_at(proj.index));
      const MNEstimate mn =
          estimate_MN(joint_as_lifted(visited), product_metric_space(model.state, model.action),
                      N, params.mn_samples, RngStream(params.seed, "chaos-mn", static_cast<std::uint64_t>(N)).u64());
      row.m_hat = mn.mean;
      row.m_hat_se = mn.std_error;

      const ModelGaps gaps =
          model_gaps(model, nagent, N, params.gap_enum_cap, params.gap_samples,
                     RngStream(params.seed, "chaos-gaps", static_cast<std::uint64_t>(N)).u64());
      row.eps_f = gaps.eps_f;
      row.eps_F = gaps.eps_F;
      row.gaps_exhaustive = gaps.exhaustive;

      row.bound = safe_pow(row.m_hat, report.gamma) + row.eps_f + safe_pow(row.eps_F, report.gamma);
      if (row.bound > 0.0) {
        row.ratio = row.gap / row.bound;
      } else {
        row.ratio = row.gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      }
      row.solver_slack = mf.value.residual_bound + sol.residual_bound + proj.w1_bound;
    } catch (const std::invalid_argument& e) {
      row.skipped = true;
      row.skip_reason = e.what();
    }
    report.rows.push_back(row);
  }
  return report;
}

OperatorGapReport operator_gap_diagnostics(const ModelSpec& model, const NAgentSpec& nagent,
                                           int N, const MeasureGrid& grid,
                                           const std::vector<double>& V, double gamma,
                                           const std::vector<int>& x0_profile,
                                           const OperatorGapParams& params) {
  const int K = model.labels.K;
  const int X = model.state.size();
  const int A = model.action.size();
  require(N >= 1, "N must be >= 1");
  require(N % K == 0, "the block count must divide N");
  require(grid.labels.K == K && grid.n_states == X, "grid does not match the model's spaces");
  require(V.size() == static_cast<std::size_t>(grid.size()), "value table does not match the grid");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(static_cast<int>(x0_profile.size()) == K, "x0_profile needs one state per block");
  for (int s : x0_profile) require(s >= 0 && s < X, "x0_profile entry outside the state space");
  require(params.samples >= 1 && params.mn_samples >= 2 && params.cloud_samples >= 2,
          "sample counts too small");
  double joint_count = 1.0;
  for (int i = 0; i < N; ++i) joint_count *= X;
  require(joint_count <= 1e6, "joint state space too large for the unlifted value table");

  OperatorGapReport rep;
  rep.N = N;
  rep.gamma = gamma;
  const double diam = model.state.diameter();

  // Unlifted value table: tilde-V(x) = V at the projected aggregated lifted
  // empirical of the configuration x.
  const long long n_joint = static_cast<long long>(joint_count + 0.5);
  std::vector<double> tildeV(static_cast<std::size_t>(n_joint));
  for (long long code = 0; code < n_joint; ++code) {
    const std::vector<int> xs = n_decode(code, N, X);
    const MeasureGrid::Projection proj =
        grid.project(aggregate_blocks(make_empirical_lifted(xs, X), K), diam);
    tildeV[static_cast<std::size_t>(code)] = V[static_cast<std::size_t>(proj.index)];
    rep.unlift_projection_w1 = std::max(rep.unlift_projection_w1, proj.w1_bound);
  }

  // Coefficient-level gaps and the cloud-distance proxy at the replicated
  // profile with the uniform action kernel (a canonical visited coupling).
  {
    const ModelGaps gaps = model_gaps(model, nagent, N, params.gap_enum_cap, params.gap_samples,
                                      RngStream(params.seed, "opgap-gaps").u64());
    rep.eps_f = gaps.eps_f;
    rep.eps_F = gaps.eps_F;
    const std::vector<int> x0 = replicate_profile(x0_profile, N, K);
    JointControlMeasure unif;
    unif.grid = grid.labels;
    unif.n_states = X;
    unif.n_actions = A;
    unif.w.assign(static_cast<std::size_t>(K) * X * A, 0.0);
    const LiftedMeasure mu0 = aggregate_blocks(make_empirical_lifted(x0, X), K);
    for (int b = 0; b < K; ++b)
      for (int x = 0; x < X; ++x)
        for (int a = 0; a < A; ++a)
          unif.at(b, x, a) = mu0.rows[static_cast<std::size_t>(b)][static_cast<std::size_t>(x)] /
                             (static_cast<double>(K) * A);
    const MNEstimate mn =
        estimate_MN(joint_as_lifted(unif), product_metric_space(model.state, model.action), N,
                    params.mn_samples, RngStream(params.seed, "opgap-mn").u64());
    rep.m_hat = mn.mean;
    rep.m_hat_se = mn.std_error;
  }

  // Sampled operator-gap instances.  Even indices pair the action vector with
  // the map it induces (per-segment constant actions, driver exactly zero up
  // to the representative-label evaluation); odd indices draw the map and the
  // action vector independently.
  const FiniteMetricSpace prod = product_metric_space(model.state, model.action);
  const std::vector<double> reps = canonical_labels(N);
  double sum_gr = 0.0, sum_rr = 0.0;
  for (int s = 0; s < params.samples; ++s) {
    RngStream inst(params.seed, "opgap-inst", static_cast<std::uint64_t>(s));
    std::vector<int> xs(static_cast<std::size_t>(N)), as(static_cast<std::size_t>(N)),
        bs(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) xs[static_cast<std::size_t>(i)] = static_cast<int>(inst.uniform_int(static_cast<std::uint64_t>(X)));
    for (int i = 0; i < N; ++i) as[static_cast<std::size_t>(i)] = static_cast<int>(inst.uniform_int(static_cast<std::uint64_t>(A)));
    OperatorGapRow row;
    row.paired = (s % 2 == 0);
    if (row.paired) {
      bs = as;
    } else {
      for (int i = 0; i < N; ++i) bs[static_cast<std::size_t>(i)] = static_cast<int>(inst.uniform_int(static_cast<std::uint64_t>(A)));
    }

    // Mean-field side: fixed-map Bellman value at the N-block lifted empirical
    // with the map's coupling; N-agent side: fixed-action evaluation of the
    // unlifted table.
    const LiftedMeasure mux = make_empirical_lifted(xs, X);
    const JointControlMeasure coup_map = make_empirical_lifted(xs, bs, X, A);
    const double lhs_mf = unlifted_bellman_value(model, grid, V, mux, coup_map);
    const double lhs_n = n_fixed_action_value(model, nagent, N, xs, as, tildeV);
    row.gap = std::fabs(lhs_mf - lhs_n);

    // Driver distance between the two (label, state, action) couplings at the
    // segment representatives.
    DiscreteMeasure pm, pa;
    for (int i = 0; i < N; ++i) {
      pm.labels.push_back(reps[static_cast<std::size_t>(i)]);
      pm.comps.push_back(xs[static_cast<std::size_t>(i)] * A + bs[static_cast<std::size_t>(i)]);
      pm.weights.push_back(1.0 / N);
      pa.labels.push_back(reps[static_cast<std::size_t>(i)]);
      pa.comps.push_back(xs[static_cast<std::size_t>(i)] * A + as[static_cast<std::size_t>(i)]);
      pa.weights.push_back(1.0 / N);
    }
    row.driver_w = w1_discrete(pm, pa, prod).value;
    row.rhs = safe_pow(rep.m_hat, gamma) + safe_pow(row.driver_w, gamma) + rep.eps_f +
              safe_pow(rep.eps_F, gamma);
    if (row.rhs > 0.0) rep.max_ratio = std::max(rep.max_ratio, row.gap / row.rhs);
    sum_gr += row.gap * row.rhs;
    sum_rr += row.rhs * row.rhs;
    rep.rows.push_back(row);
  }
  rep.slope = sum_rr > 0.0 ? sum_gr / sum_rr : 0.0;

  // Sampled-cloud distance check at the replicated profile: i.i.d. atoms from
  // the N-block lifted empirical against the unlifted atomic empirical, with
  // the triangle route through the base measure checked pathwise.
  {
    const std::vector<int> x0 = replicate_profile(x0_profile, N, K);
    const LiftedMeasure base = make_empirical_lifted(x0, X);
    const double mesh = 1.0 / (10.0 * N);
    const DiscreteMeasure base_disc = discretize_lifted(base, mesh);
    DiscreteMeasure atomic;
    for (int i = 0; i < N; ++i) {
      atomic.labels.push_back(reps[static_cast<std::size_t>(i)]);
      atomic.comps.push_back(x0[static_cast<std::size_t>(i)]);
      atomic.weights.push_back(1.0 / N);
    }
    const double w_base_atomic = w1_lifted_empirical_atomic(x0, x0, model.state);
    std::vector<double> w_atomics, excesses;
    for (int c = 0; c < params.cloud_samples; ++c) {
      RngStream cs(params.seed, "opgap-cloud", static_cast<std::uint64_t>(c));
      DiscreteMeasure cloud;
      for (int j = 0; j < N; ++j) {
        const int blk = static_cast<int>(cs.uniform_int(static_cast<std::uint64_t>(N)));
        cloud.labels.push_back((blk + cs.uniform01()) / N);
        cloud.comps.push_back(x0[static_cast<std::size_t>(blk)]);
        cloud.weights.push_back(1.0 / N);
      }
      const double w_atomic = w1_discrete(cloud, atomic, model.state).value;
      const double w_lifted = w1_discrete(cloud, base_disc, model.state).value;
      w_atomics.push_back(w_atomic);
      excesses.push_back(w_atomic - (w_lifted + mesh / 2.0 + w_base_atomic));
    }
    const MeanSe cloud = mean_se(w_atomics);
    rep.cloud_mean = cloud.mean;
    rep.cloud_se = cloud.se;
    const MNEstimate mn_base = estimate_MN(base, model.state, N, params.cloud_samples,
                                           RngStream(params.seed, "opgap-cloud-mn").u64());
    rep.cloud_m_hat = mn_base.mean;
    rep.cloud_m_hat_se = mn_base.std_error;
    rep.cloud_bound = rep.cloud_m_hat + 1.0 / (2.0 * N) +
                      3.0 * (rep.cloud_se + rep.cloud_m_hat_se) + mn_base.mesh_error_bound;
    rep.cloud_ok = rep.cloud_mean <= rep.cloud_bound;
    rep.cloud_pathwise_excess = 0.0;
    for (double e : excesses) rep.cloud_pathwise_excess = std::max(rep.cloud_pathwise_excess, e);
  }
  return rep;
}

WeakStrongResult weak_strong_equivalence(const ModelSpec& model, const MeasureGrid& grid,
                                         const GridPolicy& pol, const LiftedMeasure& mu0,
                                         double tol, int samples, int chains_per_block,
                                         std::uint64_t seed) {
  const int K = model.labels.K;
  const int X = model.state.size();
  require(grid.labels.K == K && grid.n_states == X, "grid does not match the model's spaces");
  require(mu0.blocks() == K && mu0.states() == X, "mu0 does not match the model's spaces");
  require(mu0.rows_normalized(1e-9), "mu0 rows are not probability vectors");
  require(tol > 0.0, "tol must be positive");
  require(samples >= 2, "samples must be >= 2");
  require(chains_per_block >= 1, "chains_per_block must be >= 1");
  require(pol.K == K && pol.X == X, "policy does not match the model's spaces");

  WeakStrongResult res;
  res.samples = samples;
  res.chains = K * chains_per_block;
  res.horizon = value_horizon(model.beta, model.reward_bound, tol, &res.truncation_bound);
  const double diam = model.state.diameter();
  const int B = res.chains;

  std::vector<double> weak(static_cast<std::size_t>(samples)), strong(static_cast<std::size_t>(samples)),
      diff(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    RngStream common(seed, "ws-common", static_cast<std::uint64_t>(s));
    RngStream init(seed, "ws-init", static_cast<std::uint64_t>(s));
    RngStream idio(seed, "ws-idio", static_cast<std::uint64_t>(s));
    RngStream zs(seed, "ws-z", static_cast<std::uint64_t>(s));

    std::vector<int> chain_x(static_cast<std::size_t>(B));
    for (int j = 0; j < B; ++j)
      chain_x[static_cast<std::size_t>(j)] =
          init.sample_pmf(mu0.rows[static_cast<std::size_t>(j / chains_per_block)]);

    LiftedMeasure mu = mu0;
    double wg = 0.0, sg = 0.0, disc = 1.0;
    for (int t = 0; t < res.horizon; ++t) {
      const long long g = grid.project(mu, diam).index;
      const JointControlMeasure a = compose_kernel(mu, pol.kernel_at(g));
      wg += disc * lifted_reward(model, mu, a);

      // Strong side at the same flow: per-chain actions from the policy cell,
      // rewards and transitions against the exact flow coupling.
      std::vector<int> chain_a(static_cast<std::size_t>(B));
      double step_reward = 0.0;
      for (int j = 0; j < B; ++j) {
        const int b = j / chains_per_block;
        chain_a[static_cast<std::size_t>(j)] =
            pol.sample(g, b, chain_x[static_cast<std::size_t>(j)], zs.uniform01());
        step_reward += eval_f(model, b, chain_x[static_cast<std::size_t>(j)],
                              chain_a[static_cast<std::size_t>(j)], a);
      }
      sg += disc * step_reward / B;

      const int e0 = common.sample_pmf(model.noise.common.probs);
      for (int j = 0; j < B; ++j) {
        const int e = idio.sample_pmf(model.noise.idio.probs);
        chain_x[static_cast<std::size_t>(j)] =
            eval_F(model, j / chains_per_block, chain_x[static_cast<std::size_t>(j)],
                   chain_a[static_cast<std::size_t>(j)], a, e, e0);
      }
      mu = lifted_step(model, mu, a, e0);
      disc *= model.beta;
    }
    weak[static_cast<std::size_t>(s)] = wg;
    strong[static_cast<std::size_t>(s)] = sg;
    diff[static_cast<std::size_t>(s)] = sg - wg;
  }

  const MeanSe w = mean_se(weak), st = mean_se(strong), d = mean_se(diff);
  res.weak_mean = w.mean;
  res.weak_se = w.se;
  res.weak_ci95 = 1.96 * w.se;
  res.strong_mean = st.mean;
  res.strong_se = st.se;
  res.strong_ci95 = 1.96 * st.se;
  res.diff_mean = d.mean;
  res.diff_se = d.se;
  res.diff_ci95 = 1.96 * d.se;
  res.ci_overlap = std::fabs(res.weak_mean - res.strong_mean) <= res.weak_ci95 + res.strong_ci95;
  return res;
}

}  // namespace cnemf
