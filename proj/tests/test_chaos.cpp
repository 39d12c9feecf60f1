#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "cnemf/chaos.hpp"

using namespace cnemf;

namespace {

BuiltinModelConfig chaos_config(int idio_levels = 4) {
  BuiltinModelConfig cfg;
  cfg.family = "threshold-graphon";
  cfg.blocks = 2;
  cfg.graphon = {{2.0, 1.0}, {1.0, 2.0}};
  cfg.idio_levels = idio_levels;
  cfg.beta = 0.5;
  return cfg;
}

ChaosParams small_params() {
  ChaosParams p;
  p.Ns = {2, 4};
  p.x0_profile = {0, 1};
  p.q = 6;
  p.mf_tol = 1e-6;
  p.n_tol = 1e-6;
  p.mn_samples = 60;
  p.lipschitz_probes = 8;
  p.seed = 5;
  return p;
}

std::function<NAgentSpec(int)> same_coefficients(const BuiltinModelConfig& cfg) {
  return [cfg](int N) { return make_builtin_nagent(cfg, "same", N); };
}

}  // namespace

TEST_CASE("frozen populations close the value gap exactly") {
  BuiltinModelConfig cfg;
  cfg.family = "identity";
  cfg.blocks = 1;
  cfg.reward_constant = 2.0;
  const ModelSpec m = make_builtin_model(cfg);
  ChaosParams p;
  p.Ns = {1, 2, 3};
  p.x0_profile = {0};
  p.q = 4;
  p.mn_samples = 40;
  p.lipschitz_probes = 4;
  const ChaosReport rep = run_chaos_experiment(m, same_coefficients(cfg), p);
  REQUIRE(rep.rows.size() == 3);
  for (const ChaosRow& row : rep.rows) {
    REQUIRE_FALSE(row.skipped);
    // V_N and the lattice value both equal c / (1 - beta) for every profile.
    CHECK(std::fabs(row.v_n - 2.0 / (1.0 - cfg.beta)) <= 1e-6);
    CHECK(row.gap <= 2e-6);
    CHECK(row.eps_f == doctest::Approx(0.0));
    CHECK(row.eps_F == doctest::Approx(0.0));
    CHECK(row.projection_w1 == doctest::Approx(0.0));
    CHECK(row.gaps_exhaustive);
    CHECK(row.bound >= 0.0);
    CHECK(row.solver_slack >= 0.0);
  }
}

TEST_CASE("the value gap trends down and rows carry coherent metadata") {
  const BuiltinModelConfig cfg = chaos_config();
  const ModelSpec m = make_builtin_model(cfg);
  const ChaosReport rep = run_chaos_experiment(m, same_coefficients(cfg), small_params());
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.K == 2);
  CHECK(rep.q == 6);
  CHECK(rep.beta == doctest::Approx(0.5));
  CHECK(rep.gamma > 0.0);
  CHECK(rep.gamma <= 1.0);
  CHECK(rep.mn_note.find("visited") != std::string::npos);
  CHECK(rep.mf_residual_bound <= 1e-6);
  CHECK(rep.mf_search_slack == doctest::Approx(0.0));  // exhaustive map search here

  const ChaosRow& r2 = rep.rows[0];
  const ChaosRow& r4 = rep.rows[1];
  REQUIRE_FALSE(r2.skipped);
  REQUIRE_FALSE(r4.skipped);
  CHECK(r2.N == 2);
  CHECK(r4.N == 4);
  for (const ChaosRow* r : {&r2, &r4}) {
    CHECK(r->gap == doctest::Approx(std::fabs(r->v_n - r->v_hat)));
    CHECK(r->m_hat > 0.0);
    CHECK(r->m_hat_se > 0.0);
    CHECK(r->bound >= r->eps_f);
    CHECK(r->ratio == doctest::Approx(r->gap / r->bound));
    // The replicated profile lands exactly on the lattice (K | N, q even).
    CHECK(r->projection_w1 == doctest::Approx(0.0));
  }
  // Identical coefficients: the only rate terms are statistical.
  CHECK(r2.eps_f == doctest::Approx(0.0));
  CHECK(r2.eps_F == doctest::Approx(0.0));
  // The headline trend: more agents, smaller gap; ratios stay comparable.
  CHECK(r4.gap <= r2.gap + 1e-9);
  const double lo = std::min(r2.ratio, r4.ratio), hi = std::max(r2.ratio, r4.ratio);
  CHECK(lo > 0.0);
  CHECK(hi / lo <= 10.0);
}

TEST_CASE("indivisible and oversized populations are skipped with reasons") {
  const BuiltinModelConfig cfg = chaos_config();
  const ModelSpec m = make_builtin_model(cfg);
  ChaosParams p = small_params();
  p.Ns = {2, 3};
  const ChaosReport rep = run_chaos_experiment(m, same_coefficients(cfg), p);
  REQUIRE(rep.rows.size() == 2);
  CHECK_FALSE(rep.rows[0].skipped);
  CHECK(rep.rows[1].skipped);
  CHECK(rep.rows[1].skip_reason.find("divide") != std::string::npos);

  ChaosParams tiny = small_params();
  tiny.Ns = {2, 4};
  tiny.n_budget = 100;  // even N = 2 enumerations exceed this
  const ChaosReport rep2 = run_chaos_experiment(m, same_coefficients(cfg), tiny);
  for (const ChaosRow& row : rep2.rows) {
    CHECK(row.skipped);
    CHECK(row.skip_reason.find("budget") != std::string::npos);
  }
}

TEST_CASE("experiment reports are deterministic replays of the seed") {
  const BuiltinModelConfig cfg = chaos_config();
  const ModelSpec m = make_builtin_model(cfg);
  const ChaosReport a = run_chaos_experiment(m, same_coefficients(cfg), small_params());
  const ChaosReport b = run_chaos_experiment(m, same_coefficients(cfg), small_params());
  REQUIRE(a.rows.size() == b.rows.size());
  CHECK(a.gamma == b.gamma);
  CHECK(a.mf_residual_bound == b.mf_residual_bound);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].v_n == b.rows[i].v_n);
    CHECK(a.rows[i].v_hat == b.rows[i].v_hat);
    CHECK(a.rows[i].m_hat == b.rows[i].m_hat);
    CHECK(a.rows[i].eps_F == b.rows[i].eps_F);
    CHECK(a.rows[i].bound == b.rows[i].bound);
  }
}

TEST_CASE("rejected parameters name the offending field") {
  const BuiltinModelConfig cfg = chaos_config();
  const ModelSpec m = make_builtin_model(cfg);
  ChaosParams p = small_params();
  p.x0_profile = {0};  // wrong length for K = 2
  CHECK_THROWS_AS(run_chaos_experiment(m, same_coefficients(cfg), p),
                  std::invalid_argument);
  p = small_params();
  p.gamma_source = "no-such-source";
  CHECK_THROWS_AS(run_chaos_experiment(m, same_coefficients(cfg), p),
                  std::invalid_argument);
  p = small_params();
  p.Ns = {};
  CHECK_THROWS_AS(run_chaos_experiment(m, same_coefficients(cfg), p),
                  std::invalid_argument);
}

TEST_CASE("operator proximity: paired controls have zero driver distance") {
  const BuiltinModelConfig cfg = chaos_config();
  const ModelSpec m = make_builtin_model(cfg);
  const MeasureGrid grid = MeasureGrid::make(2, 2, 6);
  const MeanFieldSolution sol = solve_mean_field(m, grid, 1e-6);
  const NAgentSpec n = make_builtin_nagent(cfg, "same", 4);
  OperatorGapParams p;
  p.samples = 20;
  p.mn_samples = 40;
  p.cloud_samples = 60;
  p.seed = 3;
  const OperatorGapReport rep =
      operator_gap_diagnostics(m, n, 4, grid, sol.value.v, 0.8, {0, 1}, p);
  REQUIRE(rep.rows.size() == 20);
  CHECK(rep.N == 4);
  bool saw_paired = false, saw_indep = false;
  for (const OperatorGapRow& row : rep.rows) {
    CHECK(row.rhs > 0.0);
    CHECK(row.gap >= 0.0);
    if (row.paired) {
      saw_paired = true;
      // The action vector realizing the kernel on each label segment drives
      // the coupling distance to zero exactly.
      CHECK(row.driver_w == doctest::Approx(0.0));
    } else {
      saw_indep = true;
      CHECK(row.driver_w >= 0.0);
    }
  }
  CHECK(saw_paired);
  CHECK(saw_indep);
  CHECK(rep.slope >= 0.0);
  CHECK(std::isfinite(rep.max_ratio));
  CHECK(rep.m_hat > 0.0);
  CHECK(rep.eps_f == doctest::Approx(0.0));  // same coefficients
  CHECK(rep.eps_F == doctest::Approx(0.0));
}

TEST_CASE("sampled clouds respect the lifted-to-atomic distance budget") {
  const BuiltinModelConfig cfg = chaos_config();
  const ModelSpec m = make_builtin_model(cfg);
  const MeasureGrid grid = MeasureGrid::make(2, 2, 6);
  const MeanFieldSolution sol = solve_mean_field(m, grid, 1e-6);
  const NAgentSpec n = make_builtin_nagent(cfg, "same", 4);
  OperatorGapParams p;
  p.samples = 6;
  p.mn_samples = 40;
  p.cloud_samples = 80;
  p.seed = 9;
  const OperatorGapReport rep =
      operator_gap_diagnostics(m, n, 4, grid, sol.value.v, 0.8, {0, 1}, p);
  CHECK(rep.cloud_mean > 0.0);
  CHECK(rep.cloud_bound > 0.0);
  CHECK(rep.cloud_ok);
  // Per-cloud triangle bookkeeping: atomic distance never exceeds the lifted
  // distance plus the mesh and label-alignment allowances.
  CHECK(rep.cloud_pathwise_excess <= 1e-9);
}

TEST_CASE("constant rewards cancel from operator gaps") {
  // Two frozen families differing only in the reward constant: the fixed-point
  // tables shift by c/(1-beta) but every operator gap is identical.
  auto report_for = [](double c) {
    BuiltinModelConfig cfg;
    cfg.family = "identity";
    cfg.blocks = 1;
    cfg.reward_constant = c;
    const ModelSpec m = make_builtin_model(cfg);
    const MeasureGrid grid = MeasureGrid::make(1, 2, 4);
    const MeanFieldSolution sol = solve_mean_field(m, grid, 1e-8);
    OperatorGapParams p;
    p.samples = 12;
    p.mn_samples = 30;
    p.cloud_samples = 30;
    p.seed = 11;
    return operator_gap_diagnostics(m, make_builtin_nagent(cfg, "same", 3), 3, grid, sol.value.v,
                                    1.0, {0}, p);
  };
  const OperatorGapReport r1 = report_for(1.0);
  const OperatorGapReport r5 = report_for(5.0);
  REQUIRE(r1.rows.size() == r5.rows.size());
  for (std::size_t i = 0; i < r1.rows.size(); ++i) {
    CHECK(r1.rows[i].gap == doctest::Approx(r5.rows[i].gap).epsilon(1e-9));
    CHECK(r1.rows[i].driver_w == doctest::Approx(r5.rows[i].driver_w).epsilon(1e-12));
  }
}

TEST_CASE("weak and strong formulations agree within Monte-Carlo error") {
  const BuiltinModelConfig cfg = chaos_config();
  const ModelSpec m = make_builtin_model(cfg);
  const MeasureGrid grid = MeasureGrid::make(2, 2, 6);
  const MeanFieldSolution sol = solve_mean_field(m, grid, 1e-6);
  LiftedMeasure mu0{LabelGrid{2}, {{0.5, 0.5}, {1.0, 0.0}}};
  const WeakStrongResult r =
      weak_strong_equivalence(m, grid, sol.policy, mu0, 1e-3, 400, 24, 17);
  CHECK(r.samples == 400);
  CHECK(r.chains == 48);
  CHECK(r.horizon >= 1);
  CHECK(r.truncation_bound <= 1e-3 / 2.0 + 1e-15);
  CHECK(r.weak_se >= 0.0);
  CHECK(r.strong_se > 0.0);
  CHECK(r.diff_se > 0.0);
  // The paired difference is centered at zero.
  CHECK(std::fabs(r.diff_mean) <= 4.0 * r.diff_se + 1e-6);
  CHECK(r.ci_overlap);
  // Determinism of the full result.
  const WeakStrongResult r2 =
      weak_strong_equivalence(m, grid, sol.policy, mu0, 1e-3, 400, 24, 17);
  CHECK(r.weak_mean == r2.weak_mean);
  CHECK(r.strong_mean == r2.strong_mean);
  CHECK(r.diff_mean == r2.diff_mean);
}

TEST_CASE("weak-strong comparison validates its inputs") {
  const BuiltinModelConfig cfg = chaos_config();
  const ModelSpec m = make_builtin_model(cfg);
  const MeasureGrid grid = MeasureGrid::make(2, 2, 6);
  const MeanFieldSolution sol = solve_mean_field(m, grid, 1e-6);
  LiftedMeasure bad{LabelGrid{2}, {{0.7, 0.5}, {1.0, 0.0}}};  // row sums to 1.2
  CHECK_THROWS_AS(weak_strong_equivalence(m, grid, sol.policy, bad, 1e-3, 10, 4, 1),
                  std::invalid_argument);
  LiftedMeasure mu0{LabelGrid{2}, {{0.5, 0.5}, {1.0, 0.0}}};
  CHECK_THROWS_AS(weak_strong_equivalence(m, grid, sol.policy, mu0, 1e-3, 1, 4, 1),
                  std::invalid_argument);
}
