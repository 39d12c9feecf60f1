#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cnemf/chaos.hpp"
#include "cnemf/config.hpp"
#include "cnemf/io.hpp"
#include "cnemf/meanfield.hpp"
#include "cnemf/model.hpp"
#include "cnemf/nagent.hpp"
#include "cnemf/rng.hpp"
#include "cnemf/transfer.hpp"
#include "cnemf/transport.hpp"

namespace {

using nlohmann::json;
using namespace cnemf;

std::string fd(double x) { return format_double(x); }

/// Commas inside free-text fields would break the record structure.
std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

json config_echo(const ExperimentConfig& cfg) { return json::parse(canonical_config_json(cfg)); }

json provenance_json(const ExperimentConfig& cfg, const std::string& command) {
  return json{{"command", command},
              {"config_hash", cfg.config_hash},
              {"seed", cfg.seed},
              {"config", config_echo(cfg)}};
}

void emit(const ExperimentConfig& cfg, const std::string& name, const std::string& content) {
  ensure_directory(cfg.output_dir);
  const std::string path = cfg.output_dir + "/" + name;
  write_text_atomic(path, content);
  std::printf("wrote %s\n", path.c_str());
}

std::vector<int> replicated_profile(const ExperimentConfig& cfg, const ModelSpec& model, int N) {
  const std::vector<int> profile = x0_profile_from_config(cfg);
  std::vector<int> x0(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i)
    x0[static_cast<std::size_t>(i)] =
        profile[static_cast<std::size_t>(agent_block(i, N, model.labels.K))];
  return x0;
}

MeanFieldSolution solve_mf_for(const ExperimentConfig& cfg, const ModelSpec& model,
                               const MeasureGrid& grid) {
  SearchConfig search;
  search.exhaustive_budget = cfg.search_budget;
  search.seed = RngStream(cfg.seed, "mf-search").u64();
  return solve_mean_field(model, grid, cfg.mf_tol, search);
}

int cmd_solve_mf(const ExperimentConfig& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const MeasureGrid grid = MeasureGrid::make(model.labels.K, model.state.size(), cfg.q);
  const MeanFieldSolution mf = solve_mf_for(cfg, model, grid);

  std::vector<std::string> vh{"grid_index"};
  for (int b = 0; b < grid.labels.K; ++b)
    for (int x = 0; x < grid.n_states; ++x)
      vh.push_back("mu_b" + std::to_string(b) + "_x" + std::to_string(x));
  vh.push_back("value");
  std::vector<std::vector<std::string>> vrows, prows;
  for (long long g = 0; g < grid.size(); ++g) {
    const LiftedMeasure mu = grid.measure_at(g);
    std::vector<std::string> row{std::to_string(g)};
    for (int b = 0; b < grid.labels.K; ++b)
      for (int x = 0; x < grid.n_states; ++x)
        row.push_back(fd(mu.rows[static_cast<std::size_t>(b)][static_cast<std::size_t>(x)]));
    row.push_back(fd(mf.value.v[static_cast<std::size_t>(g)]));
    vrows.push_back(std::move(row));
    for (int b = 0; b < grid.labels.K; ++b)
      for (int x = 0; x < grid.n_states; ++x)
        for (int a = 0; a < model.action.size(); ++a)
          prows.push_back({std::to_string(g), std::to_string(b), std::to_string(x),
                           std::to_string(a), fd(mf.policy.at(g, b, x, a))});
  }
  emit(cfg, "mf_value_" + cfg.config_hash + ".csv",
       csv_document(cfg.config_hash, cfg.seed, vh, vrows));
  emit(cfg, "mf_policy_" + cfg.config_hash + ".csv",
       csv_document(cfg.config_hash, cfg.seed,
                    {"grid_index", "block", "state", "action", "prob"}, prows));

  json meta = provenance_json(cfg, "solve-mf");
  meta["grid"] = {{"K", grid.labels.K}, {"n_states", grid.n_states}, {"q", grid.q}, {"points", grid.size()}};
  meta["solver"] = {{"iterations", mf.value.iterations},
                    {"tol", mf.value.tol},
                    {"residual_bound", mf.value.residual_bound},
                    {"stop_threshold", mf.stop_threshold}};
  meta["search"] = {{"exhaustive", mf.stats.exhaustive},
                    {"maps_evaluated", mf.stats.maps_evaluated},
                    {"max_projection_slack", mf.stats.max_projection_slack}};
  emit(cfg, "mf_" + cfg.config_hash + ".json", meta.dump(2) + "\n");
  std::printf("solve-mf: %lld grid points, residual bound %.3e\n",
              static_cast<long long>(grid.size()), mf.value.residual_bound);
  return 0;
}

int cmd_solve_n(const ExperimentConfig& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const int X = model.state.size();
  json meta = provenance_json(cfg, "solve-n");
  meta["runs"] = json::array();
  for (int N : cfg.Ns) {
    const NAgentSpec nagent = make_builtin_nagent(cfg.model, cfg.nagent_variant, N);
    const NAgentSolution sol = solve_n_agent(model, nagent, N, cfg.n_tol, cfg.n_budget);
    std::vector<std::string> header{"code"};
    for (int i = 0; i < N; ++i) header.push_back("x" + std::to_string(i));
    header.push_back("value");
    for (int i = 0; i < N; ++i) header.push_back("a" + std::to_string(i));
    std::vector<std::vector<std::string>> rows;
    for (long long code = 0; code < static_cast<long long>(sol.value.v.size()); ++code) {
      const std::vector<int> xs = n_decode(code, N, X);
      std::vector<std::string> row{std::to_string(code)};
      for (int x : xs) row.push_back(std::to_string(x));
      row.push_back(fd(sol.value.v[static_cast<std::size_t>(code)]));
      for (int a : sol.policy[static_cast<std::size_t>(code)]) row.push_back(std::to_string(a));
      rows.push_back(std::move(row));
    }
    emit(cfg, "vn_" + cfg.config_hash + "_N" + std::to_string(N) + ".csv",
         csv_document(cfg.config_hash, cfg.seed, header, rows));
    meta["runs"].push_back({{"N", N},
                            {"iterations", sol.iterations},
                            {"residual_bound", sol.residual_bound},
                            {"joint_states", sol.value.v.size()}});
    std::printf("solve-n: N=%d, %zu joint states, residual bound %.3e\n", N, sol.value.v.size(),
                sol.residual_bound);
  }
  emit(cfg, "solve_n_" + cfg.config_hash + ".json", meta.dump(2) + "\n");
  return 0;
}

int cmd_chaos(const ExperimentConfig& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const int K = model.labels.K;
  for (int N : cfg.Ns) {
    if (N % K != 0) {
      std::fprintf(stderr,
                   "chaos: the block count K=%d does not divide N=%d; population sizes must be "
                   "multiples of K\n",
                   K, N);
      return 2;
    }
  }
  ChaosParams params;
  params.Ns = cfg.Ns;
  params.x0_profile = x0_profile_from_config(cfg);
  params.q = cfg.q;
  params.mf_tol = cfg.mf_tol;
  params.n_tol = cfg.n_tol;
  params.mn_samples = cfg.mn_samples;
  params.gap_enum_cap = cfg.gap_enum_cap;
  params.gap_samples = cfg.gap_samples;
  params.n_budget = cfg.n_budget;
  params.lipschitz_probes = cfg.lipschitz_probes;
  params.denom_floor = cfg.denom_floor;
  params.gamma_source = cfg.gamma_source;
  params.seed = cfg.seed;
  const ChaosReport rep = run_chaos_experiment(
      model, [&](int N) { return make_builtin_nagent(cfg.model, cfg.nagent_variant, N); }, params);

  std::vector<std::vector<std::string>> rows;
  for (const ChaosRow& r : rep.rows) {
    rows.push_back({std::to_string(r.N), r.skipped ? "1" : "0", csv_safe(r.skip_reason),
                    fd(r.v_n), fd(r.v_hat), fd(r.gap), fd(r.projection_w1), fd(r.m_hat),
                    fd(r.m_hat_se), fd(r.eps_f), fd(r.eps_F), r.gaps_exhaustive ? "1" : "0",
                    fd(r.bound), fd(r.ratio), fd(r.solver_slack)});
  }
  emit(cfg, "chaos_" + cfg.config_hash + ".csv",
       csv_document(cfg.config_hash, cfg.seed,
                    {"N", "skipped", "skip_reason", "v_n", "v_hat", "gap", "projection_w1",
                     "m_hat", "m_hat_se", "eps_f", "eps_F", "gaps_exhaustive", "bound", "ratio",
                     "solver_slack"},
                    rows));

  json meta = provenance_json(cfg, "chaos");
  meta["grid"] = {{"K", rep.K}, {"n_states", rep.n_states}, {"n_actions", rep.n_actions}, {"q", rep.q}};
  meta["beta"] = rep.beta;
  meta["gamma"] = rep.gamma;
  meta["holder"] = {{"gamma_dynamics", rep.holder.gamma_dynamics},
                    {"gamma_reward", rep.holder.gamma_reward},
                    {"L_dynamics", rep.holder.L_dynamics},
                    {"L_reward", rep.holder.L_reward},
                    {"clamped_dynamics", rep.holder.clamped_dynamics},
                    {"clamped_reward", rep.holder.clamped_reward},
                    {"chosen_source", rep.holder.chosen_source}};
  meta["lipschitz"] = {{"L_f", rep.lipschitz.L_f},
                       {"L_F", rep.lipschitz.L_F},
                       {"L_f_action", rep.lipschitz.L_f_action},
                       {"L_F_action", rep.lipschitz.L_F_action},
                       {"probe_pairs", rep.lipschitz.probe_pairs},
                       {"denominator_floor", rep.lipschitz.denominator_floor}};
  meta["mf_residual_bound"] = rep.mf_residual_bound;
  meta["mf_search_slack"] = rep.mf_search_slack;
  meta["mn_note"] = rep.mn_note;
  meta["rows"] = json::array();
  for (const ChaosRow& r : rep.rows) {
    json jr{{"N", r.N}, {"skipped", r.skipped}};
    if (r.skipped) {
      jr["skip_reason"] = r.skip_reason;
    } else {
      jr["v_n"] = r.v_n;
      jr["v_hat"] = r.v_hat;
      jr["gap"] = r.gap;
      jr["projection_w1"] = r.projection_w1;
      jr["m_hat"] = r.m_hat;
      jr["m_hat_se"] = r.m_hat_se;
      jr["eps_f"] = r.eps_f;
      jr["eps_F"] = r.eps_F;
      jr["gaps_exhaustive"] = r.gaps_exhaustive;
      jr["bound"] = r.bound;
      jr["ratio"] = r.ratio;
      jr["solver_slack"] = r.solver_slack;
    }
    meta["rows"].push_back(jr);
  }
  emit(cfg, "chaos_" + cfg.config_hash + ".json", meta.dump(2) + "\n");
  for (const ChaosRow& r : rep.rows) {
    if (r.skipped)
      std::printf("chaos: N=%d skipped (%s)\n", r.N, r.skip_reason.c_str());
    else
      std::printf("chaos: N=%d gap=%.6e bound=%.6e ratio=%.4f\n", r.N, r.gap, r.bound, r.ratio);
  }
  return 0;
}

int cmd_transfer(const ExperimentConfig& cfg) {
  const ModelSpec model = model_from_config(cfg);
  const int K = model.labels.K;
  const int N = cfg.transfer_N;
  if (N % K != 0) {
    std::fprintf(stderr,
                 "transfer: the block count K=%d does not divide N=%d; the population size must "
                 "be a multiple of K\n",
                 K, N);
    return 2;
  }
  const MeasureGrid grid = MeasureGrid::make(K, model.state.size(), cfg.q);
  const MeanFieldSolution mf = solve_mf_for(cfg, model, grid);
  const NAgentSpec nagent = make_builtin_nagent(cfg.model, cfg.nagent_variant, N);
  const NAgentSolution sol = solve_n_agent(model, nagent, N, cfg.n_tol, cfg.n_budget);
  const std::vector<int> x0 = replicated_profile(cfg, model, N);
  const double v_n_x0 = sol.value.v[static_cast<std::size_t>(n_encode(x0, model.state.size()))];

  std::vector<std::string> modes;
  if (cfg.transfer_mode == "both") {
    modes = {"direct", "matching"};
  } else {
    modes = {cfg.transfer_mode};
  }

  json meta = provenance_json(cfg, "transfer");
  meta["N"] = N;
  meta["v_n_x0"] = v_n_x0;
  meta["n_solver_residual_bound"] = sol.residual_bound;
  meta["mf_residual_bound"] = mf.value.residual_bound;
  meta["modes"] = json::array();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t mi = 0; mi < modes.size(); ++mi) {
    TransferConfig tc;
    tc.mode = modes[mi];
    tc.matching_budget = cfg.matching_budget;
    tc.descent_sweeps = cfg.descent_sweeps;
    const TransferPolicy tp = transfer_policy(model, grid, mf.policy, N, tc);
    const McGain gain =
        mc_policy_gain(model, nagent, N, tp.policy, x0, cfg.mc_tol, cfg.mc_samples,
                       RngStream(cfg.seed, "transfer-mc", static_cast<std::uint64_t>(mi)).u64());
    rows.push_back({modes[mi], std::to_string(N), fd(v_n_x0), fd(gain.mean), fd(gain.std_error),
                    fd(gain.ci95), std::to_string(gain.samples), std::to_string(gain.horizon),
                    fd(gain.truncation_bound), std::to_string(tp.stats->calls),
                    fd(tp.stats->max_projection_w1), fd(tp.stats->max_matching_w1),
                    tp.stats->exhaustive ? "1" : "0"});
    meta["modes"].push_back({{"mode", modes[mi]},
                             {"mc_mean", gain.mean},
                             {"mc_std_error", gain.std_error},
                             {"mc_ci95", gain.ci95},
                             {"mc_samples", gain.samples},
                             {"horizon", gain.horizon},
                             {"truncation_bound", gain.truncation_bound},
                             {"transfer_calls", tp.stats->calls},
                             {"max_projection_w1", tp.stats->max_projection_w1},
                             {"max_matching_w1", tp.stats->max_matching_w1},
                             {"matching_exhaustive", tp.stats->exhaustive}});
    std::printf("transfer: mode=%s mc_gain=%.6f (ci95 %.4f), V_N(x0)=%.6f\n", modes[mi].c_str(),
                gain.mean, gain.ci95, v_n_x0);
  }
  try {
    const RegularityEstimate reg = estimate_regularity(model, grid, mf.policy);
    meta["regularity"] = {{"K_hat", reg.K_hat},
                          {"pairs", reg.pairs},
                          {"max_numerator", reg.max_numerator},
                          {"min_denominator", reg.min_denominator}};
  } catch (const std::domain_error& e) {
    meta["regularity"] = {{"error", e.what()}};
  }
  emit(cfg, "transfer_" + cfg.config_hash + ".csv",
       csv_document(cfg.config_hash, cfg.seed,
                    {"mode", "N", "v_n_x0", "mc_mean", "mc_std_error", "mc_ci95", "mc_samples",
                     "horizon", "truncation_bound", "transfer_calls", "max_projection_w1",
                     "max_matching_w1", "matching_exhaustive"},
                    rows));
  emit(cfg, "transfer_" + cfg.config_hash + ".json", meta.dump(2) + "\n");
  return 0;
}

/// Oracle equivalence of the exact transport routines against brute-force
/// permutation enumeration, plus Kantorovich dual certificates.
int cmd_transport_selftest(const ExperimentConfig& cfg) {
  RngStream rng(cfg.seed, "transport-selftest");
  int failures = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 1 + static_cast<int>(rng.uniform_int(7));
    const int X = 2 + static_cast<int>(rng.uniform_int(3));
    // States embedded on a line so the ground distance is a true metric.
    std::vector<double> pos(static_cast<std::size_t>(X), 0.0);
    for (int i = 1; i < X; ++i)
      pos[static_cast<std::size_t>(i)] = pos[static_cast<std::size_t>(i - 1)] + 0.1 + rng.uniform01();
    FiniteMetricSpace space;
    space.labels.resize(static_cast<std::size_t>(X));
    space.dist.assign(static_cast<std::size_t>(X), std::vector<double>(static_cast<std::size_t>(X), 0.0));
    for (int i = 0; i < X; ++i) {
      space.labels[static_cast<std::size_t>(i)] = "s" + std::to_string(i);
      for (int j = 0; j < X; ++j)
        space.dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            std::fabs(pos[static_cast<std::size_t>(i)] - pos[static_cast<std::size_t>(j)]);
    }
    std::vector<CloudPoint> xs(static_cast<std::size_t>(n)), ys(static_cast<std::size_t>(n));
    DiscreteMeasure mu, nu;
    for (int i = 0; i < n; ++i) {
      xs[static_cast<std::size_t>(i)] = {rng.uniform01(), static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(X)))};
      ys[static_cast<std::size_t>(i)] = {rng.uniform01(), static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(X)))};
      mu.labels.push_back(xs[static_cast<std::size_t>(i)].label);
      mu.comps.push_back(xs[static_cast<std::size_t>(i)].comp);
      mu.weights.push_back(1.0 / n);
      nu.labels.push_back(ys[static_cast<std::size_t>(i)].label);
      nu.comps.push_back(ys[static_cast<std::size_t>(i)].comp);
      nu.weights.push_back(1.0 / n);
    }
    auto cost = [&](int i, int j) {
      return std::fabs(xs[static_cast<std::size_t>(i)].label - ys[static_cast<std::size_t>(j)].label) +
             space.d(xs[static_cast<std::size_t>(i)].comp, ys[static_cast<std::size_t>(j)].comp);
    };
    std::vector<int> sigma(static_cast<std::size_t>(n));
    std::iota(sigma.begin(), sigma.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (int i = 0; i < n; ++i) c += cost(i, sigma[static_cast<std::size_t>(i)]);
      best = std::min(best, c / n);
    } while (std::next_permutation(sigma.begin(), sigma.end()));

    const TransportResult tr = w1_discrete(mu, nu, space);
    const PermutationResult pr = optimal_permutation(xs, ys, space);
    // One shared potential evaluated on both supports: the dual value is
    // the difference of the two integrals and feasibility means the potential
    // is 1-Lipschitz across every pair of support points.
    double dual = 0.0;
    for (int i = 0; i < n; ++i) dual += tr.phi_mu[static_cast<std::size_t>(i)] / n;
    for (int j = 0; j < n; ++j) dual -= tr.phi_nu[static_cast<std::size_t>(j)] / n;
    std::vector<CloudPoint> pts(xs);
    pts.insert(pts.end(), ys.begin(), ys.end());
    std::vector<double> phis(tr.phi_mu);
    phis.insert(phis.end(), tr.phi_nu.begin(), tr.phi_nu.end());
    double feas = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const double d = std::fabs(pts[i].label - pts[j].label) + space.d(pts[i].comp, pts[j].comp);
        feas = std::max(feas, std::fabs(phis[i] - phis[j]) - d);
      }
    const bool ok = std::fabs(tr.value - best) <= 1e-9 && std::fabs(pr.cost - best) <= 1e-9 &&
                    std::fabs(tr.value - dual) <= 1e-9 && feas <= 1e-9;
    if (!ok) {
      ++failures;
      std::printf("FAIL instance %d: brute=%.12f solver=%.12f perm=%.12f dual=%.12f feas=%.3e\n",
                  inst, best, tr.value, pr.cost, dual, feas);
    }
  }
  if (failures == 0) {
    std::printf("transport-selftest: PASS (50 instances, solver/permutation/dual all within 1e-9)\n");
    return 0;
  }
  std::printf("transport-selftest: FAIL (%d of 50 instances)\n", failures);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solver laboratory for conditional non-exchangeable mean-field MDPs"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  std::optional<std::uint64_t> seed_override;
  int rc = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment configuration");
    sub->add_option("--out", out_override, "output directory (overrides the config)");
    sub->add_option("--seed", seed_override, "root seed (overrides the config)");
  };
  auto load = [&]() {
    ExperimentConfig cfg = config_path.empty() ? default_config() : parse_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    if (!out_override.empty()) cfg.output_dir = out_override;
    cfg.config_hash = compute_config_hash(cfg);
    return cfg;
  };

  CLI::App* mf = app.add_subcommand("solve-mf", "solve the mean-field problem on the measure lattice");
  add_common(mf);
  mf->callback([&] { rc = cmd_solve_mf(load()); });
  CLI::App* sn = app.add_subcommand("solve-n", "solve the exact N-agent problems");
  add_common(sn);
  sn->callback([&] { rc = cmd_solve_n(load()); });
  CLI::App* ch = app.add_subcommand("chaos", "value-gap experiment across population sizes");
  add_common(ch);
  ch->callback([&] { rc = cmd_chaos(load()); });
  CLI::App* tr = app.add_subcommand("transfer", "evaluate transferred mean-field policies at finite N");
  add_common(tr);
  tr->callback([&] { rc = cmd_transfer(load()); });
  CLI::App* ts = app.add_subcommand("transport-selftest", "oracle equivalence of the transport solvers");
  add_common(ts);
  ts->callback([&] { rc = cmd_transport_selftest(load()); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return rc;
}
