#include "cnemf/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cnemf/rng.hpp"
#include "cnemf/transport.hpp"

namespace cnemf {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("model: " + msg);
}

void check_args(const ModelSpec& model, int block, int x, int a, const JointControlMeasure& m,
                int K_expected) {
  require(block >= 0 && block < K_expected, "block index out of range");
  require(x >= 0 && x < model.state.size(), "state index out of range");
  require(a >= 0 && a < model.action.size(), "action index out of range");
  require(m.grid.K == K_expected, "control measure not at the coefficient block resolution");
  require(m.n_states == model.state.size() && m.n_actions == model.action.size(),
          "control measure over mismatched spaces");
}

}  // namespace

int eval_F(const ModelSpec& model, int block, int x, int a, const JointControlMeasure& m, int e,
           int e0) {
  check_args(model, block, x, a, m, model.labels.K);
  require(e >= 0 && e < model.noise.idio.size(), "idiosyncratic noise index out of range");
  require(e0 >= 0 && e0 < model.noise.common.size(), "common noise index out of range");
  const int next = model.F(block, x, a, m, e, e0);
  require(next >= 0 && next < model.state.size(), "dynamics returned an invalid state");
  return next;
}

double eval_f(const ModelSpec& model, int block, int x, int a, const JointControlMeasure& m) {
  check_args(model, block, x, a, m, model.labels.K);
  const double r = model.f(block, x, a, m);
  require(std::isfinite(r) && std::fabs(r) <= model.reward_bound + 1e-9,
          "reward exceeds the declared bound");
  return r;
}

int eval_F_N(const ModelSpec& model, const NAgentSpec& nagent, int block, int x, int a,
             const JointControlMeasure& m, int e, int e0) {
  check_args(model, block, x, a, m, nagent.K_N);
  require(e >= 0 && e < model.noise.idio.size(), "idiosyncratic noise index out of range");
  require(e0 >= 0 && e0 < model.noise.common.size(), "common noise index out of range");
  const int next = nagent.F_N(block, x, a, m, e, e0);
  require(next >= 0 && next < model.state.size(), "N-agent dynamics returned an invalid state");
  return next;
}

double eval_f_N(const ModelSpec& model, const NAgentSpec& nagent, int block, int x, int a,
                const JointControlMeasure& m) {
  check_args(model, block, x, a, m, nagent.K_N);
  const double r = nagent.f_N(block, x, a, m);
  require(std::isfinite(r) && std::fabs(r) <= nagent.reward_bound + 1e-9,
          "N-agent reward exceeds the declared bound");
  return r;
}

NAgentSpec nagent_from_model(const ModelSpec& model) {
  NAgentSpec out;
  out.variant = "same";
  out.K_N = model.labels.K;
  out.reward_bound = model.reward_bound;
  out.F_N = model.F;
  out.f_N = model.f;
  return out;
}

// ---------------------------------------------------------------------------
// Level gaps
// ---------------------------------------------------------------------------

ModelGaps model_gaps(const ModelSpec& model, const NAgentSpec& nagent, int N, long long enum_cap,
                     int sample_count, std::uint64_t seed) {
  require(N >= 1, "population size must be positive");
  const int K = model.labels.K;
  const int KN = nagent.K_N;
  require(N % K == 0, "coefficient blocks must divide the population size");
  require(N % KN == 0, "N-agent blocks must divide the population size");
  const int X = model.state.size();
  const int A = model.action.size();
  const int E = model.noise.idio.size();
  const int E0 = model.noise.common.size();

  const int cells = X * A;
  double log_count = N * std::log(static_cast<double>(cells));
  const bool exhaustive = log_count <= std::log(static_cast<double>(enum_cap)) + 1e-12;
  long long total = 1;
  if (exhaustive)
    for (int i = 0; i < N; ++i) total *= cells;

  ModelGaps out;
  out.exhaustive = exhaustive;
  std::vector<int> xs(N), as(N);
  RngStream gen(seed, "model-gaps");
  const long long runs = exhaustive ? total : sample_count;
  for (long long run = 0; run < runs; ++run) {
    if (exhaustive) {
      long long code = run;
      for (int i = 0; i < N; ++i) {
        const int cell = static_cast<int>(code % cells);
        code /= cells;
        xs[i] = cell / A;
        as[i] = cell % A;
      }
    } else {
      for (int i = 0; i < N; ++i) {
        xs[i] = static_cast<int>(gen.uniform_int(X));
        as[i] = static_cast<int>(gen.uniform_int(A));
      }
    }
    const JointControlMeasure joint = make_empirical_lifted(xs, as, X, A);
    const JointControlMeasure mK = aggregate_blocks(joint, K);
    const JointControlMeasure mKN = aggregate_blocks(joint, KN);

    double f_dev = 0.0, F_dev = 0.0;
    for (int i = 0; i < N; ++i) {
      const int bK = agent_block(i, N, K);
      const int bKN = agent_block(i, N, KN);
      f_dev += std::fabs(eval_f(model, bK, xs[i], as[i], mK) -
                         eval_f_N(model, nagent, bKN, xs[i], as[i], mKN));
      for (int e0 = 0; e0 < E0; ++e0) {
        const double p0 = model.noise.common.probs[e0];
        for (int e = 0; e < E; ++e) {
          const double pe = model.noise.idio.probs[e];
          const int y = eval_F(model, bK, xs[i], as[i], mK, e, e0);
          const int yN = eval_F_N(model, nagent, bKN, xs[i], as[i], mKN, e, e0);
          F_dev += p0 * pe * model.state.d(y, yN);
        }
      }
    }
    out.eps_f = std::max(out.eps_f, f_dev / N);
    out.eps_F = std::max(out.eps_F, F_dev / N);
    ++out.configs_checked;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lipschitz estimation
// ---------------------------------------------------------------------------

namespace {

JointControlMeasure uniform_joint(int K, int X, int A) {
  JointControlMeasure m;
  m.grid = LabelGrid{K};
  m.n_states = X;
  m.n_actions = A;
  m.w.assign(static_cast<std::size_t>(K) * X * A, 1.0 / (static_cast<double>(K) * X * A));
  return m;
}

JointControlMeasure pure_joint(int K, int X, int A, int x, int a) {
  JointControlMeasure m;
  m.grid = LabelGrid{K};
  m.n_states = X;
  m.n_actions = A;
  m.w.assign(static_cast<std::size_t>(K) * X * A, 0.0);
  for (int b = 0; b < K; ++b) m.at(b, x, a) = 1.0 / K;
  return m;
}

JointControlMeasure random_joint(int K, int X, int A, RngStream& gen) {
  JointControlMeasure m;
  m.grid = LabelGrid{K};
  m.n_states = X;
  m.n_actions = A;
  m.w.resize(static_cast<std::size_t>(K) * X * A);
  for (int b = 0; b < K; ++b) {
    double tot = 0.0;
    for (int x = 0; x < X; ++x)
      for (int a = 0; a < A; ++a) {
        const double v = 0.01 + gen.uniform01();
        m.at(b, x, a) = v;
        tot += v;
      }
    for (int x = 0; x < X; ++x)
      for (int a = 0; a < A; ++a) m.at(b, x, a) /= tot * K;
  }
  return m;
}

}  // namespace

LipschitzEstimate estimate_lipschitz(const ModelSpec& model, int probe_count, std::uint64_t seed,
                                     double denom_floor) {
  const int K = model.labels.K;
  const int X = model.state.size();
  const int A = model.action.size();
  const int E = model.noise.idio.size();
  const int E0 = model.noise.common.size();
  require(K * X * A <= 4096, "probe enumeration beyond supported size");
  require(probe_count >= 1, "probe count must be positive");
  require(denom_floor > 0.0, "denominator floor must be positive");

  std::vector<JointControlMeasure> pool;
  pool.push_back(uniform_joint(K, X, A));
  for (int x = 0; x < X && static_cast<int>(pool.size()) < 17; ++x)
    for (int a = 0; a < A && static_cast<int>(pool.size()) < 17; ++a)
      pool.push_back(pure_joint(K, X, A, x, a));
  RngStream gen(seed, "lipschitz-measures");
  const int randoms = std::min(probe_count, 48);
  for (int r = 0; r < randoms; ++r) pool.push_back(random_joint(K, X, A, gen));
  const int M = static_cast<int>(pool.size());

  // Pairwise W1 between pool measures at block representatives.
  const FiniteMetricSpace composite = product_metric_space(model.state, model.action);
  std::vector<DiscreteMeasure> views(M);
  for (int i = 0; i < M; ++i) views[i] = joint_at_representatives(pool[i]);
  std::vector<std::vector<double>> wdist(M, std::vector<double>(M, 0.0));
  for (int i = 0; i < M; ++i)
    for (int j = i + 1; j < M; ++j)
      wdist[i][j] = wdist[j][i] = w1_discrete(views[i], views[j], composite).value;

  struct Cell {
    int b, x, a;
  };
  std::vector<Cell> cells;
  for (int b = 0; b < K; ++b)
    for (int x = 0; x < X; ++x)
      for (int a = 0; a < A; ++a) cells.push_back({b, x, a});
  const int C = static_cast<int>(cells.size());

  LipschitzEstimate est;
  est.denominator_floor = denom_floor;
  est.declared_F = model.lip_F;
  est.declared_f = model.lip_f;

  for (int mi = 0; mi < M; ++mi)
    for (int mj = mi; mj < M; ++mj) {
      const double w = wdist[mi][mj];
      for (int ci = 0; ci < C; ++ci)
        for (int cj = (mi == mj ? ci + 1 : 0); cj < C; ++cj) {
          const Cell& p = cells[ci];
          const Cell& q = cells[cj];
          const double du =
              std::fabs(model.labels.representative(p.b) - model.labels.representative(q.b));
          const double base = du + model.state.d(p.x, q.x) + w;
          const double da = model.action.d(p.a, q.a);

          const double df = std::fabs(eval_f(model, p.b, p.x, p.a, pool[mi]) -
                                      eval_f(model, q.b, q.x, q.a, pool[mj]));
          double dF = 0.0;
          for (int e0 = 0; e0 < E0; ++e0)
            for (int e = 0; e < E; ++e)
              dF += model.noise.common.probs[e0] * model.noise.idio.probs[e] *
                    model.state.d(eval_F(model, p.b, p.x, p.a, pool[mi], e, e0),
                                  eval_F(model, q.b, q.x, q.a, pool[mj], e, e0));

          bool counted = false;
          if (p.a == q.a && base >= denom_floor) {
            est.L_f = std::max(est.L_f, df / base);
            est.L_F = std::max(est.L_F, dF / base);
            counted = true;
          }
          if (base + da >= denom_floor) {
            est.L_f_action = std::max(est.L_f_action, df / (base + da));
            est.L_F_action = std::max(est.L_F_action, dF / (base + da));
            counted = true;
          }
          if (counted) ++est.probe_pairs;
        }
    }

  if (est.declared_f && est.L_f > *est.declared_f + 1e-9) est.declared_f_exceeded = true;
  if (est.declared_F && est.L_F > *est.declared_F + 1e-9) est.declared_F_exceeded = true;
  return est;
}

// ---------------------------------------------------------------------------
// Built-in families
// ---------------------------------------------------------------------------

std::vector<std::string> builtin_model_families() {
  return {"identity", "threshold-graphon", "heterogeneous-sis"};
}

namespace {

FiniteMetricSpace binary_space(const std::string& l0, const std::string& l1) {
  return FiniteMetricSpace{{l0, l1}, {{0.0, 1.0}, {1.0, 0.0}}};
}

std::string family_list() {
  std::string out;
  for (const auto& f : builtin_model_families()) {
    if (!out.empty()) out += ", ";
    out += f;
  }
  return out;
}

// Normalized interaction weights: w[b][b'] = G[b][b'] / (sum_b'' G[b][b'']/K),
// so that a fully active population yields statistic 1 for every block.
std::vector<std::vector<double>> normalized_kernel(const std::vector<std::vector<double>>& G) {
  const int K = static_cast<int>(G.size());
  std::vector<std::vector<double>> w(K, std::vector<double>(K));
  for (int b = 0; b < K; ++b) {
    double row = 0.0;
    for (int b2 = 0; b2 < K; ++b2) row += G[b][b2];
    require(row > 0.0, "graphon rows must have positive mass");
    for (int b2 = 0; b2 < K; ++b2) w[b][b2] = G[b][b2] / (row / K);
  }
  return w;
}

double active_statistic(const std::vector<std::vector<double>>& w, int b,
                        const JointControlMeasure& m) {
  double s = 0.0;
  for (int b2 = 0; b2 < static_cast<int>(w.size()); ++b2) {
    double active = 0.0;
    for (int a = 0; a < m.n_actions; ++a) active += m.at(b2, 1, a);
    s += w[b][b2] * active;
  }
  return s;
}

void validate_common(const BuiltinModelConfig& cfg) {
  require(cfg.blocks >= 1, "block count must be positive");
  require(cfg.beta >= 0.0 && cfg.beta < 1.0, "discount factor must lie in [0, 1)");
  require(cfg.idio_levels >= 1, "idiosyncratic noise needs at least one level");
  require(cfg.common_shock_prob >= 0.0 && cfg.common_shock_prob <= 1.0,
          "common shock probability must lie in [0, 1]");
}

std::vector<std::vector<double>> kernel_or_default(const BuiltinModelConfig& cfg) {
  if (cfg.graphon.empty())
    return std::vector<std::vector<double>>(cfg.blocks, std::vector<double>(cfg.blocks, 1.0));
  require(static_cast<int>(cfg.graphon.size()) == cfg.blocks, "graphon must be K x K");
  for (const auto& row : cfg.graphon) {
    require(static_cast<int>(row.size()) == cfg.blocks, "graphon must be K x K");
    for (double v : row) require(std::isfinite(v) && v >= 0.0, "graphon entries must be >= 0");
  }
  return cfg.graphon;
}

std::vector<double> per_block_or_default(const std::vector<double>& given, int K, double def,
                                         const char* what) {
  if (given.empty()) return std::vector<double>(K, def);
  require(static_cast<int>(given.size()) == K, std::string(what) + " must have one entry per block");
  for (double v : given)
    require(std::isfinite(v) && v >= 0.0, std::string(what) + " entries must be >= 0");
  return given;
}

NoiseSpec make_noise(int levels, double shock_prob) {
  NoiseSpec n;
  n.idio.probs.assign(levels, 1.0 / levels);
  n.common.probs = {1.0 - shock_prob, shock_prob};
  return n;
}

ModelSpec make_threshold_graphon(const BuiltinModelConfig& cfg) {
  validate_common(cfg);
  const int K = cfg.blocks;
  const auto G = kernel_or_default(cfg);
  const auto w = normalized_kernel(G);
  const auto rw = per_block_or_default(cfg.reward_weight, K, 1.0, "reward_weight");
  require(cfg.gain >= 0.0 && cfg.push >= 0.0 && cfg.inertia >= 0.0, "rates must be >= 0");
  require(cfg.common_damp >= 0.0 && cfg.common_damp <= 1.0, "common_damp must lie in [0, 1]");
  require(cfg.reward_statistic >= 0.0 && cfg.action_cost >= 0.0, "reward terms must be >= 0");

  const int L = cfg.idio_levels;
  const double rs = cfg.reward_statistic;
  const double ac = cfg.action_cost;
  double rw_max = 0.0;
  for (double v : rw) rw_max = std::max(rw_max, v);

  ModelSpec m;
  m.family = "threshold-graphon";
  m.state = binary_space("s0", "s1");
  m.action = binary_space("a0", "a1");
  m.labels = LabelGrid{K};
  m.noise = make_noise(L, cfg.common_shock_prob);
  m.beta = cfg.beta;
  m.reward_bound = rw_max + rs + ac;
  const double base = cfg.base_rate, gain = cfg.gain, thr = cfg.threshold, push = cfg.push,
               inertia = cfg.inertia, damp = cfg.common_damp;
  m.F = [w, base, gain, thr, push, inertia, damp, L](int b, int x, int a,
                                                     const JointControlMeasure& mm, int e, int e0) {
    const double s = active_statistic(w, b, mm);
    double r = base + gain * (s - thr) + push * (a == 1 ? 1.0 : 0.0) +
               inertia * (x == 1 ? 1.0 : 0.0);
    r = std::clamp(r, 0.0, 1.0);
    if (e0 == 1) r *= damp;
    const double u = (e + 0.5) / L;
    return u < r ? 1 : 0;
  };
  m.f = [w, rw, rs, ac](int b, int x, int a, const JointControlMeasure& mm) {
    const double s = active_statistic(w, b, mm);
    return rw[b] * (x == 1 ? 1.0 : 0.0) + rs * s - ac * (a == 1 ? 1.0 : 0.0);
  };
  return m;
}

ModelSpec make_heterogeneous_sis(const BuiltinModelConfig& cfg) {
  validate_common(cfg);
  const int K = cfg.blocks;
  const auto G = kernel_or_default(cfg);
  const auto w = normalized_kernel(G);
  const auto rho = per_block_or_default(cfg.susceptibility, K, 0.8, "susceptibility");
  const auto loss = per_block_or_default(cfg.infection_loss, K, 1.0, "infection_loss");
  require(cfg.recovery >= 0.0 && cfg.recovery <= 1.0, "recovery must lie in [0, 1]");
  require(cfg.distancing_factor >= 0.0 && cfg.distancing_factor <= 1.0,
          "distancing_factor must lie in [0, 1]");
  require(cfg.outbreak_factor >= 0.0, "outbreak_factor must be >= 0");
  require(cfg.distancing_cost >= 0.0, "distancing_cost must be >= 0");

  const int L = cfg.idio_levels;
  double loss_max = 0.0;
  for (double v : loss) loss_max = std::max(loss_max, v);

  ModelSpec m;
  m.family = "heterogeneous-sis";
  m.state = binary_space("S", "I");
  m.action = binary_space("a0", "a1");
  m.labels = LabelGrid{K};
  m.noise = make_noise(L, cfg.common_shock_prob);
  m.beta = cfg.beta;
  m.reward_bound = loss_max + cfg.distancing_cost;
  const double rec = cfg.recovery, eta = cfg.distancing_factor, phi = cfg.outbreak_factor,
               dc = cfg.distancing_cost;
  m.F = [w, rho, rec, eta, phi, L](int b, int x, int a, const JointControlMeasure& mm, int e,
                                   int e0) {
    const double u = (e + 0.5) / L;
    if (x == 1) return u < rec ? 0 : 1;
    const double sI = active_statistic(w, b, mm);
    const double p =
        std::clamp(rho[b] * (a == 1 ? eta : 1.0) * (e0 == 1 ? phi : 1.0) * sI, 0.0, 1.0);
    return u < p ? 1 : 0;
  };
  m.f = [loss, dc](int b, int x, int a, const JointControlMeasure&) {
    return -(loss[b] * (x == 1 ? 1.0 : 0.0) + dc * (a == 1 ? 1.0 : 0.0));
  };
  return m;
}

ModelSpec make_identity(const BuiltinModelConfig& cfg) {
  validate_common(cfg);
  require(std::isfinite(cfg.reward_constant), "reward constant must be finite");
  ModelSpec m;
  m.family = "identity";
  m.state = binary_space("s0", "s1");
  m.action = binary_space("a0", "a1");
  m.labels = LabelGrid{cfg.blocks};
  m.noise = make_noise(1, 0.0);
  m.noise.common.probs = {1.0};
  m.beta = cfg.beta;
  m.reward_bound = std::fabs(cfg.reward_constant);
  const double c = cfg.reward_constant;
  m.F = [](int, int x, int, const JointControlMeasure&, int, int) { return x; };
  m.f = [c](int, int, int, const JointControlMeasure&) { return c; };
  // Keeping the state is an isometry of the state coordinate: slope exactly 1.
  m.lip_F = 1.0;
  m.lip_f = 0.0;
  return m;
}

}  // namespace

ModelSpec make_builtin_model(const BuiltinModelConfig& cfg) {
  if (cfg.family == "identity") return make_identity(cfg);
  if (cfg.family == "threshold-graphon") return make_threshold_graphon(cfg);
  if (cfg.family == "heterogeneous-sis") return make_heterogeneous_sis(cfg);
  throw std::invalid_argument("model: unknown family '" + cfg.family +
                              "'; available families: " + family_list());
}

NAgentSpec make_builtin_nagent(const BuiltinModelConfig& cfg, const std::string& variant, int N) {
  require(N >= 1, "population size must be positive");
  if (variant == "same") {
    const ModelSpec base = make_builtin_model(cfg);
    NAgentSpec out = nagent_from_model(base);
    return out;
  }
  if (variant == "perturbed-graphon") {
    require(cfg.family == "threshold-graphon",
            "variant 'perturbed-graphon' requires the threshold-graphon family");
    BuiltinModelConfig shifted = cfg;
    shifted.graphon = kernel_or_default(cfg);
    for (auto& row : shifted.graphon)
      for (double& v : row) v += cfg.kernel_shift / N;
    const ModelSpec pert = make_builtin_model(shifted);
    NAgentSpec out = nagent_from_model(pert);
    out.variant = "perturbed-graphon";
    return out;
  }
  throw std::invalid_argument("model: unknown N-agent variant '" + variant +
                              "'; available variants: same, perturbed-graphon");
}

double graphon_lipschitz_bound(const BuiltinModelConfig& cfg, double denom_floor) {
  require(cfg.family == "threshold-graphon", "closed-form bound covers the threshold-graphon family");
  require(denom_floor > 0.0, "denominator floor must be positive");
  const int K = cfg.blocks;
  const auto w = normalized_kernel(kernel_or_default(cfg));
  const auto rw = per_block_or_default(cfg.reward_weight, K, 1.0, "reward_weight");

  // Slope of the statistic s(b, .): over the label (block representatives),
  // over the measure (Kantorovich dual of the integrand), and the row maxima.
  double w_max = 0.0;
  for (const auto& row : w)
    for (double v : row) w_max = std::max(w_max, v);
  double s_label_slope = 0.0;  // statistic change across blocks per label distance
  for (int b1 = 0; b1 < K; ++b1)
    for (int b2 = b1 + 1; b2 < K; ++b2) {
      double num = 0.0;
      for (int b3 = 0; b3 < K; ++b3) num += std::fabs(w[b1][b3] - w[b2][b3]) / K;
      s_label_slope = std::max(s_label_slope, num / (static_cast<double>(b2 - b1) / K));
    }
  double s_measure_slope = 0.0;  // Lipschitz bound for u' -> w[b][block(u')] 1{x'=active}
  for (int b = 0; b < K; ++b) {
    double lip = w_max;  // state switch at unit distance
    for (int b1 = 0; b1 < K; ++b1)
      for (int b2 = b1 + 1; b2 < K; ++b2)
        lip = std::max(lip, std::fabs(w[b][b1] - w[b][b2]) / (static_cast<double>(b2 - b1) / K));
    s_measure_slope = std::max(s_measure_slope, lip);
  }

  double rw_max = 0.0, rw_label_slope = 0.0;
  for (double v : rw) rw_max = std::max(rw_max, v);
  for (int b1 = 0; b1 < K; ++b1)
    for (int b2 = b1 + 1; b2 < K; ++b2)
      rw_label_slope =
          std::max(rw_label_slope, std::fabs(rw[b1] - rw[b2]) / (static_cast<double>(b2 - b1) / K));

  const double rs = cfg.reward_statistic;
  const double f_slope = std::max({rw_label_slope + rs * s_label_slope,  // label
                                   rw_max,                               // state (unit distance)
                                   cfg.action_cost,                      // action (unit distance)
                                   rs * s_measure_slope});               // measure
  const double r_slope = std::max({cfg.gain * s_label_slope,  // label through the statistic
                                   cfg.inertia,               // state
                                   cfg.push,                  // action
                                   cfg.gain * s_measure_slope});
  // The activation comparison against idio_levels quantiles adds at most one
  // 1/L step per pair, which the estimator can observe against denominators
  // down to denom_floor.
  const double F_slope = r_slope + (1.0 / cfg.idio_levels) / denom_floor;
  return std::max(f_slope, F_slope);
}

}  // namespace cnemf
