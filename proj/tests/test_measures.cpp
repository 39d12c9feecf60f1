#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cnemf/measures.hpp"
#include "cnemf/rng.hpp"
#include "cnemf/transport.hpp"

using namespace cnemf;

namespace {

FiniteMetricSpace discrete_space(int n) {
  FiniteMetricSpace s;
  s.labels.resize(n);
  s.dist.assign(n, std::vector<double>(n, 1.0));
  for (int i = 0; i < n; ++i) {
    s.labels[i] = "x" + std::to_string(i);
    s.dist[i][i] = 0.0;
  }
  return s;
}

JointControlMeasure random_joint(int K, int X, int A, RngStream& rng) {
  JointControlMeasure a;
  a.grid = LabelGrid{K};
  a.n_states = X;
  a.n_actions = A;
  a.w.assign(static_cast<std::size_t>(K) * X * A, 0.0);
  for (int b = 0; b < K; ++b) {
    double s = 0.0;
    std::vector<double> cell(X * A);
    for (double& v : cell) {
      v = rng.uniform01() + 1e-3;
      s += v;
    }
    int i = 0;
    for (int x = 0; x < X; ++x)
      for (int ac = 0; ac < A; ++ac) a.at(b, x, ac) = cell[i++] / (s * K);
  }
  return a;
}

}  // namespace

TEST_CASE("single-agent empirical lifting is a point mass in one block") {
  const LiftedMeasure mu = make_empirical_lifted({1}, 2);
  CHECK(mu.blocks() == 1);
  CHECK(mu.rows[0][0] == doctest::Approx(0.0));
  CHECK(mu.rows[0][1] == doctest::Approx(1.0));
  CHECK(mu.rows_normalized());
}

TEST_CASE("two-agent atomic empirical carries half mass at each canonical label") {
  const AtomicMeasure nu = make_empirical_atoms(canonical_labels(2), {0, 1});
  REQUIRE(nu.size() == 2);
  CHECK(nu.atoms[0].label == doctest::Approx(0.5));
  CHECK(nu.atoms[0].state == 0);
  CHECK(nu.atoms[1].label == doctest::Approx(1.0));
  CHECK(nu.atoms[1].state == 1);
  CHECK_FALSE(nu.atoms[0].action.has_value());
}

TEST_CASE("canonical labels are i/N") {
  const std::vector<double> l = canonical_labels(4);
  REQUIRE(l.size() == 4);
  CHECK(l[0] == doctest::Approx(0.25));
  CHECK(l[3] == doctest::Approx(1.0));
}

TEST_CASE("agent blocks follow the canonical labels") {
  // N = 6 agents, K = 3 blocks: agents {0,1} -> block 0, {2,3} -> 1, {4,5} -> 2.
  for (int i = 0; i < 6; ++i) CHECK(agent_block(i, 6, 3) == i / 2);
  // Mismatched K still assigns by label position.
  LabelGrid g{3};
  for (int i = 0; i < 5; ++i) CHECK(agent_block(i, 5, 3) == g.block_of((i + 1) / 5.0));
}

TEST_CASE("lifted and atomic empiricals of two distinct states are 1/(2N) apart") {
  // N = 2, distinct states at unit distance: the lifted measure spreads each
  // agent over a length-1/2 label segment while the atomic one sits at the
  // right endpoint, so the optimal transport moves mass an average of 1/4.
  const FiniteMetricSpace state = discrete_space(2);
  const double w = w1_lifted_empirical_atomic({0, 1}, {0, 1}, state);
  CHECK(w == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("disintegration of a product measure recovers the kernel") {
  LabelGrid grid{2};
  JointControlMeasure a;
  a.grid = grid;
  a.n_states = 2;
  a.n_actions = 2;
  a.w.assign(8, 0.0);
  // Uniform label-state marginal, block-dependent action kernel.
  for (int b = 0; b < 2; ++b)
    for (int x = 0; x < 2; ++x) {
      const double pa1 = (b == 0) ? 0.25 : 0.75;
      a.at(b, x, 0) = 0.25 * (1.0 - pa1);
      a.at(b, x, 1) = 0.25 * pa1;
    }
  const Disintegration d = disintegrate(a);
  for (int b = 0; b < 2; ++b)
    for (int x = 0; x < 2; ++x) {
      CHECK(d.marginal.rows[b][x] == doctest::Approx(0.5));
      CHECK(d.kernel.at(b, x, 1) == doctest::Approx(b == 0 ? 0.25 : 0.75));
    }
}

TEST_CASE("disintegration fills zero-mass cells with the uniform kernel") {
  LabelGrid grid{1};
  JointControlMeasure a;
  a.grid = grid;
  a.n_states = 2;
  a.n_actions = 3;
  a.w.assign(6, 0.0);
  a.at(0, 0, 2) = 1.0;  // all mass on (x=0, a=2); state 1 never appears
  const Disintegration d = disintegrate(a);
  CHECK(d.marginal.rows[0][0] == doctest::Approx(1.0));
  CHECK(d.kernel.at(0, 0, 2) == doctest::Approx(1.0));
  for (int ac = 0; ac < 3; ++ac) CHECK(d.kernel.at(0, 1, ac) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("compose after disintegrate is the identity on joint measures") {
  RngStream rng(21, "measures-roundtrip");
  for (int trial = 0; trial < 30; ++trial) {
    const JointControlMeasure a = random_joint(2, 2, 2, rng);
    const Disintegration d = disintegrate(a);
    const JointControlMeasure back = compose_kernel(d.marginal, d.kernel);
    for (std::size_t i = 0; i < a.w.size(); ++i)
      CHECK(back.w[i] == doctest::Approx(a.w[i]).epsilon(1e-12));
  }
}

TEST_CASE("kernel composition spreads deterministic kernels as point rows") {
  LabelGrid grid{2};
  LiftedMeasure mu{grid, {{0.5, 0.5}, {1.0, 0.0}}};
  PolicyKernel k;
  k.n_blocks = 2;
  k.n_states = 2;
  k.n_actions = 2;
  k.p.assign(8, 0.0);
  k.at(0, 0, 0) = 1.0;
  k.at(0, 1, 1) = 1.0;
  k.at(1, 0, 1) = 1.0;
  k.at(1, 1, 0) = 1.0;
  const JointControlMeasure a = compose_kernel(mu, k);
  CHECK(a.at(0, 0, 0) == doctest::Approx(0.25));
  CHECK(a.at(0, 0, 1) == doctest::Approx(0.0));
  CHECK(a.at(0, 1, 1) == doctest::Approx(0.25));
  CHECK(a.at(1, 0, 1) == doctest::Approx(0.5));
  CHECK(a.at(1, 1, 0) == doctest::Approx(0.0));
  CHECK(a.total_mass() == doctest::Approx(1.0));
  // Marginalizing out the action recovers mu.
  const LiftedMeasure m = a.marginal_label_state();
  for (int b = 0; b < 2; ++b)
    for (int x = 0; x < 2; ++x) CHECK(m.rows[b][x] == doctest::Approx(mu.rows[b][x]));
}

TEST_CASE("coupling projection replaces the marginal and is idempotent") {
  RngStream rng(22, "measures-project");
  for (int trial = 0; trial < 20; ++trial) {
    const JointControlMeasure a = random_joint(2, 3, 2, rng);
    LiftedMeasure mu{LabelGrid{2}, {}};
    mu.rows.assign(2, std::vector<double>(3, 0.0));
    for (int b = 0; b < 2; ++b) {
      double s = 0.0;
      for (int x = 0; x < 3; ++x) {
        mu.rows[b][x] = rng.uniform01() + 0.01;
        s += mu.rows[b][x];
      }
      for (int x = 0; x < 3; ++x) mu.rows[b][x] /= s;
    }
    const JointControlMeasure proj = coupling_project(mu, a);
    const LiftedMeasure pm = proj.marginal_label_state();
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 3; ++x)
        CHECK(pm.rows[b][x] == doctest::Approx(mu.rows[b][x]).epsilon(1e-12));
    // Projecting twice equals projecting once, cell for cell.
    const JointControlMeasure twice = coupling_project(mu, proj);
    for (std::size_t i = 0; i < proj.w.size(); ++i) CHECK(twice.w[i] == proj.w[i]);
    // The action kernel is preserved wherever a has mass.
    const Disintegration da = disintegrate(a);
    const Disintegration dp = disintegrate(proj);
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 3; ++x)
        for (int ac = 0; ac < 2; ++ac)
          CHECK(dp.kernel.at(b, x, ac) == doctest::Approx(da.kernel.at(b, x, ac)).epsilon(1e-9));
  }
}

TEST_CASE("projection onto a matching marginal returns the input unchanged") {
  RngStream rng(23, "measures-project-id");
  const JointControlMeasure a = random_joint(3, 2, 2, rng);
  const JointControlMeasure proj = coupling_project(a.marginal_label_state(), a);
  for (std::size_t i = 0; i < a.w.size(); ++i) CHECK(proj.w[i] == a.w[i]);
}

TEST_CASE("block aggregation averages consecutive rows") {
  LiftedMeasure mu{LabelGrid{4}, {{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}}};
  const LiftedMeasure agg = aggregate_blocks(mu, 2);
  CHECK(agg.blocks() == 2);
  CHECK(agg.rows[0][0] == doctest::Approx(1.0));
  CHECK(agg.rows[1][1] == doctest::Approx(1.0));

  LiftedMeasure mix{LabelGrid{2}, {{1.0, 0.0}, {0.0, 1.0}}};
  const LiftedMeasure one = aggregate_blocks(mix, 1);
  CHECK(one.rows[0][0] == doctest::Approx(0.5));
  CHECK(one.rows[0][1] == doctest::Approx(0.5));
}

TEST_CASE("aggregation to the same block count is the identity") {
  RngStream rng(24, "measures-agg-id");
  const JointControlMeasure a = random_joint(3, 2, 2, rng);
  const JointControlMeasure same = aggregate_blocks(a, 3);
  for (std::size_t i = 0; i < a.w.size(); ++i) CHECK(same.w[i] == doctest::Approx(a.w[i]));
  const JointControlMeasure down = aggregate_blocks(a, 1);
  CHECK(down.total_mass() == doctest::Approx(1.0));
  CHECK(down.block_mass(0) == doctest::Approx(1.0));
}

TEST_CASE("empirical lifting then aggregation matches block-frequency rows") {
  // Six agents, K = 3: each aggregated row is the state frequency of its pair.
  const std::vector<int> xs{0, 1, 1, 1, 0, 0};
  const LiftedMeasure mu = aggregate_blocks(make_empirical_lifted(xs, 2), 3);
  CHECK(mu.rows[0][0] == doctest::Approx(0.5));
  CHECK(mu.rows[0][1] == doctest::Approx(0.5));
  CHECK(mu.rows[1][1] == doctest::Approx(1.0));
  CHECK(mu.rows[2][0] == doctest::Approx(1.0));
}

TEST_CASE("empirical lifting with actions places full block mass on the pair") {
  const JointControlMeasure a = make_empirical_lifted({0, 1}, {1, 0}, 2, 2);
  CHECK(a.blocks() == 2);
  CHECK(a.at(0, 0, 1) == doctest::Approx(0.5));
  CHECK(a.at(1, 1, 0) == doctest::Approx(0.5));
  CHECK(a.total_mass() == doctest::Approx(1.0));
}
