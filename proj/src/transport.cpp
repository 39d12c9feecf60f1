#include "cnemf/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>

#include "cnemf/rng.hpp"

namespace cnemf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassEps = 1e-15;    // residual supply/demand below this counts as settled
constexpr double kFlowEps = 1e-16;    // arc flows below this are snapped to zero
constexpr double kBalanceTol = 1e-9;  // required agreement of total masses

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("transport: " + msg);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Min-heap entry with deterministic tie-breaking on node index.
struct HeapItem {
  double dist;
  int node;
  bool operator>(const HeapItem& o) const {
    if (dist != o.dist) return dist > o.dist;
    return node > o.node;
  }
};

using MinHeap = std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<HeapItem>>;

}  // namespace

double DiscreteMeasure::total_mass() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

FiniteMetricSpace product_metric_space(const FiniteMetricSpace& a, const FiniteMetricSpace& b) {
  FiniteMetricSpace out;
  const int na = a.size(), nb = b.size();
  out.labels.reserve(static_cast<std::size_t>(na) * nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) out.labels.push_back(a.labels[i] + "," + b.labels[j]);
  out.dist.assign(static_cast<std::size_t>(na) * nb,
                  std::vector<double>(static_cast<std::size_t>(na) * nb, 0.0));
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      for (int k = 0; k < na; ++k)
        for (int l = 0; l < nb; ++l)
          out.dist[i * nb + j][k * nb + l] = a.d(i, k) + b.d(j, l);
  return out;
}

double TransportPlan::marginal_error(const std::vector<double>& source_w,
                                     const std::vector<double>& target_w) const {
  const int m = static_cast<int>(source_w.size());
  const int n = static_cast<int>(target_w.size());
  double worst = 0.0;
  std::vector<double> col(n, 0.0);
  for (int i = 0; i < m; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      row += flow[i][j];
      col[j] += flow[i][j];
    }
    worst = std::max(worst, std::fabs(row - source_w[i]));
  }
  for (int j = 0; j < n; ++j) worst = std::max(worst, std::fabs(col[j] - target_w[j]));
  return worst;
}

TransportResult solve_transportation(const std::vector<double>& supply,
                                     const std::vector<double>& demand,
                                     const std::vector<std::vector<double>>& cost) {
  const int m = static_cast<int>(supply.size());
  const int n = static_cast<int>(demand.size());
  require(m > 0 && n > 0, "empty marginals");
  require(static_cast<int>(cost.size()) == m, "cost row count mismatch");
  double s_tot = 0.0, t_tot = 0.0;
  for (double v : supply) {
    require(std::isfinite(v) && v >= 0.0, "negative or non-finite supply");
    s_tot += v;
  }
  for (double v : demand) {
    require(std::isfinite(v) && v >= 0.0, "negative or non-finite demand");
    t_tot += v;
  }
  require(std::fabs(s_tot - t_tot) <= kBalanceTol,
          "unbalanced masses: " + fmt_double(s_tot) + " vs " + fmt_double(t_tot));
  for (int i = 0; i < m; ++i) {
    require(static_cast<int>(cost[i].size()) == n, "cost column count mismatch");
    for (int j = 0; j < n; ++j)
      require(std::isfinite(cost[i][j]) && cost[i][j] >= 0.0, "negative or non-finite cost");
  }

  const int V = m + n;
  std::vector<std::vector<double>> flow(m, std::vector<double>(n, 0.0));
  std::vector<double> pot(V, 0.0), rs(supply), rd(demand);
  std::vector<double> dist(V);
  std::vector<int> parent(V);
  std::vector<char> done(V);

  const long max_iters = 10L * V + 100;
  long iters = 0;
  while (true) {
    double remaining = 0.0;
    for (double v : rd) remaining += v;
    if (remaining <= 1e-12) break;
    require(++iters <= max_iters, "augmentation limit exceeded (numerical stall)");

    // Multi-source Dijkstra on the residual network under reduced costs.
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    MinHeap heap;
    for (int i = 0; i < m; ++i)
      if (rs[i] > 0.0) {
        dist[i] = 0.0;
        heap.push({0.0, i});
      }
    int target = -1;
    while (!heap.empty()) {
      const HeapItem top = heap.top();
      heap.pop();
      const int v = top.node;
      if (done[v]) continue;
      done[v] = 1;
      if (v >= m && rd[v - m] > 0.0) {
        target = v;
        break;
      }
      if (v < m) {
        for (int j = 0; j < n; ++j) {
          const int w = m + j;
          if (done[w]) continue;
          const double rc = std::max(0.0, cost[v][j] + pot[v] - pot[w]);
          const double nd = dist[v] + rc;
          if (nd < dist[w]) {
            dist[w] = nd;
            parent[w] = v;
            heap.push({nd, w});
          }
        }
      } else {
        const int j = v - m;
        for (int i = 0; i < m; ++i) {
          if (done[i] || flow[i][j] <= 0.0) continue;
          const double rc = std::max(0.0, -cost[i][j] + pot[v] - pot[i]);
          const double nd = dist[v] + rc;
          if (nd < dist[i]) {
            dist[i] = nd;
            parent[i] = v;
            heap.push({nd, i});
          }
        }
      }
    }
    require(target >= 0, "no augmenting path (internal inconsistency)");
    const double reach = dist[target];
    for (int v = 0; v < V; ++v) pot[v] += std::min(dist[v], reach);

    // Walk back to the seeding source, collect the path, find the bottleneck.
    std::vector<int> path;  // node sequence target ... source
    for (int v = target; v != -1; v = parent[v]) path.push_back(v);
    const int src = path.back();
    double delta = std::min(rs[src], rd[target - m]);
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const int to = path[k], from = path[k + 1];
      if (from >= m) delta = std::min(delta, flow[to][from - m]);  // cancelling arc
    }
    if (delta < kFlowEps) {
      // Numerical stall: drop the vanishing flows that cap the path and retry.
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const int to = path[k], from = path[k + 1];
        if (from >= m && flow[to][from - m] < kFlowEps) flow[to][from - m] = 0.0;
      }
      continue;
    }
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const int to = path[k], from = path[k + 1];
      if (from < m) {
        flow[from][to - m] += delta;
      } else {
        flow[to][from - m] -= delta;
        if (flow[to][from - m] < kFlowEps) flow[to][from - m] = 0.0;
      }
    }
    rs[src] -= delta;
    rd[target - m] -= delta;
    if (rs[src] < kMassEps) rs[src] = 0.0;
    if (rd[target - m] < kMassEps) rd[target - m] = 0.0;
  }

  TransportResult out;
  out.plan.flow = std::move(flow);
  double value = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) value += out.plan.flow[i][j] * cost[i][j];
  out.plan.objective = value;
  out.value = value;
  out.phi_mu.resize(m);
  out.phi_nu.resize(n);
  for (int i = 0; i < m; ++i) out.phi_mu[i] = -pot[i];
  for (int j = 0; j < n; ++j) out.phi_nu[j] = -pot[m + j];
  return out;
}

namespace {

double product_cost(double u1, int c1, double u2, int c2, const FiniteMetricSpace& metric) {
  return std::fabs(u1 - u2) + metric.d(c1, c2);
}

void check_measure(const DiscreteMeasure& mu, const FiniteMetricSpace& metric,
                   const char* which) {
  require(mu.size() > 0, std::string(which) + ": empty support");
  require(mu.labels.size() == mu.weights.size() && mu.comps.size() == mu.weights.size(),
          std::string(which) + ": ragged component arrays");
  for (int i = 0; i < mu.size(); ++i) {
    require(std::isfinite(mu.labels[i]), std::string(which) + ": non-finite label");
    require(mu.comps[i] >= 0 && mu.comps[i] < metric.size(),
            std::string(which) + ": comp index out of range");
    require(std::isfinite(mu.weights[i]) && mu.weights[i] >= 0.0,
            std::string(which) + ": negative weight");
  }
}

}  // namespace

TransportResult w1_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                            const FiniteMetricSpace& comp_metric) {
  check_measure(mu, comp_metric, "mu");
  check_measure(nu, comp_metric, "nu");
  const int m = mu.size(), n = nu.size();
  std::vector<std::vector<double>> cost(m, std::vector<double>(n));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      cost[i][j] = product_cost(mu.labels[i], mu.comps[i], nu.labels[j], nu.comps[j], comp_metric);
  TransportResult res = solve_transportation(mu.weights, nu.weights, cost);

  // Replace the raw solver potentials by their c-transform against nu's
  // support: phi(p) = min_j { c(p, y_j) + phi(y_j) }.  This keeps the optimal
  // duality pairing but makes phi 1-Lipschitz on the whole product space and
  // single-valued at coincident support points.
  std::vector<double> base = res.phi_nu;
  auto transform = [&](double label, int comp) {
    double best = kInf;
    for (int j = 0; j < n; ++j) {
      if (nu.weights[j] <= 0.0) continue;
      best = std::min(best, product_cost(label, comp, nu.labels[j], nu.comps[j], comp_metric) +
                                base[j]);
    }
    return best;
  };
  bool any_mass = false;
  for (int j = 0; j < n; ++j) any_mass = any_mass || nu.weights[j] > 0.0;
  if (any_mass) {
    for (int i = 0; i < m; ++i) res.phi_mu[i] = transform(mu.labels[i], mu.comps[i]);
    for (int j = 0; j < n; ++j) res.phi_nu[j] = transform(nu.labels[j], nu.comps[j]);
  }
  return res;
}

double duality_certificate(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const std::vector<double>& phi_mu, const std::vector<double>& phi_nu,
                           const FiniteMetricSpace& comp_metric, double tol) {
  check_measure(mu, comp_metric, "mu");
  check_measure(nu, comp_metric, "nu");
  require(static_cast<int>(phi_mu.size()) == mu.size(), "phi_mu size mismatch");
  require(static_cast<int>(phi_nu.size()) == nu.size(), "phi_nu size mismatch");

  std::vector<double> labels(mu.labels), phis(phi_mu);
  std::vector<int> comps(mu.comps);
  labels.insert(labels.end(), nu.labels.begin(), nu.labels.end());
  comps.insert(comps.end(), nu.comps.begin(), nu.comps.end());
  phis.insert(phis.end(), phi_nu.begin(), phi_nu.end());
  const int total = static_cast<int>(labels.size());
  for (int i = 0; i < total; ++i)
    for (int j = i + 1; j < total; ++j) {
      const double c = product_cost(labels[i], comps[i], labels[j], comps[j], comp_metric);
      const double gap = std::fabs(phis[i] - phis[j]) - c;
      if (gap > tol) {
        throw std::domain_error(
            "duality_certificate: potential violates the 1-Lipschitz constraint by " +
            fmt_double(gap) + " on a support pair at distance " + fmt_double(c));
      }
    }
  double bound = 0.0;
  for (int i = 0; i < mu.size(); ++i) bound += phi_mu[i] * mu.weights[i];
  for (int j = 0; j < nu.size(); ++j) bound -= phi_nu[j] * nu.weights[j];
  return bound;
}

// ---------------------------------------------------------------------------
// Line-network solver
// ---------------------------------------------------------------------------

double w1_product_line(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                       const FiniteMetricSpace& comp_metric) {
  check_measure(mu, comp_metric, "mu");
  check_measure(nu, comp_metric, "nu");
  require(std::fabs(mu.total_mass() - nu.total_mass()) <= kBalanceTol, "unbalanced masses");
  const int S = comp_metric.size();

  std::vector<double> positions(mu.labels);
  positions.insert(positions.end(), nu.labels.begin(), nu.labels.end());
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  const int P = static_cast<int>(positions.size());
  const int V = P * S;

  auto pos_index = [&](double label) {
    return static_cast<int>(std::lower_bound(positions.begin(), positions.end(), label) -
                            positions.begin());
  };
  std::vector<double> net(V, 0.0);
  for (int i = 0; i < mu.size(); ++i) net[pos_index(mu.labels[i]) * S + mu.comps[i]] += mu.weights[i];
  for (int j = 0; j < nu.size(); ++j) net[pos_index(nu.labels[j]) * S + nu.comps[j]] -= nu.weights[j];

  // Undirected edges: consecutive positions per comp, comp switches per position.
  struct LineEdge {
    int a, b;
    double cost;
  };
  std::vector<LineEdge> edges;
  edges.reserve(static_cast<std::size_t>(P) * S + static_cast<std::size_t>(P) * S * S / 2);
  for (int p = 0; p + 1 < P; ++p)
    for (int c = 0; c < S; ++c)
      edges.push_back({p * S + c, (p + 1) * S + c, positions[p + 1] - positions[p]});
  for (int p = 0; p < P; ++p)
    for (int c = 0; c < S; ++c)
      for (int c2 = c + 1; c2 < S; ++c2)
        edges.push_back({p * S + c, p * S + c2, comp_metric.d(c, c2)});
  const int E = static_cast<int>(edges.size());
  std::vector<double> eflow(E, 0.0);  // signed, positive a -> b

  std::vector<std::vector<std::pair<int, int>>> adj(V);  // (edge id, direction +1/-1)
  for (int e = 0; e < E; ++e) {
    adj[edges[e].a].push_back({e, +1});
    adj[edges[e].b].push_back({e, -1});
  }

  std::vector<double> pot(V, 0.0), dist(V);
  std::vector<int> parent_edge(V), parent_node(V);
  std::vector<char> done(V);

  const long max_iters = 10L * V + 1000;
  long iters = 0;
  while (true) {
    double excess_total = 0.0;
    for (double v : net) excess_total += std::max(0.0, v);
    if (excess_total <= 1e-12) break;
    require(++iters <= max_iters, "line solver augmentation limit exceeded");

    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    std::fill(parent_edge.begin(), parent_edge.end(), -1);
    std::fill(parent_node.begin(), parent_node.end(), -1);
    MinHeap heap;
    for (int v = 0; v < V; ++v)
      if (net[v] > kMassEps) {
        dist[v] = 0.0;
        heap.push({0.0, v});
      }
    int target = -1;
    while (!heap.empty()) {
      const HeapItem top = heap.top();
      heap.pop();
      const int v = top.node;
      if (done[v]) continue;
      done[v] = 1;
      if (net[v] < -kMassEps) {
        target = v;
        break;
      }
      for (const auto& [e, dir] : adj[v]) {
        const int w = dir > 0 ? edges[e].b : edges[e].a;
        if (done[w]) continue;
        const double signed_flow = eflow[e] * dir;
        const double arc_cost = signed_flow < -kFlowEps ? -edges[e].cost : edges[e].cost;
        const double rc = std::max(0.0, arc_cost + pot[v] - pot[w]);
        const double nd = dist[v] + rc;
        if (nd < dist[w]) {
          dist[w] = nd;
          parent_edge[w] = e;
          parent_node[w] = v;
          heap.push({nd, w});
        }
      }
    }
    require(target >= 0, "line solver found no augmenting path");
    const double reach = dist[target];
    for (int v = 0; v < V; ++v) pot[v] += std::min(dist[v], reach);

    std::vector<int> path_nodes{target};
    while (parent_node[path_nodes.back()] != -1) path_nodes.push_back(parent_node[path_nodes.back()]);
    const int src = path_nodes.back();
    double delta = std::min(net[src], -net[target]);
    for (std::size_t k = 0; k + 1 < path_nodes.size(); ++k) {
      const int to = path_nodes[k];
      const int e = parent_edge[to];
      const int dir = edges[e].a == path_nodes[k + 1] ? +1 : -1;
      const double signed_flow = eflow[e] * dir;
      if (signed_flow < -kFlowEps) delta = std::min(delta, -signed_flow);  // cancellation cap
    }
    if (delta < kFlowEps) {
      for (std::size_t k = 0; k + 1 < path_nodes.size(); ++k) {
        const int e = parent_edge[path_nodes[k]];
        if (std::fabs(eflow[e]) < kFlowEps) eflow[e] = 0.0;
      }
      continue;
    }
    for (std::size_t k = 0; k + 1 < path_nodes.size(); ++k) {
      const int to = path_nodes[k];
      const int e = parent_edge[to];
      const int dir = edges[e].a == path_nodes[k + 1] ? +1 : -1;
      eflow[e] += dir * delta;
      if (std::fabs(eflow[e]) < kFlowEps) eflow[e] = 0.0;
    }
    net[src] -= delta;
    net[target] += delta;
    if (std::fabs(net[src]) < kMassEps) net[src] = 0.0;
    if (std::fabs(net[target]) < kMassEps) net[target] = 0.0;
  }

  double value = 0.0;
  for (int e = 0; e < E; ++e) value += std::fabs(eflow[e]) * edges[e].cost;
  return value;
}

// ---------------------------------------------------------------------------
// Assignment
// ---------------------------------------------------------------------------

double solve_assignment(const std::vector<std::vector<double>>& cost, std::vector<int>& row_to_col) {
  const int n = static_cast<int>(cost.size());
  row_to_col.assign(n, -1);
  if (n == 0) return 0.0;
  for (const auto& row : cost)
    require(static_cast<int>(row.size()) == n, "assignment matrix not square");

  // Shortest augmenting paths with potentials; 1-indexed auxiliary arrays.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    row_to_col[p[j] - 1] = j - 1;
    total += cost[p[j] - 1][j - 1];
  }
  return total;
}

PermutationResult optimal_permutation(const std::vector<CloudPoint>& xs,
                                      const std::vector<CloudPoint>& ys,
                                      const FiniteMetricSpace& comp_metric) {
  const int N = static_cast<int>(xs.size());
  require(static_cast<int>(ys.size()) == N, "clouds of different size");
  PermutationResult out;
  if (N == 0) return out;
  require(N <= 512, "cloud size beyond supported range");
  for (const auto& pt : xs) require(pt.comp >= 0 && pt.comp < comp_metric.size(), "comp range");
  for (const auto& pt : ys) require(pt.comp >= 0 && pt.comp < comp_metric.size(), "comp range");

  std::vector<std::vector<double>> cost(N, std::vector<double>(N));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      cost[i][j] = product_cost(xs[i].label, xs[i].comp, ys[j].label, ys[j].comp, comp_metric);
  std::vector<int> some;
  const double best = solve_assignment(cost, some);
  const double tie_tol = 1e-11 * (1.0 + std::fabs(best));

  // Greedy prefix fixing: for each row in order, take the smallest column that
  // still admits an optimal completion.  Yields the lexicographically smallest
  // optimal sigma.
  std::vector<int> sigma(N, -1);
  std::vector<char> used(N, 0);
  double fixed_cost = 0.0;
  for (int i = 0; i < N; ++i) {
    bool placed = false;
    for (int j = 0; j < N && !placed; ++j) {
      if (used[j]) continue;
      // Optimal completion over the remaining rows/columns.
      std::vector<int> cols;
      for (int c = 0; c < N; ++c)
        if (!used[c] && c != j) cols.push_back(c);
      const int r = static_cast<int>(cols.size());
      double completion = 0.0;
      if (r > 0) {
        std::vector<std::vector<double>> sub(r, std::vector<double>(r));
        for (int a = 0; a < r; ++a)
          for (int b = 0; b < r; ++b) sub[a][b] = cost[i + 1 + a][cols[b]];
        std::vector<int> tmp;
        completion = solve_assignment(sub, tmp);
      }
      if (fixed_cost + cost[i][j] + completion <= best + tie_tol) {
        sigma[i] = j;
        used[j] = 1;
        fixed_cost += cost[i][j];
        placed = true;
      }
    }
    require(placed, "lexicographic refinement failed to extend an optimal prefix");
  }
  out.sigma = std::move(sigma);
  double paired = 0.0;
  for (int i = 0; i < N; ++i) paired += cost[i][out.sigma[i]];
  out.cost = paired / N;
  return out;
}

// ---------------------------------------------------------------------------
// Lifted empirical vs atomic empirical
// ---------------------------------------------------------------------------

namespace {

// Integral of |u - v| du over [lo, hi].
double segment_label_integral(double lo, double hi, double v) {
  if (v <= lo) return (hi - lo) * ((lo + hi) / 2.0 - v);
  if (v >= hi) return (hi - lo) * (v - (lo + hi) / 2.0);
  return ((v - lo) * (v - lo) + (hi - v) * (hi - v)) / 2.0;
}

}  // namespace

double w1_lifted_empirical_atomic(const std::vector<int>& lifted_states,
                                  const std::vector<int>& atomic_states,
                                  const FiniteMetricSpace& state_metric) {
  const int N = static_cast<int>(lifted_states.size());
  require(N > 0, "empty configuration");
  require(static_cast<int>(atomic_states.size()) == N, "configuration sizes differ");
  for (int x : lifted_states) require(x >= 0 && x < state_metric.size(), "state range");
  for (int x : atomic_states) require(x >= 0 && x < state_metric.size(), "state range");

  // Per unit of mass: label cost of moving block segment i onto atom label
  // (j+1)/N, plus the state distance.
  std::vector<std::vector<double>> cost(N, std::vector<double>(N));
  for (int i = 0; i < N; ++i) {
    const double lo = static_cast<double>(i) / N;
    const double hi = static_cast<double>(i + 1) / N;
    for (int j = 0; j < N; ++j) {
      const double v = static_cast<double>(j + 1) / N;
      cost[i][j] =
          N * segment_label_integral(lo, hi, v) + state_metric.d(lifted_states[i], atomic_states[j]);
    }
  }
  std::vector<int> assignment;
  const double total = solve_assignment(cost, assignment);
  return total / N;
}

// ---------------------------------------------------------------------------
// Rate-constant estimation
// ---------------------------------------------------------------------------

DiscreteMeasure discretize_lifted(const LiftedMeasure& mu, double label_mesh) {
  require(label_mesh > 0.0, "label mesh must be positive");
  const int K = mu.blocks();
  const int S = mu.states();
  const double block_width = 1.0 / K;
  const int cells = std::max(1, static_cast<int>(std::ceil(block_width / label_mesh - 1e-12)));
  const double w = block_width / cells;
  DiscreteMeasure out;
  for (int b = 0; b < K; ++b)
    for (int c = 0; c < cells; ++c) {
      const double label = b * block_width + (c + 0.5) * w;
      for (int x = 0; x < S; ++x) {
        const double mass = mu.rows[b][x] / (K * static_cast<double>(cells));
        if (mass <= 0.0) continue;
        out.labels.push_back(label);
        out.comps.push_back(x);
        out.weights.push_back(mass);
      }
    }
  return out;
}

DiscreteMeasure lifted_at_representatives(const LiftedMeasure& mu) {
  DiscreteMeasure out;
  const int K = mu.blocks();
  for (int b = 0; b < K; ++b)
    for (int x = 0; x < mu.states(); ++x) {
      const double mass = mu.rows[b][x] / K;
      if (mass <= 0.0) continue;
      out.labels.push_back(mu.grid.representative(b));
      out.comps.push_back(x);
      out.weights.push_back(mass);
    }
  return out;
}

DiscreteMeasure joint_at_representatives(const JointControlMeasure& a) {
  DiscreteMeasure out;
  for (int b = 0; b < a.grid.K; ++b)
    for (int x = 0; x < a.n_states; ++x)
      for (int act = 0; act < a.n_actions; ++act) {
        const double mass = a.at(b, x, act);
        if (mass <= 0.0) continue;
        out.labels.push_back(a.grid.representative(b));
        out.comps.push_back(x * a.n_actions + act);
        out.weights.push_back(mass);
      }
  return out;
}

DiscreteMeasure atoms_as_discrete(const AtomicMeasure& m, int n_actions) {
  DiscreteMeasure out;
  const int n = m.size();
  require(n > 0, "empty atomic measure");
  for (const auto& atom : m.atoms) {
    out.labels.push_back(atom.label);
    if (atom.action.has_value()) {
      require(n_actions > 0, "action-bearing atoms need the action count");
      out.comps.push_back(atom.state * n_actions + *atom.action);
    } else {
      out.comps.push_back(atom.state);
    }
    out.weights.push_back(1.0 / n);
  }
  return out;
}

namespace {

MNEstimate summarize(const std::vector<double>& values, double mesh, double mesh_bound) {
  MNEstimate est;
  est.samples = static_cast<int>(values.size());
  est.label_mesh = mesh;
  est.mesh_error_bound = mesh_bound;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= est.samples;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  est.mean = mean;
  est.std_error = est.samples > 1 ? std::sqrt(ss / (est.samples - 1)) / std::sqrt(est.samples) : 0.0;
  return est;
}

}  // namespace

MNEstimate estimate_MN(const LiftedMeasure& mu, const FiniteMetricSpace& state_metric, int N,
                       int samples, std::uint64_t seed, double label_mesh) {
  require(N >= 1, "cloud size must be positive");
  require(samples >= 2, "need at least two samples");
  const double mesh = label_mesh > 0.0 ? label_mesh : 1.0 / (10.0 * N);
  const DiscreteMeasure base = discretize_lifted(mu, mesh);

  std::vector<double> values(samples);
  for (int s = 0; s < samples; ++s) {
    RngStream stream(seed, "mn-cloud", static_cast<std::uint64_t>(s));
    DiscreteMeasure cloud;
    cloud.labels.resize(N);
    cloud.comps.resize(N);
    cloud.weights.assign(N, 1.0 / N);
    for (int i = 0; i < N; ++i) {
      const double u = 1.0 - stream.uniform01();  // label in (0, 1]
      const int b = mu.grid.block_of(u);
      cloud.labels[i] = u;
      cloud.comps[i] = stream.sample_pmf(mu.rows[b]);
    }
    values[s] = w1_product_line(cloud, base, state_metric);
  }
  return summarize(values, mesh, mesh / 2.0);
}

MNEstimate estimate_MN(const DiscreteMeasure& mu, const FiniteMetricSpace& comp_metric, int N,
                       int samples, std::uint64_t seed) {
  require(N >= 1, "cloud size must be positive");
  require(samples >= 2, "need at least two samples");
  check_measure(mu, comp_metric, "mu");
  const double total = mu.total_mass();
  require(std::fabs(total - 1.0) <= kBalanceTol, "base measure must be a probability measure");

  std::vector<double> values(samples);
  for (int s = 0; s < samples; ++s) {
    RngStream stream(seed, "mn-cloud-atomic", static_cast<std::uint64_t>(s));
    DiscreteMeasure cloud;
    cloud.weights.assign(N, 1.0 / N);
    for (int i = 0; i < N; ++i) {
      const int k = stream.sample_pmf(mu.weights);
      cloud.labels.push_back(mu.labels[k]);
      cloud.comps.push_back(mu.comps[k]);
    }
    values[s] = w1_product_line(cloud, mu, comp_metric);
  }
  return summarize(values, 0.0, 0.0);
}

}  // namespace cnemf
