#include "bregman_ot/bench/lp_oracle.hpp"

#include "bregman_ot/core.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <vector>

namespace bregman_ot::bench {

namespace {

constexpr double kFlowTol = 1e-12;
constexpr double kDualTol = 1e-11;

struct Cell {
  int i, j;
};

// Union-find over the m+n bipartite nodes.
struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int x, int y) {
    x = find(x);
    y = find(y);
    if (x == y) return false;
    parent[x] = y;
    return true;
  }
};

bool is_spanning_tree(const std::vector<Cell>& cells, int m, int n) {
  DisjointSet ds(m + n);
  for (const auto& c : cells)
    if (!ds.unite(c.i, m + c.j)) return false;  // cycle
  const int root = ds.find(0);
  for (int v = 1; v < m + n; ++v)
    if (ds.find(v) != root) return false;
  return true;
}

// Flows on a spanning-tree basis are determined by leaf elimination; returns
// false when some flow is negative (not a basic feasible solution).
bool tree_flows(const std::vector<Cell>& cells, const Vector& a, const Vector& b,
                std::vector<double>& flows) {
  const int m = static_cast<int>(a.size());
  const int n = static_cast<int>(b.size());
  const int nodes = m + n;
  std::vector<std::vector<int>> incident(nodes);
  for (int e = 0; e < static_cast<int>(cells.size()); ++e) {
    incident[cells[e].i].push_back(e);
    incident[m + cells[e].j].push_back(e);
  }
  std::vector<int> degree(nodes);
  std::vector<double> remaining(nodes);
  for (int v = 0; v < nodes; ++v) {
    degree[v] = static_cast<int>(incident[v].size());
    remaining[v] = v < m ? a[v] : b[v - m];
  }
  std::vector<bool> edge_done(cells.size(), false);
  flows.assign(cells.size(), 0.0);

  std::deque<int> leaves;
  for (int v = 0; v < nodes; ++v)
    if (degree[v] == 1) leaves.push_back(v);

  int processed = 0;
  bool feasible = true;
  while (!leaves.empty()) {
    const int v = leaves.front();
    leaves.pop_front();
    if (degree[v] != 1) continue;
    int edge = -1;
    for (int e : incident[v])
      if (!edge_done[e]) edge = e;
    if (edge < 0) continue;
    const double flow = remaining[v];
    flows[edge] = flow;
    if (flow < -kFlowTol) feasible = false;
    const int other = cells[edge].i == v ? m + cells[edge].j : cells[edge].i;
    remaining[other] -= flow;
    remaining[v] = 0;
    edge_done[edge] = true;
    --degree[v];
    if (--degree[other] == 1) leaves.push_back(other);
    ++processed;
  }
  return feasible && processed == static_cast<int>(cells.size());
}

// f_i + g_j = c_ij on the tree cells, rooted at row 0 with f_0 = 0.
void tree_duals(const std::vector<Cell>& cells, const Matrix& cost, int m, int n, Vector& f,
                Vector& g) {
  const int nodes = m + n;
  std::vector<std::vector<int>> incident(nodes);
  for (int e = 0; e < static_cast<int>(cells.size()); ++e) {
    incident[cells[e].i].push_back(e);
    incident[m + cells[e].j].push_back(e);
  }
  f.setZero(m);
  g.setZero(n);
  std::vector<bool> visited(nodes, false);
  std::deque<int> queue{0};
  visited[0] = true;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int e : incident[v]) {
      const int other = cells[e].i == v ? m + cells[e].j : cells[e].i;
      if (visited[other]) continue;
      visited[other] = true;
      if (other >= m)
        g[other - m] = cost(cells[e].i, cells[e].j) - f[cells[e].i];
      else
        f[other] = cost(cells[e].i, cells[e].j) - g[cells[e].j];
      queue.push_back(other);
    }
  }
}

bool duals_certify(const OtInstance<double>& inst, const Matrix& plan, const Vector& f,
                   const Vector& g) {
  const Matrix z = DualPair<double>{f, g}.slack(inst.cost);
  if (z.minCoeff() < -kDualTol) return false;
  return std::abs(detail::dot_compensated(plan, z)) <= kDualTol * (1.0 + inst.cost.norm());
}

template <typename Visitor>
void for_each_combination(int total, int choose, Visitor&& visit) {
  std::vector<int> idx(choose);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    visit(idx);
    int pos = choose - 1;
    while (pos >= 0 && idx[pos] == total - choose + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int k = pos + 1; k < choose; ++k) idx[k] = idx[k - 1] + 1;
  }
}

}  // namespace

OracleSolution lp_oracle_enumerate(const OtInstance<double>& inst) {
  inst.validate();
  const int m = static_cast<int>(inst.rows());
  const int n = static_cast<int>(inst.cols());
  const int total = m * n;
  const int basis_size = m + n - 1;

  double best = std::numeric_limits<double>::infinity();
  Matrix best_plan = Matrix::Zero(m, n);
  std::vector<Cell> cells(basis_size);
  std::vector<double> flows;

  auto cells_from = [&](const std::vector<int>& idx) {
    for (int k = 0; k < basis_size; ++k) cells[k] = {idx[k] / n, idx[k] % n};
  };

  for_each_combination(total, basis_size, [&](const std::vector<int>& idx) {
    cells_from(idx);
    if (!is_spanning_tree(cells, m, n)) return;
    if (!tree_flows(cells, inst.a, inst.b, flows)) return;
    Matrix plan = Matrix::Zero(m, n);
    for (int k = 0; k < basis_size; ++k) plan(cells[k].i, cells[k].j) = std::max(flows[k], 0.0);
    const double value = detail::dot_compensated(inst.cost, plan);
    if (value < best) {
      best = value;
      best_plan = plan;
    }
  });
  if (!std::isfinite(best)) throw std::runtime_error("lp_oracle: no basic feasible solution found");

  // second pass: a spanning tree whose duals are feasible and complementary
  // with the optimal plan exists by strong duality
  OracleSolution sol;
  sol.value = best;
  sol.plan = best_plan;
  bool have_duals = false;
  Vector f, g;
  for_each_combination(total, basis_size, [&](const std::vector<int>& idx) {
    if (have_duals) return;
    cells_from(idx);
    if (!is_spanning_tree(cells, m, n)) return;
    tree_duals(cells, inst.cost, m, n, f, g);
    if (duals_certify(inst, best_plan, f, g)) {
      sol.f = f;
      sol.g = g;
      have_duals = true;
    }
  });
  if (!have_duals) throw std::runtime_error("lp_oracle: no complementary dual basis found");
  return sol;
}

OracleSolution lp_oracle_simplex(const OtInstance<double>& inst) {
  inst.validate();
  const int m = static_cast<int>(inst.rows());
  const int n = static_cast<int>(inst.cols());
  const Matrix& cost = inst.cost;

  std::vector<Cell> basis;
  basis.reserve(m + n - 1);
  Matrix flow = Matrix::Zero(m, n);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> in_basis(m, n);
  in_basis.setConstant(false);

  // northwest-corner start: a staircase spanning tree with m+n-1 cells
  {
    int i = 0, j = 0;
    double ar = inst.a[0], bc = inst.b[0];
    while (true) {
      const double x = std::min(ar, bc);
      flow(i, j) = x;
      basis.push_back({i, j});
      in_basis(i, j) = true;
      ar -= x;
      bc -= x;
      if (i == m - 1 && j == n - 1) break;
      if (ar <= 0.0 && i < m - 1) {
        ++i;
        ar = inst.a[i];
      } else if (j < n - 1) {
        ++j;
        bc = inst.b[j];
      } else {
        ++i;  // roundoff left a residual at the last column: finish downwards
        ar = inst.a[i];
      }
    }
  }

  Vector f(m), g(n);
  std::vector<int> parent_node(m + n), parent_edge(m + n);
  const long max_pivots = 200000;
  for (long pivot = 0;; ++pivot) {
    if (pivot >= max_pivots) throw std::runtime_error("lp_oracle: simplex pivot cap exceeded");
    tree_duals(basis, cost, m, n, f, g);

    // Bland's rule: the first cell (row-major) with negative reduced cost
    int ei = -1, ej = -1;
    for (int i = 0; i < m && ei < 0; ++i)
      for (int j = 0; j < n; ++j) {
        if (in_basis(i, j)) continue;
        if (cost(i, j) - f[i] - g[j] < -kDualTol) {
          ei = i;
          ej = j;
          break;
        }
      }
    if (ei < 0) break;  // optimal

    // cycle: the tree path from row ei to column ej plus the entering cell
    std::vector<std::vector<std::pair<int, int>>> adj(m + n);  // (neighbor, basis index)
    for (int e = 0; e < static_cast<int>(basis.size()); ++e) {
      adj[basis[e].i].push_back({m + basis[e].j, e});
      adj[m + basis[e].j].push_back({basis[e].i, e});
    }
    std::fill(parent_node.begin(), parent_node.end(), -1);
    std::deque<int> queue{ei};
    parent_node[ei] = ei;
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      if (v == m + ej) break;
      for (const auto& [w, e] : adj[v]) {
        if (parent_node[w] >= 0) continue;
        parent_node[w] = v;
        parent_edge[w] = e;
        queue.push_back(w);
      }
    }

    // walk back from the column node; path edges alternate -,+,-,...
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    {
      int sign = -1;
      for (int v = m + ej; v != ei; v = parent_node[v], sign = -sign) {
        const int e = parent_edge[v];
        if (sign < 0) {
          const double val = flow(basis[e].i, basis[e].j);
          const long idx = static_cast<long>(basis[e].i) * n + basis[e].j;
          const long best_idx =
              leaving < 0 ? -1 : static_cast<long>(basis[leaving].i) * n + basis[leaving].j;
          if (val < theta || (val == theta && (leaving < 0 || idx < best_idx))) {
            theta = val;
            leaving = e;
          }
        }
      }
    }
    {
      int sign = -1;
      for (int v = m + ej; v != ei; v = parent_node[v], sign = -sign)
        flow(basis[parent_edge[v]].i, basis[parent_edge[v]].j) += sign * theta;
    }
    flow(ei, ej) = theta;
    flow(basis[leaving].i, basis[leaving].j) = 0.0;
    in_basis(basis[leaving].i, basis[leaving].j) = false;
    in_basis(ei, ej) = true;
    basis[leaving] = {ei, ej};
  }

  OracleSolution sol;
  sol.plan = flow.cwiseMax(0.0);
  sol.value = detail::dot_compensated(cost, sol.plan);
  sol.f = f;
  sol.g = g;
  return sol;
}

OracleSolution lp_oracle(const OtInstance<double>& inst) {
  const Index m = inst.rows(), n = inst.cols();
  if (m * n <= 25) return lp_oracle_enumerate(inst);
  if (m + n <= 64) return lp_oracle_simplex(inst);
  throw std::invalid_argument("lp_oracle: instance too large (need m*n <= 25 or m+n <= 64)");
}

}  // namespace bregman_ot::bench
