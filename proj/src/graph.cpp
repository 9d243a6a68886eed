#include "bgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace bgcn {

SparseGraph::SparseGraph(NodeId num_nodes, std::vector<std::int64_t> row_offsets,
                         std::vector<NodeId> col_indices)
    : row_offsets_(std::move(row_offsets)), col_indices_(std::move(col_indices)) {
  if (num_nodes < 0) throw Error("SparseGraph: negative node count");
  if (row_offsets_.size() != static_cast<std::size_t>(num_nodes) + 1)
    throw Error("SparseGraph: row_offsets must have num_nodes + 1 entries");
  if (row_offsets_.front() != 0 ||
      row_offsets_.back() != static_cast<std::int64_t>(col_indices_.size()))
    throw Error("SparseGraph: row_offsets endpoints do not match col_indices");
}

std::int64_t SparseGraph::num_undirected_edges() const {
  std::int64_t loops = 0;
  for (NodeId i = 0; i < num_nodes(); ++i)
    if (has_edge(i, i)) ++loops;
  return (num_entries() - loops) / 2 + loops;
}

bool SparseGraph::has_edge(NodeId i, NodeId j) const {
  auto row = neighbors(i);
  return std::binary_search(row.begin(), row.end(), j);
}

SparseGraph build_graph(std::span<const std::pair<NodeId, NodeId>> edges, NodeId num_nodes) {
  if (num_nodes < 0) throw Error("build_graph: negative node count");
  std::vector<std::vector<NodeId>> adj(num_nodes);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw Error("build_graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                  ") out of range for " + std::to_string(num_nodes) + " nodes");
    if (u == v) continue;  // self-loops never enter the base graph
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<std::int64_t> offsets(num_nodes + 1, 0);
  std::vector<NodeId> cols;
  cols.reserve(edges.size() * 2);
  for (NodeId i = 0; i < num_nodes; ++i) {
    auto& row = adj[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    cols.insert(cols.end(), row.begin(), row.end());
    offsets[i + 1] = static_cast<std::int64_t>(cols.size());
  }
  return SparseGraph(num_nodes, std::move(offsets), std::move(cols));
}

SparseGraph add_self_loops(const SparseGraph& g) {
  const NodeId n = g.num_nodes();
  std::vector<std::int64_t> offsets(n + 1, 0);
  std::vector<NodeId> cols;
  cols.reserve(g.num_entries() + n);
  for (NodeId i = 0; i < n; ++i) {
    auto row = g.neighbors(i);
    bool placed = false;
    for (NodeId j : row) {
      if (j == i) throw Error("add_self_loops: input already contains a self-loop");
      if (!placed && j > i) {
        cols.push_back(i);
        placed = true;
      }
      cols.push_back(j);
    }
    if (!placed) cols.push_back(i);
    offsets[i + 1] = static_cast<std::int64_t>(cols.size());
  }
  return SparseGraph(n, std::move(offsets), std::move(cols));
}

SparseGraph rewrite_neighborhoods(const SparseGraph& g, std::span<const NodeId> assignments) {
  const NodeId n = g.num_nodes();
  if (assignments.size() != static_cast<std::size_t>(n))
    throw Error("rewrite_neighborhoods: one assignment per node required");
  std::vector<std::vector<NodeId>> adj(n);
  for (NodeId i = 0; i < n; ++i) {
    auto row = g.neighbors(i);
    adj[i].assign(row.begin(), row.end());
  }
  auto erase_entry = [&](NodeId row, NodeId col) {
    auto& r = adj[row];
    auto it = std::lower_bound(r.begin(), r.end(), col);
    if (it != r.end() && *it == col) r.erase(it);
  };
  auto insert_entry = [&](NodeId row, NodeId col) {
    auto& r = adj[row];
    auto it = std::lower_bound(r.begin(), r.end(), col);
    if (it == r.end() || *it != col) r.insert(it, col);
  };
  for (NodeId t = 0; t < n; ++t) {
    const NodeId s = assignments[t];
    if (s < 0 || s >= n) throw Error("rewrite_neighborhoods: assignment out of range");
    if (s == t) continue;
    // Detach t from its current neighbors, then attach it to s's neighborhood
    // as it was in the original graph (t itself excluded to stay loop-free).
    for (NodeId j : adj[t])
      if (j != t) erase_entry(j, t);
    adj[t].clear();
    for (NodeId j : g.neighbors(s)) {
      if (j == t) continue;
      adj[t].push_back(j);
      insert_entry(j, t);
    }
  }
  std::vector<std::int64_t> offsets(n + 1, 0);
  std::vector<NodeId> cols;
  cols.reserve(g.num_entries());
  for (NodeId i = 0; i < n; ++i) {
    cols.insert(cols.end(), adj[i].begin(), adj[i].end());
    offsets[i + 1] = static_cast<std::int64_t>(cols.size());
  }
  return SparseGraph(n, std::move(offsets), std::move(cols));
}

SparseGraph replace_neighborhood(const SparseGraph& g, NodeId target, NodeId source) {
  const NodeId n = g.num_nodes();
  if (target < 0 || target >= n || source < 0 || source >= n)
    throw Error("replace_neighborhood: node out of range");
  std::vector<NodeId> assignments(n);
  for (NodeId i = 0; i < n; ++i) assignments[i] = i;
  assignments[target] = source;
  return rewrite_neighborhoods(g, assignments);
}

void validate_graph(const SparseGraph& g, bool allow_self_loops) {
  const NodeId n = g.num_nodes();
  for (NodeId i = 0; i < n; ++i) {
    auto row = g.neighbors(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const NodeId j = row[k];
      std::ostringstream where;
      where << "validate_graph: row " << i << ", entry " << k << ": ";
      if (j < 0 || j >= n) throw Error(where.str() + "column index out of range");
      if (k > 0 && row[k - 1] >= j)
        throw Error(where.str() + (row[k - 1] == j ? "duplicate column" : "unsorted row"));
      if (j == i && !allow_self_loops) throw Error(where.str() + "unexpected self-loop");
      if (j != i && !g.has_edge(j, i))
        throw Error(where.str() + "asymmetric entry (reverse edge missing)");
    }
  }
}

void write_edge_list(const SparseGraph& g, std::ostream& out) {
  for (NodeId i = 0; i < g.num_nodes(); ++i)
    for (NodeId j : g.neighbors(i))
      if (j > i) out << i << '\t' << j << '\n';
}

SparseGraph read_edge_list(std::istream& in, NodeId num_nodes) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  NodeId u, v;
  while (in >> u >> v) edges.emplace_back(u, v);
  return build_graph(edges, num_nodes);
}

NormalizedAdjacency normalize_adjacency(const SparseGraph& g_tilde) {
  const NodeId n = g_tilde.num_nodes();
  NormalizedAdjacency a;
  a.n = n;
  a.row_offsets = g_tilde.row_offsets();
  a.col_indices = g_tilde.col_indices();
  a.values.resize(a.col_indices.size());
  std::vector<double> inv_sqrt_deg(n);
  for (NodeId i = 0; i < n; ++i) {
    const NodeId d = g_tilde.degree(i);
    if (d == 0) throw Error("normalize_adjacency: zero-degree node (add self-loops first)");
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(d));
  }
  for (NodeId i = 0; i < n; ++i)
    for (std::int64_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      a.values[k] = inv_sqrt_deg[i] * inv_sqrt_deg[a.col_indices[k]];
  return a;
}

NormalizedAdjacency normalize_with_self_loops(const SparseGraph& g) {
  return normalize_adjacency(add_self_loops(g));
}

Matrix spmm(const NormalizedAdjacency& a, const Matrix& h) {
  if (h.rows() != a.n) throw Error("spmm: row count mismatch");
  Matrix out = Matrix::Zero(a.n, h.cols());
  for (NodeId i = 0; i < a.n; ++i) {
    auto out_row = out.row(i);
    for (std::int64_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      out_row += a.values[k] * h.row(a.col_indices[k]);
  }
  return out;
}

bool is_connected(const SparseGraph& g) {
  const NodeId n = g.num_nodes();
  if (n == 0) return true;
  std::vector<char> seen(n, 0);
  std::vector<NodeId> stack{0};
  seen[0] = 1;
  NodeId count = 1;
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    for (NodeId v : g.neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

}  // namespace bgcn
