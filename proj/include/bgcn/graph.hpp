#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "bgcn/common.hpp"

namespace bgcn {

using NodeId = std::int32_t;

// Undirected graph stored as CSR adjacency with unit edge weights. Every edge
// {u, v} appears in both rows; each row's column indices are sorted and
// duplicate-free. Self-loops are not stored unless explicitly added via
// add_self_loops.
class SparseGraph {
 public:
  SparseGraph() : row_offsets_(1, 0) {}
  SparseGraph(NodeId num_nodes, std::vector<std::int64_t> row_offsets,
              std::vector<NodeId> col_indices);

  NodeId num_nodes() const { return static_cast<NodeId>(row_offsets_.size() - 1); }
  // Directed adjacency entries; twice the undirected edge count for a
  // loop-free graph (a self-loop contributes one entry).
  std::int64_t num_entries() const { return static_cast<std::int64_t>(col_indices_.size()); }
  std::int64_t num_undirected_edges() const;

  NodeId degree(NodeId i) const {
    check_index(i);
    return static_cast<NodeId>(row_offsets_[i + 1] - row_offsets_[i]);
  }
  std::span<const NodeId> neighbors(NodeId i) const {
    check_index(i);
    return {col_indices_.data() + row_offsets_[i],
            static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }
  bool has_edge(NodeId i, NodeId j) const;  // binary search within row i

  const std::vector<std::int64_t>& row_offsets() const { return row_offsets_; }
  const std::vector<NodeId>& col_indices() const { return col_indices_; }

  bool operator==(const SparseGraph& other) const = default;

 private:
  void check_index(NodeId i) const {
    if (i < 0 || i >= num_nodes()) throw Error("SparseGraph: node index out of range");
  }

  std::vector<std::int64_t> row_offsets_;
  std::vector<NodeId> col_indices_;
};

// Builds a graph from an undirected edge list. Duplicate edges collapse to
// one; {u, v} and {v, u} are the same edge; self-loops in the input are
// dropped. Node ids must lie in [0, num_nodes).
SparseGraph build_graph(std::span<const std::pair<NodeId, NodeId>> edges, NodeId num_nodes);

// Returns a copy with a self-loop added to every node (entries i->i).
// The input must be a base graph: if any self-loop is already present the
// call throws, so accidental double application is caught instead of
// silently compounding.
SparseGraph add_self_loops(const SparseGraph& g);

// Returns a copy where node `target`'s neighborhood is replaced by node
// `source`'s neighborhood (minus `target` itself, to avoid creating a
// self-loop). Reverse entries are fixed up so the result stays symmetric:
// former neighbors of `target` drop their entry for it, new ones gain it.
SparseGraph replace_neighborhood(const SparseGraph& g, NodeId target, NodeId source);

// Applies the same rewrite for every (target, source) pair with
// target != source, in increasing target order; each copied neighborhood is
// taken from the original graph `g`, not the partially rewritten one.
// `assignments` holds one source per node; assignments[j] == j keeps node j's
// neighborhood.
SparseGraph rewrite_neighborhoods(const SparseGraph& g, std::span<const NodeId> assignments);

// Checks structural invariants (sorted duplicate-free rows, symmetry, index
// bounds, optionally absence of self-loops); throws Error with a description
// of the first violation.
void validate_graph(const SparseGraph& g, bool allow_self_loops = false);

// Writes one "u<TAB>v" line per undirected edge (u < v), sorted.
void write_edge_list(const SparseGraph& g, std::ostream& out);
SparseGraph read_edge_list(std::istream& in, NodeId num_nodes);

// Symmetrically normalized adjacency:
//   entry(i, j) = 1 / sqrt(deg(i) * deg(j))
// with degrees taken from the (loop-augmented) input. Same CSR layout as
// SparseGraph plus values.
struct NormalizedAdjacency {
  NodeId n = 0;
  std::vector<std::int64_t> row_offsets;
  std::vector<NodeId> col_indices;
  std::vector<double> values;
};

// g_tilde is the loop-augmented graph (add_self_loops output), so every
// degree is >= 1; a zero-degree node is an error. Each stored entry,
// diagonal included, gets weight 1/sqrt(deg(i)*deg(j)).
NormalizedAdjacency normalize_adjacency(const SparseGraph& g_tilde);

// Convenience composition for base graphs: normalize_adjacency(add_self_loops(g)).
NormalizedAdjacency normalize_with_self_loops(const SparseGraph& g);

// Dense product  a * h  (row i of the result is the weighted sum of h's rows
// over i's neighborhood). h must have a.n rows.
Matrix spmm(const NormalizedAdjacency& a, const Matrix& h);

// Connectivity helper used by samplers and tests.
bool is_connected(const SparseGraph& g);

}  // namespace bgcn
