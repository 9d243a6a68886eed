#include "bgcn/sampler.hpp"

#include <algorithm>

namespace bgcn {

double acceptance_prob(NodeId degree_current, NodeId degree_proposed) {
  if (degree_current <= 0 || degree_proposed <= 0)
    throw Error("acceptance_prob: degrees must be positive");
  if (degree_current >= degree_proposed) return 1.0;
  return static_cast<double>(degree_current) / static_cast<double>(degree_proposed);
}

NodeId mh_step(const SparseGraph& g, NodeId current, RngStream& rng) {
  auto nbrs = g.neighbors(current);
  if (nbrs.empty()) return current;
  const NodeId proposal = nbrs[static_cast<std::size_t>(rng.uniform_int(
      static_cast<std::int64_t>(nbrs.size())))];
  const double alpha = acceptance_prob(g.degree(current), g.degree(proposal));
  const double u = rng.uniform();
  return u <= alpha ? proposal : current;
}

NodeId walk(const SparseGraph& g, NodeId start, int steps, RngStream& rng) {
  if (start < 0 || start >= g.num_nodes()) throw Error("walk: start node out of range");
  if (steps < 1) throw Error("walk: step count must be at least 1");
  NodeId node = start;
  for (int s = 0; s < steps; ++s) node = mh_step(g, node, rng);
  return node;
}

Matrix transition_matrix(const SparseGraph& g) {
  const NodeId n = g.num_nodes();
  Matrix p = Matrix::Zero(n, n);
  for (NodeId i = 0; i < n; ++i) {
    auto nbrs = g.neighbors(i);
    if (nbrs.empty()) {
      p(i, i) = 1.0;
      continue;
    }
    const double propose = 1.0 / static_cast<double>(nbrs.size());
    for (NodeId j : nbrs) {
      const double alpha = acceptance_prob(g.degree(i), g.degree(j));
      p(i, j) += propose * alpha;
      p(i, i) += propose * (1.0 - alpha);
    }
  }
  return p;
}

CopyVector sample_xi(const SparseGraph& g, const SamplerConfig& cfg) {
  if (cfg.walk_steps < 1) throw Error("sample_xi: walk_steps must be at least 1");
  const NodeId n = g.num_nodes();
  CopyVector cv;
  cv.xi.resize(n);
  for (NodeId j = 0; j < n; ++j) {
    if (g.degree(j) == 0) {
      cv.xi[j] = j;
      continue;
    }
    RngStream rng(derive_seed(cfg.seed, Stream::kXi, {static_cast<std::uint64_t>(j)}));
    const NodeId settled = walk(g, j, cfg.walk_steps, rng);
    cv.xi[j] = mh_step(g, settled, rng);
  }
  return cv;
}

SparseGraph sample_graph(const SparseGraph& g_obs, const CopyVector& xi, RngStream& rng) {
  const NodeId n = g_obs.num_nodes();
  if (xi.xi.size() != static_cast<std::size_t>(n))
    throw Error("sample_graph: copy vector size mismatch");
  std::vector<NodeId> assignments(n);
  for (NodeId j = 0; j < n; ++j) {
    const NodeId source = xi.xi[j];
    if (source < 0 || source >= n) throw Error("sample_graph: copy target out of range");
    if (source == j || g_obs.degree(j) == 0) {
      assignments[j] = j;
      continue;
    }
    const double keep = acceptance_prob(g_obs.degree(j), g_obs.degree(source));
    assignments[j] = rng.uniform() <= keep ? j : source;
  }
  return rewrite_neighborhoods(g_obs, assignments);
}

}  // namespace bgcn
