#pragma once

#include <cstdint>
#include <vector>

#include "bgcn/common.hpp"
#include "bgcn/graph.hpp"

namespace bgcn {

// Per-node copy assignments: xi[j] is the node whose observed neighborhood
// node j may adopt. xi[j] == j means "keep own neighborhood" (always the case
// for isolated nodes).
struct CopyVector {
  std::vector<NodeId> xi;
};

struct SamplerConfig {
  int walk_steps = 10;    // steps before the final proposal that yields xi[j]
  std::uint64_t seed = 0; // master seed; per-node streams are derived from it
};

// Metropolis-Hastings acceptance probability for a uniform target with
// uniform-neighbor proposals: min{1, d_current / d_proposed}.
double acceptance_prob(NodeId degree_current, NodeId degree_proposed);

// One transition of the walk: propose a uniform neighbor j of `current`,
// accept with acceptance_prob(deg(current), deg(j)), else stay. A node with
// no neighbors transitions to itself.
NodeId mh_step(const SparseGraph& g, NodeId current, RngStream& rng);

// Runs `steps` transitions from `start` and returns the final node.
NodeId walk(const SparseGraph& g, NodeId start, int steps, RngStream& rng);

// Dense transition matrix of the chain (row i = distribution of mh_step from
// i); used by correctness checks on small graphs.
Matrix transition_matrix(const SparseGraph& g);

// Draws one copy vector: for every node j, walk walk_steps transitions from j,
// then take one more proposal/acceptance and record the resulting node (the
// post-burn-in sample). Each node uses an independent stream derived from
// (cfg.seed, j), so the result is identical under any evaluation order.
CopyVector sample_xi(const SparseGraph& g, const SamplerConfig& cfg);

// Realizes one graph from the generative model: node j keeps its observed
// neighborhood with probability min{1, deg(j) / deg(xi[j])} (degrees in
// g_obs, no self-loops), otherwise its neighborhood is replaced by the
// observed neighborhood of xi[j]. Copies are applied in increasing node order
// with symmetric fix-ups; coin flips come from `rng` in node order.
SparseGraph sample_graph(const SparseGraph& g_obs, const CopyVector& xi, RngStream& rng);

// Strategy interface so the model can be driven by the random-walk sampler,
// or by a fixed assignment in tests and ablations.
class XiSampler {
 public:
  virtual ~XiSampler() = default;
  virtual CopyVector sample(const SparseGraph& g, std::uint64_t seed) const = 0;
};

class NeighborhoodRandomWalkSampler final : public XiSampler {
 public:
  explicit NeighborhoodRandomWalkSampler(int walk_steps) : walk_steps_(walk_steps) {}
  CopyVector sample(const SparseGraph& g, std::uint64_t seed) const override {
    return sample_xi(g, SamplerConfig{walk_steps_, seed});
  }

 private:
  int walk_steps_;
};

// xi[j] = j for every node: sample_graph then always returns the observed
// graph unchanged.
class IdentitySampler final : public XiSampler {
 public:
  CopyVector sample(const SparseGraph& g, std::uint64_t) const override {
    CopyVector cv;
    cv.xi.resize(g.num_nodes());
    for (NodeId j = 0; j < g.num_nodes(); ++j) cv.xi[j] = j;
    return cv;
  }
};

}  // namespace bgcn
