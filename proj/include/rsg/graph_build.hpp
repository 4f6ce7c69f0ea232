#pragma once

#include <array>
#include <limits>
#include <vector>

#include "rsg/priors.hpp"

namespace rsg {

inline constexpr std::size_t kEdgeGeomDim = 4;
inline constexpr std::size_t kEdgeFeatDim = kEdgeGeomDim + kNumRelationships;

using EdgeFeature = std::array<double, kEdgeFeatDim>;

/// One unordered object pair, oriented lower id -> higher id.
struct CandidateEdge {
  int pair_index = 0;
  int subject_id = 0;
  int object_id = 0;
  /// Positions of the endpoints in DualGraph::object_nodes.
  int subject_node = 0;
  int object_node = 0;
  /// (dx, dy, dvx, dvy) followed by the prior vector of the class pair.
  EdgeFeature feat{};

  double distance() const;
};

/// Bipartite object/edge structure. Each candidate edge is a node holding a
/// recurrent state; messages travel object <-> edge only.
struct DualGraph {
  std::vector<ObjectNode> object_nodes;  // sorted by id
  std::vector<CandidateEdge> edge_nodes;
  /// Edge nodes sharing at least one endpoint, ascending.
  std::vector<std::vector<int>> edge_adjacency;

  std::size_t size() const { return edge_nodes.size(); }
};

DualGraph build_dense(const SceneGraph& g, const PriorTable& pt);

/// Drops pairs farther apart than max_dist (meters) and rebuilds adjacency.
DualGraph prune_candidates(const DualGraph& dg,
                           double max_dist = 60.0);

void rebuild_adjacency(DualGraph& dg);

}  // namespace rsg
