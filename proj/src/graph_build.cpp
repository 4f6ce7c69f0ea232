#include "rsg/graph_build.hpp"

#include <algorithm>
#include <cmath>

namespace rsg {

double CandidateEdge::distance() const { return std::hypot(feat[0], feat[1]); }

void rebuild_adjacency(DualGraph& dg) {
  std::vector<std::vector<int>> incident(dg.object_nodes.size());
  for (std::size_t e = 0; e < dg.edge_nodes.size(); ++e) {
    incident[static_cast<std::size_t>(dg.edge_nodes[e].subject_node)].push_back(static_cast<int>(e));
    incident[static_cast<std::size_t>(dg.edge_nodes[e].object_node)].push_back(static_cast<int>(e));
  }
  dg.edge_adjacency.assign(dg.edge_nodes.size(), {});
  for (std::size_t e = 0; e < dg.edge_nodes.size(); ++e) {
    auto& adj = dg.edge_adjacency[e];
    const auto& ce = dg.edge_nodes[e];
    for (int end : {ce.subject_node, ce.object_node}) {
      for (int other : incident[static_cast<std::size_t>(end)]) {
        if (other != static_cast<int>(e)) adj.push_back(other);
      }
    }
    std::sort(adj.begin(), adj.end());
  }
}

DualGraph build_dense(const SceneGraph& g, const PriorTable& pt) {
  DualGraph dg;
  dg.object_nodes = g.nodes;
  std::sort(dg.object_nodes.begin(), dg.object_nodes.end(),
            [](const ObjectNode& l, const ObjectNode& r) { return l.id < r.id; });
  const auto n = dg.object_nodes.size();
  if (n >= 2) dg.edge_nodes.reserve(n * (n - 1) / 2);
  int index = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& vi = dg.object_nodes[i];
      const auto& vj = dg.object_nodes[j];
      CandidateEdge ce;
      ce.pair_index = index++;
      ce.subject_id = vi.id;
      ce.object_id = vj.id;
      ce.subject_node = static_cast<int>(i);
      ce.object_node = static_cast<int>(j);
      ce.feat[0] = vj.x - vi.x;
      ce.feat[1] = vj.y - vi.y;
      ce.feat[2] = vj.vx - vi.vx;
      ce.feat[3] = vj.vy - vi.vy;
      const auto& prior = pt.prior_vector(vi.cls, vj.cls);
      std::copy(prior.begin(), prior.end(), ce.feat.begin() + kEdgeGeomDim);
      dg.edge_nodes.push_back(ce);
    }
  }
  rebuild_adjacency(dg);
  return dg;
}

DualGraph prune_candidates(const DualGraph& dg, double max_dist) {
  if (!(max_dist > 0.0)) throw ValidationError("max_dist must be positive");
  DualGraph out;
  out.object_nodes = dg.object_nodes;
  for (const auto& ce : dg.edge_nodes) {
    if (ce.distance() <= max_dist) out.edge_nodes.push_back(ce);
  }
  rebuild_adjacency(out);
  return out;
}

}  // namespace rsg
