#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <random>
#include <string>
#include <vector>

#include "rsg/scene_model.hpp"

// Small hand-rolled generators shared by the test files.
namespace rsg::testing {

inline ObjectNode make_node(int id, ObjectClass cls, double x = 0, double y = 0, double vx = 0,
                            double vy = 0) {
  ObjectNode n;
  n.id = id;
  n.cls = cls;
  n.x = x;
  n.y = y;
  n.vx = vx;
  n.vy = vy;
  return n;
}

inline std::vector<RelationshipType> valid_list(ObjectClass ci, ObjectClass cj,
                                                bool with_none = false) {
  std::vector<RelationshipType> out;
  const RelationMask m = valid_relationships(ci, cj);
  for (std::size_t r = 0; r < kNumRelationships; ++r) {
    if (!m.test(r)) continue;
    if (!with_none && r == kNumRelationships - 1) continue;
    out.push_back(relation_from_index(static_cast<int>(r)));
  }
  return out;
}

/// Random frame with `n` nodes (ids shuffled from a sparse range), random
/// classes and kinematics, and each pair related with probability p_edge by a
/// random valid relationship oriented by its canonical subject class.
inline SceneGraph random_graph(std::mt19937_64& rng, int n, double p_edge = 0.4,
                               double box = 40.0) {
  std::uniform_real_distribution<double> pos(-box, box), vel(-8.0, 8.0), unit(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<int> ids;
  for (int i = 0; i < n; ++i) ids.push_back(3 * i + 1);
  std::shuffle(ids.begin(), ids.end(), rng);

  SceneGraph g;
  g.frame_index = 0;
  for (int i = 0; i < n; ++i) {
    ObjectNode node = make_node(ids[i], class_from_index(cls(rng)), pos(rng), pos(rng) * 0.3,
                                vel(rng), vel(rng) * 0.2);
    node.yaw = (unit(rng) * 2 - 1) * 3.0;
    g.nodes.push_back(node);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (unit(rng) >= p_edge) continue;
      const ObjectNode& a = g.nodes[i];
      const ObjectNode& b = g.nodes[j];
      const auto opts = valid_list(a.cls, b.cls);
      if (opts.empty()) continue;
      const RelationshipType r = opts[std::uniform_int_distribution<std::size_t>(0, opts.size() - 1)(rng)];
      const ClassPair cp = *canonical_classes(r);
      RelationshipEdge e{a.id, b.id, r, 1.0};
      if (a.cls != b.cls && a.cls != cp.subject) std::swap(e.subject_id, e.object_id);
      g.edges.push_back(e);
    }
  }
  return g;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rsg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace rsg::testing
