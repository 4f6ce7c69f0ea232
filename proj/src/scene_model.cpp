#include "rsg/scene_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace rsg {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"human", "vehicle", "obstacle",
                                                                   "traffic_sign"};

constexpr std::array<std::string_view, kNumRelationships> kRelationNames = {
    "human_group",
    "human_behind_vehicle",
    "human_on_lane",
    "human_waiting_for_crossing",
    "human_may_intersect",
    "human_behind_obstacle",
    "human_waiting_ts",
    "vehicle_group",
    "same_lane",
    "following",
    "approaching",
    "vehicle_waiting_for_crossing",
    "vehicle_passing_by",
    "overtaking",
    "vehicle_passing_by_obstacle",
    "vehicle_avoiding",
    "waiting_for_ts",
    "stop_by_ts",
    "react_by_ts",
    "obstacle_group",
    "obstacle_behind_sign",
    "no_relation",
};

using C = ObjectClass;

// Row class of the upper-triangular table is the subject.
constexpr std::array<ClassPair, kNumTaxonomyRelationships> kCanonical = {{
    {C::Human, C::Human},
    {C::Human, C::Vehicle},
    {C::Human, C::Vehicle},
    {C::Human, C::Vehicle},
    {C::Human, C::Vehicle},
    {C::Human, C::Obstacle},
    {C::Human, C::TrafficSign},
    {C::Vehicle, C::Vehicle},
    {C::Vehicle, C::Vehicle},
    {C::Vehicle, C::Vehicle},
    {C::Vehicle, C::Vehicle},
    {C::Vehicle, C::Vehicle},
    {C::Vehicle, C::Vehicle},
    {C::Vehicle, C::Vehicle},
    {C::Vehicle, C::Obstacle},
    {C::Vehicle, C::Obstacle},
    {C::Vehicle, C::TrafficSign},
    {C::Vehicle, C::TrafficSign},
    {C::Vehicle, C::TrafficSign},
    {C::Obstacle, C::Obstacle},
    {C::Obstacle, C::TrafficSign},
}};

bool finite_kinematics(const ObjectNode& n) {
  for (double v : {n.x, n.y, n.vx, n.vy, n.ax, n.ay, n.yaw, n.pitch, n.roll}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string node_label(int id) { return "node " + std::to_string(id); }

std::string edge_label(const RelationshipEdge& e) {
  return "edge " + std::to_string(e.subject_id) + "->" + std::to_string(e.object_id) + " " +
         std::string(to_string(e.rel));
}

std::string interval_label(const RelationshipInterval& iv) {
  return "interval " + std::to_string(iv.subject_id) + "->" + std::to_string(iv.object_id) + " " +
         std::string(to_string(iv.rel));
}

}  // namespace

std::string_view to_string(ObjectClass c) { return kClassNames.at(static_cast<std::size_t>(c)); }

std::string_view to_string(RelationshipType r) {
  return kRelationNames.at(static_cast<std::size_t>(r));
}

ObjectClass parse_object_class(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return class_from_index(static_cast<int>(i));
  }
  throw ValidationError("unknown object class '" + std::string(name) + "'");
}

RelationshipType parse_relationship(std::string_view name) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == name) return relation_from_index(static_cast<int>(i));
  }
  throw ValidationError("unknown relationship type '" + std::string(name) + "'");
}

std::array<double, kNumClasses> one_hot(ObjectClass c) {
  std::array<double, kNumClasses> v{};
  v[static_cast<std::size_t>(c)] = 1.0;
  return v;
}

std::optional<ClassPair> canonical_classes(RelationshipType r) {
  if (r == RelationshipType::NoRelation) return std::nullopt;
  return kCanonical[static_cast<std::size_t>(r)];
}

RelationMask valid_relationships(ObjectClass ci, ObjectClass cj) {
  const auto lo = std::min(ci, cj);
  const auto hi = std::max(ci, cj);
  RelationMask mask;
  for (std::size_t r = 0; r < kNumTaxonomyRelationships; ++r) {
    if (kCanonical[r].subject == lo && kCanonical[r].object == hi) mask.set(r);
  }
  mask.set(static_cast<std::size_t>(RelationshipType::NoRelation));
  return mask;
}

bool is_valid(RelationshipType r, ObjectClass ci, ObjectClass cj) {
  return valid_relationships(ci, cj).test(static_cast<std::size_t>(r));
}

const ObjectNode* SceneGraph::find(int id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

bool RelationshipInterval::labels_frame(double x) const {
  return x >= 0.5 * (a + b) && x < 0.5 * (c + d);
}

std::string describe(const Violation& v) {
  std::ostringstream os;
  if (v.frame) os << "frame " << *v.frame << ": ";
  os << v.element << ": " << v.rule;
  return os.str();
}

std::vector<Violation> validate_graph(const SceneGraph& g) {
  std::vector<Violation> out;
  const int f = g.frame_index;
  std::set<int> ids;
  for (const auto& n : g.nodes) {
    if (!ids.insert(n.id).second) out.push_back({f, node_label(n.id), "duplicate node id"});
    if (!finite_kinematics(n)) {
      out.push_back({f, node_label(n.id), "non-finite kinematics"});
    } else if (!(n.yaw > -std::numbers::pi && n.yaw <= std::numbers::pi)) {
      out.push_back({f, node_label(n.id), "yaw range"});
    }
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& e : g.edges) {
    if (e.subject_id == e.object_id) {
      out.push_back({f, edge_label(e), "self-edge"});
      continue;
    }
    const ObjectNode* s = g.find(e.subject_id);
    const ObjectNode* o = g.find(e.object_id);
    if (s == nullptr || o == nullptr) {
      out.push_back({f, edge_label(e), "unknown node"});
      continue;
    }
    if (!is_valid(e.rel, s->cls, o->cls)) out.push_back({f, edge_label(e), "invalid relationship"});
    if (!(e.confidence >= 0.0 && e.confidence <= 1.0)) {
      out.push_back({f, edge_label(e), "confidence range"});
    }
    if (e.rel != RelationshipType::NoRelation &&
        !seen.insert({e.subject_id, e.object_id}).second) {
      out.push_back({f, edge_label(e), "duplicate pair"});
    }
  }
  return out;
}

std::vector<Violation> validate_scene(const Scene& s) {
  std::vector<Violation> out;
  std::map<int, ObjectClass> classes;
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    const auto& g = s.frames[i];
    auto gv = validate_graph(g);
    out.insert(out.end(), gv.begin(), gv.end());
    for (const auto& n : g.nodes) {
      auto [it, inserted] = classes.emplace(n.id, n.cls);
      if (!inserted && it->second != n.cls) {
        out.push_back({g.frame_index, node_label(n.id), "class changes between frames"});
      }
    }
    if (i > 0) {
      const auto& prev = s.frames[i - 1];
      if (g.frame_index <= prev.frame_index) {
        out.push_back({g.frame_index, "frame", "frame order"});
      }
      const double expected = kFramePeriod * (g.frame_index - prev.frame_index);
      if (std::abs(g.timestamp_s - prev.timestamp_s - expected) > 1e-9) {
        out.push_back({g.frame_index, "frame", "frame spacing"});
      }
    }
  }
  for (const auto& iv : s.intervals) {
    if (!(iv.a <= iv.b && iv.b <= iv.c && iv.c <= iv.d) || !std::isfinite(iv.a) ||
        !std::isfinite(iv.d)) {
      out.push_back({std::nullopt, interval_label(iv), "breakpoint order"});
    }
    if (iv.subject_id == iv.object_id) {
      out.push_back({std::nullopt, interval_label(iv), "self-edge"});
      continue;
    }
    auto si = classes.find(iv.subject_id);
    auto oi = classes.find(iv.object_id);
    if (si == classes.end() || oi == classes.end()) {
      out.push_back({std::nullopt, interval_label(iv), "unknown node"});
      continue;
    }
    if (iv.rel == RelationshipType::NoRelation || !is_valid(iv.rel, si->second, oi->second)) {
      out.push_back({std::nullopt, interval_label(iv), "invalid relationship"});
    }
  }
  return out;
}

std::vector<std::pair<int, int>> group_map(const SceneGraph& g) {
  std::map<int, std::vector<const ObjectNode*>> groups;
  for (const auto& n : g.nodes) {
    if (n.group_id) groups[*n.group_id].push_back(&n);
  }
  std::vector<std::pair<int, int>> out;
  for (const auto& [gid, members] : groups) {
    if (members.size() < 2) continue;
    int root = members.front()->id;
    for (const auto* m : members) {
      if (m->cls != members.front()->cls) {
        throw ValidationError("frame " + std::to_string(g.frame_index) + ": group " +
                              std::to_string(gid) + " spans multiple classes");
      }
      root = std::min(root, m->id);
    }
    for (const auto* m : members) out.emplace_back(m->id, root);
  }
  std::sort(out.begin(), out.end());
  return out;
}

SceneGraph collapse_groups(const SceneGraph& g) {
  const auto mapping = group_map(g);
  if (mapping.empty()) return g;

  auto target = [&](int id) {
    auto it = std::lower_bound(mapping.begin(), mapping.end(), std::pair{id, 0},
                               [](const auto& l, const auto& r) { return l.first < r.first; });
    return (it != mapping.end() && it->first == id) ? it->second : id;
  };

  SceneGraph out;
  out.frame_index = g.frame_index;
  out.timestamp_s = g.timestamp_s;

  std::map<int, std::vector<const ObjectNode*>> members;
  for (const auto& n : g.nodes) members[target(n.id)].push_back(&n);

  std::set<int> emitted;
  for (const auto& n : g.nodes) {
    const int root = target(n.id);
    if (!emitted.insert(root).second) continue;
    const auto& ms = members[root];
    if (ms.size() == 1) {
      out.nodes.push_back(*ms.front());
      continue;
    }
    ObjectNode s;
    s.id = root;
    s.cls = ms.front()->cls;
    s.group_id = ms.front()->group_id;
    double sin_sum = 0, cos_sum = 0;
    for (const auto* m : ms) {
      s.x += m->x;
      s.y += m->y;
      s.vx += m->vx;
      s.vy += m->vy;
      s.ax += m->ax;
      s.ay += m->ay;
      s.pitch += m->pitch;
      s.roll += m->roll;
      sin_sum += std::sin(m->yaw);
      cos_sum += std::cos(m->yaw);
    }
    const double k = 1.0 / static_cast<double>(ms.size());
    s.x *= k;
    s.y *= k;
    s.vx *= k;
    s.vy *= k;
    s.ax *= k;
    s.ay *= k;
    s.pitch *= k;
    s.roll *= k;
    // circular mean keeps yaw in (-pi, pi]
    s.yaw = std::atan2(sin_sum, cos_sum);
    if (s.yaw == -std::numbers::pi) s.yaw = std::numbers::pi;
    out.nodes.push_back(s);
  }

  std::map<PairKey, std::size_t> slot;
  for (const auto& e : g.edges) {
    RelationshipEdge r = e;
    r.subject_id = target(e.subject_id);
    r.object_id = target(e.object_id);
    if (r.subject_id == r.object_id) continue;
    auto [it, inserted] = slot.emplace(pair_key(r.subject_id, r.object_id), out.edges.size());
    if (inserted) {
      out.edges.push_back(r);
    } else if (r.confidence > out.edges[it->second].confidence) {
      out.edges[it->second] = r;
    }
  }
  return out;
}

}  // namespace rsg
