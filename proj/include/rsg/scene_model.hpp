#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rsg/errors.hpp"

namespace rsg {

enum class ObjectClass : int { Human = 0, Vehicle = 1, Obstacle = 2, TrafficSign = 3 };

inline constexpr std::size_t kNumClasses = 4;

/// Relationship taxonomy. Every entry except NoRelation belongs to exactly one
/// (subject class, object class) cell; same-named relations in different cells
/// (Group, Behind, PassingBy, WaitingForCrossing) are distinct types.
enum class RelationshipType : int {
  HumanGroup = 0,
  HumanBehindVehicle,
  HumanOnLane,
  HumanWaitingForCrossing,
  HumanMayIntersect,
  HumanBehindObstacle,
  HumanWaitingTs,
  VehicleGroup,
  SameLane,
  Following,
  Approaching,
  VehicleWaitingForCrossing,
  VehiclePassingBy,
  Overtaking,
  VehiclePassingByObstacle,
  VehicleAvoiding,
  WaitingForTs,
  StopByTs,
  ReactByTs,
  ObstacleGroup,
  ObstacleBehindSign,
  NoRelation
};

inline constexpr std::size_t kNumRelationships = 22;
inline constexpr std::size_t kNumTaxonomyRelationships = 21;

using RelationMask = std::bitset<kNumRelationships>;

constexpr int index_of(ObjectClass c) { return static_cast<int>(c); }
constexpr int index_of(RelationshipType r) { return static_cast<int>(r); }
constexpr ObjectClass class_from_index(int i) { return static_cast<ObjectClass>(i); }
constexpr RelationshipType relation_from_index(int i) { return static_cast<RelationshipType>(i); }

std::string_view to_string(ObjectClass c);
std::string_view to_string(RelationshipType r);
ObjectClass parse_object_class(std::string_view name);
RelationshipType parse_relationship(std::string_view name);

std::array<double, kNumClasses> one_hot(ObjectClass c);

/// Subject and object class of a taxonomy relation. For NoRelation both are
/// empty.
struct ClassPair {
  ObjectClass subject;
  ObjectClass object;
};
std::optional<ClassPair> canonical_classes(RelationshipType r);

/// Taxonomy entries defined for the unordered class pair, plus NoRelation.
RelationMask valid_relationships(ObjectClass ci, ObjectClass cj);
bool is_valid(RelationshipType r, ObjectClass ci, ObjectClass cj);

struct ObjectNode {
  int id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  double x = 0, y = 0;
  double vx = 0, vy = 0;
  double ax = 0, ay = 0;
  double yaw = 0, pitch = 0, roll = 0;
  std::optional<int> group_id;

  bool operator==(const ObjectNode&) const = default;
};

struct RelationshipEdge {
  int subject_id = 0;
  int object_id = 0;
  RelationshipType rel = RelationshipType::NoRelation;
  double confidence = 1.0;

  bool operator==(const RelationshipEdge&) const = default;
};

struct SceneGraph {
  int frame_index = 0;
  double timestamp_s = 0;
  std::vector<ObjectNode> nodes;
  std::vector<RelationshipEdge> edges;

  const ObjectNode* find(int id) const;
  bool operator==(const SceneGraph&) const = default;
};

/// Relation with temporal breakpoints in frame units. Fully on over [b, c),
/// ramping over [a, b) and [c, d].
struct RelationshipInterval {
  int subject_id = 0;
  int object_id = 0;
  RelationshipType rel = RelationshipType::NoRelation;
  double a = 0, b = 0, c = 0, d = 0;

  /// Frames covered by the annotation itself: [(a+b)/2, (c+d)/2).
  bool labels_frame(double x) const;
  bool operator==(const RelationshipInterval&) const = default;
};

struct Scene {
  std::string scene_id;
  std::vector<SceneGraph> frames;
  std::vector<RelationshipInterval> intervals;

  bool operator==(const Scene&) const = default;
};

inline constexpr double kFramePeriod = 0.5;
inline constexpr int kEgoId = 0;

struct Violation {
  std::optional<int> frame;
  std::string element;
  std::string rule;
};

std::string describe(const Violation& v);

std::vector<Violation> validate_graph(const SceneGraph& g);
std::vector<Violation> validate_scene(const Scene& s);

/// Unordered pair key (min id, max id).
struct PairKey {
  int lo = 0;
  int hi = 0;
  auto operator<=>(const PairKey&) const = default;
};
inline PairKey pair_key(int i, int j) { return i < j ? PairKey{i, j} : PairKey{j, i}; }

/// Member id -> supernode id for every grouped node of the frame. Throws
/// ValidationError when a group spans classes.
std::vector<std::pair<int, int>> group_map(const SceneGraph& g);

/// Merge each group of same-class nodes into one supernode with id equal to
/// the minimum member id and member-mean kinematics.
SceneGraph collapse_groups(const SceneGraph& g);

}  // namespace rsg
