#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rsg/scene_model.hpp"

namespace rsg {

struct DatasetMeta {
  std::string name;
  std::uint64_t generator_seed = 0;
  std::map<std::string, std::int64_t> counts;

  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  std::vector<Scene> scenes;
  DatasetMeta meta;

  std::size_t frame_count() const;
  bool operator==(const Dataset&) const = default;
};

/// Test set is the last ceil(test_fraction * N) scenes in dataset order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double test_fraction);

/// Ground-truth label of every related unordered pair of one frame after
/// group collapsing, taken from the scene's annotated intervals.
std::map<PairKey, RelationshipType> labeled_pairs(const Scene& s, const SceneGraph& frame);

}  // namespace rsg
