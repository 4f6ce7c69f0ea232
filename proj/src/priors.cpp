#include "rsg/priors.hpp"

#include <algorithm>

namespace rsg {

PriorTable PriorTable::from_counts(const CountGrid& counts, double alpha) {
  if (!(alpha >= 0.0)) throw ValidationError("smoothing alpha must be nonnegative");
  PriorTable pt;
  pt.counts_ = counts;
  pt.alpha_ = alpha;
  constexpr auto kNone = static_cast<std::size_t>(RelationshipType::NoRelation);
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      const auto valid =
          valid_relationships(class_from_index(static_cast<int>(i)), class_from_index(static_cast<int>(j)));
      double total = 0;
      for (std::size_t r = 0; r < kNumRelationships; ++r) {
        if (valid.test(r)) total += static_cast<double>(counts[i][j][r]) + alpha;
      }
      auto& row = pt.probs_[i][j];
      row.fill(0.0);
      if (total == 0.0) {
        row[kNone] = 1.0;
        continue;
      }
      for (std::size_t r = 0; r < kNumRelationships; ++r) {
        if (valid.test(r)) row[r] = (static_cast<double>(counts[i][j][r]) + alpha) / total;
      }
    }
  }
  return pt;
}

bool PriorTable::zero_support(ObjectClass ci, ObjectClass cj) const {
  const auto& c = counts(ci, cj);
  return std::all_of(c.begin(), c.end(), [](std::int64_t v) { return v == 0; });
}

PriorTable compute_priors(const Dataset& train, double alpha) {
  if (train.scenes.empty()) throw ValidationError("empty dataset");
  PriorTable::CountGrid counts{};
  for (const auto& scene : train.scenes) {
    for (const auto& frame : scene.frames) {
      const auto labels = labeled_pairs(scene, frame);
      auto nodes = collapse_groups(frame).nodes;
      std::sort(nodes.begin(), nodes.end(),
                [](const ObjectNode& l, const ObjectNode& r) { return l.id < r.id; });
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
          auto it = labels.find(pair_key(nodes[i].id, nodes[j].id));
          const auto rel = it == labels.end() ? RelationshipType::NoRelation : it->second;
          ++counts[index_of(nodes[i].cls)][index_of(nodes[j].cls)][index_of(rel)];
        }
      }
    }
  }
  return PriorTable::from_counts(counts, alpha);
}

}  // namespace rsg
