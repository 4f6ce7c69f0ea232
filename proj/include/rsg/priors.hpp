#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "rsg/dataset.hpp"

namespace rsg {

using RelationCounts = std::array<std::int64_t, kNumRelationships>;
using RelationDistribution = std::array<double, kNumRelationships>;

/// P(r | subject class, object class), keyed by the classes of the lower and
/// higher node id of each candidate pair.
class PriorTable {
 public:
  using CountGrid = std::array<std::array<RelationCounts, kNumClasses>, kNumClasses>;

  PriorTable() = default;

  /// Normalizes raw counts. Smoothing mass `alpha` goes to valid types
  /// only. A row with no support and alpha == 0 puts all mass on NoRelation and
  /// is reported by zero_support().
  static PriorTable from_counts(const CountGrid& counts, double alpha);

  const RelationDistribution& prior_vector(ObjectClass ci, ObjectClass cj) const {
    return probs_[index_of(ci)][index_of(cj)];
  }
  const RelationCounts& counts(ObjectClass ci, ObjectClass cj) const {
    return counts_[index_of(ci)][index_of(cj)];
  }
  const CountGrid& count_grid() const { return counts_; }
  double smoothing_alpha() const { return alpha_; }
  bool zero_support(ObjectClass ci, ObjectClass cj) const;

  bool operator==(const PriorTable&) const = default;

 private:
  CountGrid counts_{};
  std::array<std::array<RelationDistribution, kNumClasses>, kNumClasses> probs_{};
  double alpha_ = 1.0;
};

/// Counts every co-present candidate pair of every frame (after group
/// collapsing): labeled pairs contribute their type, the rest NoRelation.
PriorTable compute_priors(const Dataset& train, double alpha = 1.0);

inline const RelationDistribution& prior_vector(const PriorTable& pt, ObjectClass ci,
                                                ObjectClass cj) {
  return pt.prior_vector(ci, cj);
}

}  // namespace rsg
