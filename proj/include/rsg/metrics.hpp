#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsg/rsg_net.hpp"

namespace rsg {

/// Fraction of non-NoRelation ground-truth edges whose (unordered pair, class)
/// appears among the first k ranked predictions. Empty ground truth yields
/// nullopt (frame skipped).
std::optional<double> recall_at_k(std::span<const ScoredEdge> ranked,
                                  std::span<const RelationshipEdge> gt, int k);

/// Mean of per-frame recalls over frames that are not skipped.
struct RecallAccumulator {
  double sum = 0;
  std::int64_t frames = 0;
  void add(std::optional<double> r) {
    if (r) {
      sum += *r;
      ++frames;
    }
  }
  double mean() const { return frames == 0 ? 0.0 : sum / static_cast<double>(frames); }
};

/// Argmax accuracy on ground-truth-related pairs, with per-class support.
struct PairwiseTally {
  std::int64_t matched = 0;
  std::int64_t total = 0;
  std::array<std::int64_t, kNumRelationships> class_matched{};
  std::array<std::int64_t, kNumRelationships> class_total{};

  PairwiseTally& operator+=(const PairwiseTally& o);
  /// Throws ValidationError when no related pair was seen.
  double accuracy() const;
  /// NaN for classes without support.
  std::array<double, kNumRelationships> per_class_recall() const;
};

/// `argmax` holds one edge per predicted-related pair; pairs missing from it
/// count as predicted NoRelation.
PairwiseTally pairwise_tally(std::span<const RelationshipEdge> argmax,
                             std::span<const RelationshipEdge> gt);

double pairwise_accuracy(std::span<const RelationshipEdge> argmax,
                         std::span<const RelationshipEdge> gt);

/// Relabels classes before counting; unlisted classes keep their own name.
using MergeMap = std::map<RelationshipType, std::string>;

/// Fig. 5 style merge: the three Behind relations become "common_behind".
MergeMap common_behind_merge();

struct ConfusionMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd counts;  // rows: ground truth, cols: prediction
  Eigen::MatrixXd rates;   // row-normalized, zero rows for unsupported classes

  /// Adds one frame; only ground-truth-related pairs are counted.
  void add(std::span<const RelationshipEdge> argmax, std::span<const RelationshipEdge> gt);
  void normalize();
  std::optional<std::size_t> label_index(const std::string& label) const;

 private:
  friend ConfusionMatrix make_confusion(const MergeMap* merge);
  std::array<std::size_t, kNumRelationships> slot_{};
};

ConfusionMatrix make_confusion(const MergeMap* merge = nullptr);

struct ConfusionFrame {
  std::vector<RelationshipEdge> argmax;
  std::vector<RelationshipEdge> gt;
};

ConfusionMatrix confusion_matrix(std::span<const ConfusionFrame> frames,
                                 const MergeMap* merge = nullptr);

struct DegreeStats {
  double avg_edges_per_frame = 0;
  double avg_degree = 0;
};

/// Mean related-edge count per frame and mean of 2|E|/|V| over frames with
/// at least one node.
DegreeStats degree_stats(std::span<const SceneGraph> graphs);

struct EvalReport {
  std::map<int, double> r_at;
  double pairwise_accuracy = 0;
  std::array<double, kNumRelationships> per_class_accuracy{};
  ConfusionMatrix confusion;
  double avg_edges_per_frame = 0;
  double avg_degree_gt = 0;
  double avg_degree_pred = 0;
  std::int64_t frames = 0;
  std::int64_t related_pairs = 0;
  std::string label;
};

}  // namespace rsg
