#include "rsg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace rsg {

namespace {

using Key = std::pair<PairKey, int>;

std::map<PairKey, RelationshipType> by_pair(std::span<const RelationshipEdge> edges) {
  std::map<PairKey, RelationshipType> out;
  for (const auto& e : edges) {
    if (e.rel == RelationshipType::NoRelation) continue;
    out.emplace(pair_key(e.subject_id, e.object_id), e.rel);
  }
  return out;
}

}  // namespace

std::optional<double> recall_at_k(std::span<const ScoredEdge> ranked,
                                  std::span<const RelationshipEdge> gt, int k) {
  if (k <= 0) throw ValidationError("K must be positive");
  std::set<Key> top;
  const auto limit = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    top.emplace(pair_key(ranked[i].subject_id, ranked[i].object_id), index_of(ranked[i].rel));
  }
  std::int64_t total = 0, hit = 0;
  for (const auto& g : gt) {
    if (g.rel == RelationshipType::NoRelation) continue;
    ++total;
    if (top.count({pair_key(g.subject_id, g.object_id), index_of(g.rel)}) != 0) ++hit;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(hit) / static_cast<double>(total);
}

PairwiseTally& PairwiseTally::operator+=(const PairwiseTally& o) {
  matched += o.matched;
  total += o.total;
  for (std::size_t r = 0; r < kNumRelationships; ++r) {
    class_matched[r] += o.class_matched[r];
    class_total[r] += o.class_total[r];
  }
  return *this;
}

double PairwiseTally::accuracy() const {
  if (total == 0) throw ValidationError("no ground-truth related pairs");
  return static_cast<double>(matched) / static_cast<double>(total);
}

std::array<double, kNumRelationships> PairwiseTally::per_class_recall() const {
  std::array<double, kNumRelationships> out{};
  for (std::size_t r = 0; r < kNumRelationships; ++r) {
    out[r] = class_total[r] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                 : static_cast<double>(class_matched[r]) /
                                       static_cast<double>(class_total[r]);
  }
  return out;
}

PairwiseTally pairwise_tally(std::span<const RelationshipEdge> argmax,
                             std::span<const RelationshipEdge> gt) {
  const auto predicted = by_pair(argmax);
  PairwiseTally t;
  for (const auto& [pair, rel] : by_pair(gt)) {
    const auto r = static_cast<std::size_t>(index_of(rel));
    ++t.total;
    ++t.class_total[r];
    auto it = predicted.find(pair);
    if (it != predicted.end() && it->second == rel) {
      ++t.matched;
      ++t.class_matched[r];
    }
  }
  return t;
}

double pairwise_accuracy(std::span<const RelationshipEdge> argmax,
                         std::span<const RelationshipEdge> gt) {
  return pairwise_tally(argmax, gt).accuracy();
}

MergeMap common_behind_merge() {
  return {{RelationshipType::HumanBehindVehicle, "common_behind"},
          {RelationshipType::HumanBehindObstacle, "common_behind"},
          {RelationshipType::ObstacleBehindSign, "common_behind"}};
}

ConfusionMatrix make_confusion(const MergeMap* merge) {
  ConfusionMatrix cm;
  for (std::size_t r = 0; r < kNumRelationships; ++r) {
    const auto rel = relation_from_index(static_cast<int>(r));
    std::string label(to_string(rel));
    if (merge != nullptr) {
      if (auto it = merge->find(rel); it != merge->end()) label = it->second;
    }
    auto pos = std::find(cm.labels.begin(), cm.labels.end(), label);
    if (pos == cm.labels.end()) {
      cm.slot_[r] = cm.labels.size();
      cm.labels.push_back(label);
    } else {
      cm.slot_[r] = static_cast<std::size_t>(pos - cm.labels.begin());
    }
  }
  const auto n = static_cast<Eigen::Index>(cm.labels.size());
  cm.counts = Eigen::MatrixXd::Zero(n, n);
  cm.rates = Eigen::MatrixXd::Zero(n, n);
  return cm;
}

void ConfusionMatrix::add(std::span<const RelationshipEdge> argmax,
                          std::span<const RelationshipEdge> gt) {
  const auto predicted = by_pair(argmax);
  for (const auto& [pair, rel] : by_pair(gt)) {
    auto it = predicted.find(pair);
    const auto pred = it == predicted.end() ? RelationshipType::NoRelation : it->second;
    counts(static_cast<Eigen::Index>(slot_[static_cast<std::size_t>(index_of(rel))]),
           static_cast<Eigen::Index>(slot_[static_cast<std::size_t>(index_of(pred))])) += 1.0;
  }
}

void ConfusionMatrix::normalize() {
  rates = Eigen::MatrixXd::Zero(counts.rows(), counts.cols());
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    const double s = counts.row(i).sum();
    if (s > 0) rates.row(i) = counts.row(i) / s;
  }
}

std::optional<std::size_t> ConfusionMatrix::label_index(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

ConfusionMatrix confusion_matrix(std::span<const ConfusionFrame> frames, const MergeMap* merge) {
  auto cm = make_confusion(merge);
  for (const auto& f : frames) cm.add(f.argmax, f.gt);
  cm.normalize();
  return cm;
}

DegreeStats degree_stats(std::span<const SceneGraph> graphs) {
  DegreeStats out;
  if (graphs.empty()) return out;
  double edge_sum = 0, degree_sum = 0;
  std::int64_t degree_frames = 0;
  for (const auto& g : graphs) {
    const auto related = std::count_if(g.edges.begin(), g.edges.end(), [](const auto& e) {
      return e.rel != RelationshipType::NoRelation;
    });
    edge_sum += static_cast<double>(related);
    if (!g.nodes.empty()) {
      degree_sum += 2.0 * static_cast<double>(related) / static_cast<double>(g.nodes.size());
      ++degree_frames;
    }
  }
  out.avg_edges_per_frame = edge_sum / static_cast<double>(graphs.size());
  out.avg_degree = degree_frames == 0 ? 0.0 : degree_sum / static_cast<double>(degree_frames);
  return out;
}

}  // namespace rsg
