#include <doctest.h>

#include <random>
#include <set>

#include "rsg/metrics.hpp"
#include "support.hpp"

using namespace rsg;
using rsg::testing::make_node;
using RT = RelationshipType;
using OC = ObjectClass;

namespace {

struct RandomFrame {
  SceneGraph gt;
  std::vector<ScoredEdge> ranked;
  std::vector<RelationshipEdge> argmax;
};

// Every (pair, valid class) gets a coarse random score so ties are common.
RandomFrame random_frame(std::mt19937_64& rng) {
  RandomFrame f;
  f.gt = testing::random_graph(rng, static_cast<int>(rng() % 7), 0.5);
  const auto& n = f.gt.nodes;
  for (std::size_t i = 0; i < n.size(); ++i) {
    for (std::size_t j = i + 1; j < n.size(); ++j) {
      const auto opts = testing::valid_list(n[i].cls, n[j].cls);
      ScoredEdge best{};
      for (RT r : opts) {
        const double conf = double(rng() % 8) / 8.0;
        // Orientation is irrelevant to matching; flip it at random.
        ScoredEdge se{n[i].id, n[j].id, r, conf};
        if (rng() % 2) std::swap(se.subject_id, se.object_id);
        f.ranked.push_back(se);
        if (se.confidence > best.confidence) best = se;
      }
      if (best.confidence > 0.5) f.argmax.push_back({best.subject_id, best.object_id, best.rel, best.confidence});
    }
  }
  rank_edges(f.ranked);
  return f;
}

std::optional<double> brute_recall(const std::vector<ScoredEdge>& ranked,
                                   const std::vector<RelationshipEdge>& gt, int k) {
  int total = 0, hit = 0;
  for (const auto& g : gt) {
    if (g.rel == RT::NoRelation) continue;
    ++total;
    for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
      const auto& p = ranked[pos];
      const bool same_pair = std::minmax(p.subject_id, p.object_id) == std::minmax(g.subject_id, g.object_id);
      if (same_pair && p.rel == g.rel && static_cast<int>(pos) < k) {
        ++hit;
        break;
      }
    }
  }
  if (total == 0) return std::nullopt;
  return double(hit) / double(total);
}

std::pair<int, int> brute_pairwise(const std::vector<RelationshipEdge>& argmax,
                                   const std::vector<RelationshipEdge>& gt) {
  int total = 0, hit = 0;
  for (const auto& g : gt) {
    if (g.rel == RT::NoRelation) continue;
    ++total;
    RT pred = RT::NoRelation;
    for (const auto& a : argmax) {
      if (std::minmax(a.subject_id, a.object_id) == std::minmax(g.subject_id, g.object_id)) pred = a.rel;
    }
    hit += pred == g.rel ? 1 : 0;
  }
  return {hit, total};
}

}  // namespace

TEST_CASE("recall_at_k examples") {
  std::vector<RelationshipEdge> gt;
  std::vector<ScoredEdge> ranked;
  for (int i = 0; i < 5; ++i) gt.push_back({2 * i, 2 * i + 1, RT::Following, 1.0});
  // Pairs 0 and 1 correct near the top; the rest wrong class or far down.
  ranked.push_back({0, 1, RT::Following, 0.9});
  ranked.push_back({3, 2, RT::Following, 0.8});
  ranked.push_back({4, 5, RT::SameLane, 0.7});
  for (int i = 0; i < 37; ++i) ranked.push_back({100 + i, 200 + i, RT::Approaching, 0.5});
  ranked.push_back({6, 7, RT::Following, 0.1});
  CHECK(*recall_at_k(ranked, gt, 15) == doctest::Approx(0.4));
  CHECK(*recall_at_k(ranked, gt, 1000) == doctest::Approx(0.6));
  CHECK(*recall_at_k(ranked, std::span(gt).first(2), 15) == 1.0);
  CHECK_FALSE(recall_at_k(ranked, {}, 15).has_value());
  CHECK_THROWS_AS(recall_at_k(ranked, gt, 0), ValidationError);
}

TEST_CASE("pairwise accuracy examples") {
  std::vector<RelationshipEdge> gt;
  for (int i = 0; i < 10; ++i) gt.push_back({2 * i, 2 * i + 1, RT::Following, 1.0});
  std::vector<RelationshipEdge> pred;
  for (int i = 0; i < 7; ++i) pred.push_back({2 * i + 1, 2 * i, RT::Following, 0.8});
  pred.push_back({14, 15, RT::SameLane, 0.8});
  CHECK(pairwise_accuracy(pred, gt) == doctest::Approx(0.7));
  CHECK(pairwise_accuracy(gt, gt) == 1.0);
  CHECK(pairwise_accuracy({}, gt) == 0.0);
  CHECK_THROWS_AS(pairwise_accuracy(gt, {}), ValidationError);
  const PairwiseTally t = pairwise_tally(pred, gt);
  CHECK(t.class_total[index_of(RT::Following)] == 10);
  CHECK(t.per_class_recall()[index_of(RT::Following)] == doctest::Approx(0.7));
  CHECK(std::isnan(t.per_class_recall()[index_of(RT::Overtaking)]));
}

TEST_CASE("metrics match brute force on random small frames") {
  std::mt19937_64 rng(31);
  RecallAccumulator acc15, brute15;
  PairwiseTally tally;
  int bhit = 0, btotal = 0;
  for (int f = 0; f < 500; ++f) {
    const RandomFrame rf = random_frame(rng);
    for (int k : {1, 3, 15, 25, 1000}) {
      const auto mine = recall_at_k(rf.ranked, rf.gt.edges, k);
      const auto oracle = brute_recall(rf.ranked, rf.gt.edges, k);
      CHECK(mine.has_value() == oracle.has_value());
      if (mine && oracle) CHECK(*mine == *oracle);
    }
    acc15.add(recall_at_k(rf.ranked, rf.gt.edges, 15));
    brute15.add(brute_recall(rf.ranked, rf.gt.edges, 15));
    tally += pairwise_tally(rf.argmax, rf.gt.edges);
    const auto [h, t] = brute_pairwise(rf.argmax, rf.gt.edges);
    bhit += h;
    btotal += t;
    // Monotone in K.
    double prev = -1;
    for (int k = 1; k <= 40; ++k) {
      const auto r = recall_at_k(rf.ranked, rf.gt.edges, k);
      if (!r) break;
      CHECK(*r >= prev);
      prev = *r;
    }
  }
  CHECK(acc15.frames == brute15.frames);
  CHECK(acc15.mean() == brute15.mean());
  CHECK(tally.matched == bhit);
  CHECK(tally.total == btotal);
}

TEST_CASE("pairwise accuracy ignores ranking order") {
  std::mt19937_64 rng(32);
  for (int f = 0; f < 100; ++f) {
    RandomFrame rf = random_frame(rng);
    if (pairwise_tally(rf.argmax, rf.gt.edges).total == 0) continue;
    const double a = pairwise_accuracy(rf.argmax, rf.gt.edges);
    std::shuffle(rf.argmax.begin(), rf.argmax.end(), rng);
    CHECK(pairwise_accuracy(rf.argmax, rf.gt.edges) == a);
  }
}

TEST_CASE("confusion matrix") {
  const std::vector<RelationshipEdge> gt{{1, 0, RT::Following, 1},
                                         {2, 0, RT::HumanBehindVehicle, 1},
                                         {3, 4, RT::HumanBehindObstacle, 1},
                                         {5, 6, RT::ObstacleBehindSign, 1}};
  SUBCASE("perfect prediction is the identity on supported rows") {
    const std::vector<ConfusionFrame> frames{{gt, gt}};
    const ConfusionMatrix cm = confusion_matrix(frames);
    for (Eigen::Index r = 0; r < cm.rates.rows(); ++r) {
      const double s = cm.rates.row(r).sum();
      if (cm.counts.row(r).sum() == 0) {
        CHECK(s == 0.0);
        continue;
      }
      CHECK(s == doctest::Approx(1.0));
      CHECK(cm.rates(r, r) == 1.0);
    }
  }
  SUBCASE("merging the behind classes keeps row mass") {
    std::vector<RelationshipEdge> pred = gt;
    pred[1].rel = RT::HumanOnLane;
    pred[2].rel = RT::NoRelation;
    pred.pop_back();
    const std::vector<ConfusionFrame> frames{{pred, gt}};
    const MergeMap merge = common_behind_merge();
    const ConfusionMatrix plain = confusion_matrix(frames);
    const ConfusionMatrix merged = confusion_matrix(frames, &merge);
    const auto row = merged.label_index("common_behind");
    REQUIRE(row.has_value());
    CHECK_FALSE(merged.label_index(std::string(to_string(RT::HumanBehindVehicle))).has_value());
    CHECK(merged.labels.size() == plain.labels.size() - 2);
    CHECK(merged.counts.row(static_cast<Eigen::Index>(*row)).sum() == 3.0);
    CHECK(merged.rates.row(static_cast<Eigen::Index>(*row)).sum() == doctest::Approx(1.0));
    CHECK(merged.counts.sum() == plain.counts.sum());
  }
}

TEST_CASE("degree_stats") {
  SceneGraph g;
  for (int i = 0; i < 4; ++i) g.nodes.push_back(make_node(i, OC::Vehicle, 10.0 * i));
  g.edges = {{1, 0, RT::Following, 1}, {2, 1, RT::Following, 1}, {3, 2, RT::Following, 1}, {3, 0, RT::SameLane, 1}};
  const std::vector<SceneGraph> one{g};
  const DegreeStats d = degree_stats(one);
  CHECK(d.avg_edges_per_frame == 4.0);
  CHECK(d.avg_degree == 2.0);

  SceneGraph bare = g;
  bare.edges.clear();
  const std::vector<SceneGraph> none{bare, SceneGraph{}};
  const DegreeStats z = degree_stats(none);
  CHECK(z.avg_edges_per_frame == 0.0);
  CHECK(z.avg_degree == 0.0);
  CHECK(degree_stats(std::vector<SceneGraph>{}).avg_degree == 0.0);
}
