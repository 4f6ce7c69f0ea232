#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "rsg/graph_build.hpp"
#include "rsg/synth_scenes.hpp"
#include "support.hpp"

using namespace rsg;
using rsg::testing::make_node;
using OC = ObjectClass;

namespace {

PriorTable uniform_priors() { return PriorTable::from_counts(PriorTable::CountGrid{}, 1.0); }

}  // namespace

TEST_CASE("dense graph sizes") {
  const PriorTable pt = uniform_priors();
  std::mt19937_64 rng(1);
  for (int n = 0; n <= 50; ++n) {
    const DualGraph dg = build_dense(testing::random_graph(rng, n, 0.0), pt);
    CHECK(dg.object_nodes.size() == std::size_t(n));
    CHECK(dg.size() == std::size_t(n * (n - 1) / 2));
    CHECK(dg.edge_adjacency.size() == dg.size());
  }
}

TEST_CASE("two nodes give one edge with coordinate differences and the prior") {
  const PriorTable pt = uniform_priors();
  SceneGraph g;
  g.nodes = {make_node(9, OC::Human, 3, 4), make_node(2, OC::Vehicle, 0, 0)};
  const DualGraph dg = build_dense(g, pt);
  REQUIRE(dg.size() == 1);
  const CandidateEdge& ce = dg.edge_nodes[0];
  CHECK(ce.subject_id == 2);
  CHECK(ce.object_id == 9);
  CHECK(ce.feat[0] == 3.0);
  CHECK(ce.feat[1] == 4.0);
  CHECK(ce.feat[2] == 0.0);
  CHECK(ce.feat[3] == 0.0);
  CHECK(ce.distance() == doctest::Approx(5.0));
  const auto& prior = pt.prior_vector(OC::Vehicle, OC::Human);
  for (std::size_t r = 0; r < kNumRelationships; ++r) CHECK(ce.feat[kEdgeGeomDim + r] == prior[r]);

  SceneGraph h;
  h.nodes = {make_node(0, OC::Vehicle, 0, 0), make_node(1, OC::Vehicle, 3, 4)};
  const auto e = build_dense(h, pt).edge_nodes.at(0);
  CHECK(e.feat[0] == 3.0);
  CHECK(e.feat[1] == 4.0);
}

TEST_CASE("dual graph structure is consistent") {
  const PriorTable pt = uniform_priors();
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 12;
    const DualGraph dg = build_dense(testing::random_graph(rng, n, 0.0), pt);
    std::set<std::pair<int, int>> pairs;
    for (std::size_t e = 0; e < dg.size(); ++e) {
      const auto& ce = dg.edge_nodes[e];
      CHECK(ce.subject_id < ce.object_id);
      CHECK(dg.object_nodes[ce.subject_node].id == ce.subject_id);
      CHECK(dg.object_nodes[ce.object_node].id == ce.object_id);
      pairs.emplace(ce.subject_id, ce.object_id);
      // Brute-force neighbor set: other edges sharing an endpoint.
      std::vector<int> expect;
      for (std::size_t f = 0; f < dg.size(); ++f) {
        if (f == e) continue;
        const auto& cf = dg.edge_nodes[f];
        if (cf.subject_node == ce.subject_node || cf.subject_node == ce.object_node ||
            cf.object_node == ce.subject_node || cf.object_node == ce.object_node) {
          expect.push_back(static_cast<int>(f));
        }
      }
      CHECK(dg.edge_adjacency[e] == expect);
      for (int f : dg.edge_adjacency[e]) {
        const auto& back = dg.edge_adjacency[static_cast<std::size_t>(f)];
        CHECK(std::find(back.begin(), back.end(), static_cast<int>(e)) != back.end());
      }
    }
    CHECK(pairs.size() == dg.size());
  }
}

TEST_CASE("triangle: each edge pools two neighbors") {
  SceneGraph g;
  g.nodes = {make_node(0, OC::Vehicle), make_node(1, OC::Vehicle, 5), make_node(2, OC::Human, 5, 5)};
  const DualGraph dg = build_dense(g, uniform_priors());
  for (const auto& adj : dg.edge_adjacency) CHECK(adj.size() == 2);
}

TEST_CASE("prune_candidates") {
  const PriorTable pt = uniform_priors();
  SceneGraph g;
  g.nodes = {make_node(0, OC::Vehicle), make_node(1, OC::Vehicle, 20), make_node(2, OC::Obstacle, 100)};
  const DualGraph dg = build_dense(g, pt);
  REQUIRE(dg.size() == 3);

  SUBCASE("one far pair goes, the rest stays") {
    const DualGraph p = prune_candidates(dg, 90.0);
    CHECK(p.size() == 2);
    for (const auto& ce : p.edge_nodes) CHECK_FALSE((ce.subject_id == 0 && ce.object_id == 2));
    for (const auto& adj : p.edge_adjacency) {
      for (int f : adj) CHECK(f < static_cast<int>(p.size()));
    }
  }
  SUBCASE("identity when everything is in range") {
    CHECK(prune_candidates(dg, std::numeric_limits<double>::infinity()).size() == 3);
    CHECK(prune_candidates(dg, 100.0).size() == 3);
  }
  SUBCASE("nonpositive range is rejected") {
    CHECK_THROWS_AS(prune_candidates(dg, 0.0), ValidationError);
    CHECK_THROWS_AS(prune_candidates(dg, -1.0), ValidationError);
  }
}

TEST_CASE("generator ground truth survives default pruning") {
  GenConfig cfg;
  cfg.n_scenes = 60;
  cfg.seed = 12;
  const Dataset d = generate_dataset(cfg);
  const PriorTable pt = uniform_priors();
  std::size_t checked = 0;
  for (const auto& s : d.scenes) {
    for (const auto& f : s.frames) {
      const SceneGraph c = collapse_groups(f);
      const DualGraph p = prune_candidates(build_dense(c, pt));
      std::set<PairKey> kept;
      for (const auto& ce : p.edge_nodes) kept.insert(pair_key(ce.subject_id, ce.object_id));
      for (const auto& e : c.edges) {
        CHECK(kept.count(pair_key(e.subject_id, e.object_id)) == 1);
        ++checked;
      }
    }
  }
  CHECK(checked > 1000);
}
