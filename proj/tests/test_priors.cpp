#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "rsg/priors.hpp"
#include "rsg/synth_scenes.hpp"
#include "support.hpp"

using namespace rsg;
using rsg::testing::make_node;
using RT = RelationshipType;
using OC = ObjectClass;

namespace {

// Two vehicles for `frames` frames, Following labeled on frames [0, follow).
Dataset toy_dataset(int frames, int follow) {
  Scene s;
  s.scene_id = "toy";
  for (int f = 0; f < frames; ++f) {
    SceneGraph g;
    g.frame_index = f;
    g.timestamp_s = 0.5 * f;
    g.nodes = {make_node(0, OC::Vehicle), make_node(1, OC::Vehicle, -12, 0, 8)};
    s.frames.push_back(g);
  }
  s.intervals = {{1, 0, RT::Following, 0, 0, double(follow), double(follow)}};
  Dataset d;
  d.scenes = {s};
  return d;
}

double row_sum(const RelationDistribution& p) { return std::accumulate(p.begin(), p.end(), 0.0); }

}  // namespace

TEST_CASE("toy counts with alpha 0") {
  const PriorTable pt = compute_priors(toy_dataset(8, 6), 0.0);
  const auto& p = pt.prior_vector(OC::Vehicle, OC::Vehicle);
  CHECK(pt.counts(OC::Vehicle, OC::Vehicle)[index_of(RT::Following)] == 6);
  CHECK(pt.counts(OC::Vehicle, OC::Vehicle)[index_of(RT::NoRelation)] == 2);
  CHECK(p[index_of(RT::Following)] == doctest::Approx(0.75));
  CHECK(p[index_of(RT::NoRelation)] == doctest::Approx(0.25));
  for (std::size_t r = 0; r < kNumRelationships; ++r) {
    if (r == std::size_t(index_of(RT::Following)) || r == std::size_t(index_of(RT::NoRelation))) continue;
    CHECK(p[r] == 0.0);
  }
}

TEST_CASE("unseen class pair with alpha 1 is uniform over valid types") {
  const PriorTable pt = compute_priors(toy_dataset(8, 6), 1.0);
  const auto& p = pt.prior_vector(OC::Vehicle, OC::TrafficSign);
  const auto valid = valid_relationships(OC::Vehicle, OC::TrafficSign);
  for (std::size_t r = 0; r < kNumRelationships; ++r) {
    CHECK(p[r] == (valid.test(r) ? doctest::Approx(1.0 / double(valid.count())) : doctest::Approx(0.0)));
  }
  // Smoothed toy row: (6+1)/(8+8) for Following.
  CHECK(pt.prior_vector(OC::Vehicle, OC::Vehicle)[index_of(RT::Following)] == doctest::Approx(7.0 / 16.0));
  CHECK(pt.prior_vector(OC::Obstacle, OC::Obstacle)[index_of(RT::ObstacleGroup)] == doctest::Approx(0.5));
}

TEST_CASE("empty dataset is rejected") {
  CHECK_THROWS_AS(compute_priors(Dataset{}), ValidationError);
}

TEST_CASE("priors on generated data: normalization and mask soundness") {
  GenConfig cfg;
  cfg.n_scenes = 30;
  cfg.seed = 4;
  const Dataset d = generate_dataset(cfg);
  for (double alpha : {0.0, 0.5, 1.0}) {
    const PriorTable pt = compute_priors(d, alpha);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const auto ci = class_from_index(i), cj = class_from_index(j);
        const auto& p = pt.prior_vector(ci, cj);
        CHECK(std::abs(row_sum(p) - 1.0) < 1e-9);
        CHECK(p[index_of(RT::NoRelation)] > 0.0);
        const auto valid = valid_relationships(ci, cj);
        for (std::size_t r = 0; r < kNumRelationships; ++r) {
          if (!valid.test(r)) CHECK(p[r] == 0.0);
        }
      }
    }
  }
}

TEST_CASE("adding an occurrence never lowers its probability") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> cnt(0, 30), cls(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    PriorTable::CountGrid grid{};
    for (auto& row : grid) {
      for (auto& cell : row) {
        for (auto& v : cell) v = cnt(rng);
      }
    }
    // Only valid types carry counts.
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const auto m = valid_relationships(class_from_index(i), class_from_index(j));
        for (std::size_t r = 0; r < kNumRelationships; ++r) {
          if (!m.test(r)) grid[i][j][r] = 0;
        }
      }
    }
    const double alpha = (trial % 3) * 0.5;
    const auto ci = class_from_index(cls(rng)), cj = class_from_index(cls(rng));
    const auto opts = testing::valid_list(ci, cj, true);
    const RT r = opts[rng() % opts.size()];
    const double before = PriorTable::from_counts(grid, alpha).prior_vector(ci, cj)[index_of(r)];
    ++grid[index_of(ci)][index_of(cj)][index_of(r)];
    const double after = PriorTable::from_counts(grid, alpha).prior_vector(ci, cj)[index_of(r)];
    CHECK(after >= before);
  }
}
