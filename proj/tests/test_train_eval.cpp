#include <doctest.h>

#include <cmath>
#include <random>

#include "rsg/dataset.hpp"
#include "rsg/synth_scenes.hpp"
#include "rsg/train_eval.hpp"
#include "support.hpp"

using namespace rsg;
using rsg::testing::make_node;
using RT = RelationshipType;
using OC = ObjectClass;

namespace {

// Independent piecewise evaluation of the paper-mode slope formula.
double paper_oracle(double x, double a, double b, double c, double d) {
  const double k = 2.0 / (d + c - a - b);
  if (a <= x && x < b) return k * (x - a) / (b - a);
  if (b <= x && x < c) return 1.0;
  if (c <= x && x <= d && d != c) return k * (d - x) / (d - c);
  return 0.0;
}

Dataset small_dataset(int scenes, std::uint64_t seed, double duration = 6.0) {
  GenConfig cfg;
  cfg.n_scenes = scenes;
  cfg.duration_s = duration;
  cfg.seed = seed;
  return generate_dataset(cfg);
}

}  // namespace

TEST_CASE("slope_weight_paper examples") {
  CHECK(slope_weight_paper(5, 0, 2, 8, 10) == 1.0);
  CHECK(slope_weight_paper(0, 0, 2, 8, 10) == 0.0);
  CHECK(slope_weight_paper(1, 0, 2, 8, 10) == doctest::Approx(0.0625));
  CHECK(slope_weight_paper(-1, 0, 2, 8, 10) == 0.0);
  CHECK(slope_weight_paper(11, 0, 2, 8, 10) == 0.0);
  CHECK(slope_weight_paper(9, 0, 2, 8, 10) == doctest::Approx(0.0625));
  CHECK_THROWS_AS(slope_weight_paper(1, 0, 3, 2, 4), ValidationError);
  // Degenerate ramps never divide.
  CHECK(slope_weight_paper(4, 4, 4, 6, 6) == 1.0);
  CHECK(slope_weight_paper(6, 4, 4, 6, 6) == 0.0);
}

TEST_CASE("slope_weight_continuous examples") {
  CHECK(slope_weight_continuous(2, 0, 2, 8, 10) == 1.0);
  CHECK(slope_weight_continuous(9, 0, 2, 8, 10) == doctest::Approx(0.5));
  CHECK(slope_weight_continuous(0.5, 0, 1, 1, 2) == doctest::Approx(0.5));
  CHECK(slope_weight_paper(0.5, 0, 1, 1, 2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(slope_weight_continuous(1, 2, 1, 3, 4), ValidationError);
}

TEST_CASE("slope weight properties over random breakpoints") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    double p[4];
    for (double& v : p) v = std::floor(u(rng) * 40.0) / 2.0;
    std::sort(p, p + 4);
    const double a = p[0], b = p[1], c = p[2], d = p[3];
    if (d + c - a - b <= 0) continue;
    const double bound = std::max(1.0, 2.0 / (d + c - a - b));
    for (int s = 0; s < 20; ++s) {
      const double x = a - 2 + u(rng) * (d - a + 4);
      const double wp = slope_weight_paper(x, a, b, c, d);
      const double wc = slope_weight_continuous(x, a, b, c, d);
      CHECK(wp == doctest::Approx(paper_oracle(x, a, b, c, d)));
      CHECK(wp >= 0.0);
      CHECK(wp <= bound + 1e-12);
      CHECK(wc >= 0.0);
      CHECK(wc <= 1.0);
      if (x < a || x > d) {
        CHECK(wp == 0.0);
        CHECK(wc == 0.0);
      }
      if (b <= x && x < c) {
        CHECK(wp == 1.0);
        CHECK(wc == 1.0);
      }
      if (std::abs(d + c - a - b - 2.0) < 1e-12) CHECK(wp == doctest::Approx(wc));
    }
    // Continuity of the continuous variant at the inner breakpoints.
    if (c > b && b > a) CHECK(std::abs(slope_weight_continuous(b - 1e-9, a, b, c, d) - 1.0) < 1e-8);
    if (c > b && d > c) CHECK(std::abs(slope_weight_continuous(c + 1e-9, a, b, c, d) - 1.0) < 1e-8);
  }
}

TEST_CASE("frame_loss") {
  SUBCASE("uniform logits, one pair") {
    ad::Tape t;
    const ad::Tensor logits = t.constant(ad::Matrix::Zero(1, 22));
    const EdgeTarget tg{index_of(RT::Following), 1.0};
    const ad::Matrix mask = ad::Matrix::Ones(1, 22);
    CHECK(frame_loss(t, logits, std::span<const EdgeTarget>(&tg, 1), mask).item() ==
          doctest::Approx(std::log(22.0)));
  }
  SUBCASE("weights renormalize") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    const ad::Matrix l = ad::Matrix::NullaryExpr(3, 22, [&] { return u(rng); });
    const ad::Matrix mask = ad::Matrix::Ones(3, 22);
    const std::vector<EdgeTarget> tg{{1, 0.5}, {21, 0.1}, {8, 1.0}};
    double num = 0, den = 0;
    for (int i = 0; i < 3; ++i) {
      const double lse = std::log(l.row(i).array().exp().sum());
      num += tg[i].weight * (lse - l(i, tg[i].cls));
      den += tg[i].weight;
    }
    ad::Tape t;
    CHECK(frame_loss(t, t.constant(l), tg, mask).item() == doctest::Approx(num / den));
  }
  SUBCASE("no pairs") {
    ad::Tape t;
    CHECK(frame_loss(t, t.constant(ad::Matrix::Zero(0, 22)), {}, ad::Matrix::Zero(0, 22)).item() == 0.0);
  }
}

TEST_CASE("frame_targets follow the interval window") {
  Scene s;
  s.scene_id = "t";
  for (int f = 0; f < 12; ++f) {
    SceneGraph g;
    g.frame_index = f;
    g.timestamp_s = 0.5 * f;
    g.nodes = {make_node(0, OC::Vehicle), make_node(1, OC::Vehicle, -10, 0, 5), make_node(2, OC::TrafficSign, 30, 6)};
    s.frames.push_back(g);
  }
  s.intervals = {{1, 0, RT::Following, 2, 4, 8, 10}};
  const PriorTable pt = PriorTable::from_counts(PriorTable::CountGrid{}, 1.0);
  auto target_of = [&](int frame, SlopeMode m) {
    const DualGraph dg = build_dense(s.frames[frame], pt);
    const auto tg = frame_targets(s, s.frames[frame], dg, m, 0.1);
    for (std::size_t e = 0; e < dg.size(); ++e) {
      if (dg.edge_nodes[e].subject_id == 0 && dg.edge_nodes[e].object_id == 1) return tg[e];
    }
    return EdgeTarget{};
  };
  CHECK(target_of(6, SlopeMode::Continuous).cls == index_of(RT::Following));
  CHECK(target_of(6, SlopeMode::Continuous).weight == 1.0);
  CHECK(target_of(3, SlopeMode::Continuous).weight == doctest::Approx(0.5));
  // Interval start: the pair is inside the window with weight 0.
  CHECK(target_of(2, SlopeMode::Continuous).cls == index_of(RT::Following));
  CHECK(target_of(2, SlopeMode::Continuous).weight == 0.0);
  CHECK(target_of(1, SlopeMode::Continuous).cls == index_of(RT::NoRelation));
  CHECK(target_of(1, SlopeMode::Continuous).weight == doctest::Approx(0.1));
  // Slope off: frames [3, 9) labeled with weight 1.
  CHECK(target_of(2, SlopeMode::Off).cls == index_of(RT::NoRelation));
  CHECK(target_of(3, SlopeMode::Off).weight == 1.0);
  CHECK(target_of(8, SlopeMode::Off).cls == index_of(RT::Following));
  CHECK(target_of(9, SlopeMode::Off).cls == index_of(RT::NoRelation));
}

TEST_CASE("optimizers leave parameters alone under zero gradient") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  ad::Parameter p("p", ad::Matrix::NullaryExpr(3, 5, [&] { return u(rng); }));
  const ad::Matrix before = p.value;
  std::vector<ad::Parameter*> ps{&p};
  Adam adam(1e-2);
  SgdMomentum sgd(1e-2);
  for (int i = 0; i < 5; ++i) {
    adam.step(ps);
    sgd.step(ps);
  }
  CHECK(p.value == before);

  // One Adam step moves each coordinate by about lr against the gradient sign.
  p.grad = ad::Matrix::Constant(3, 5, 0.3);
  Adam fresh(1e-2);
  fresh.step(ps);
  CHECK(((before - p.value).array() - 1e-2).abs().maxCoeff() < 1e-6);
}

TEST_CASE("split_dataset sizes") {
  auto sized = [](int n) {
    Dataset d;
    for (int i = 0; i < n; ++i) d.scenes.push_back(Scene{"s" + std::to_string(i), {}, {}});
    return d;
  };
  auto [tr, te] = split_dataset(sized(500), 0.1);
  CHECK(tr.scenes.size() == 450);
  CHECK(te.scenes.size() == 50);
  auto [tr2, te2] = split_dataset(sized(10), 0.1);
  CHECK(tr2.scenes.size() == 9);
  CHECK(te2.scenes.size() == 1);
  auto [tr3, te3] = split_dataset(sized(3), 0.5);
  CHECK(tr3.scenes.size() == 1);
  CHECK(te3.scenes.size() == 2);
  CHECK(te3.scenes.back().scene_id == "s2");
  CHECK_THROWS_AS(split_dataset(sized(0), 0.1), ValidationError);
  CHECK_THROWS_AS(split_dataset(sized(5), 1.0), ValidationError);
}

TEST_CASE("train: errors, determinism and a falling loss") {
  ModelConfig mc;
  mc.hidden_dim = 16;
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train(Dataset{}, PriorTable{}, mc, tc), ValidationError);
  tc.epochs = 0;
  CHECK_THROWS_AS(tc.validate(), ValidationError);

  const Dataset d = small_dataset(12, 3);
  const PriorTable pt = compute_priors(d);
  tc.epochs = 6;
  tc.learning_rate = 3e-3;
  tc.seed = 5;
  const TrainResult a = train(d, pt, mc, tc);
  const TrainResult b = train(d, pt, mc, tc);
  CHECK(a.params == b.params);
  REQUIRE(a.history.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(a.history[i].mean_loss == b.history[i].mean_loss);
  // Two-epoch moving average does not rise over the first five epochs.
  for (std::size_t i = 2; i + 1 < 6; ++i) {
    const double prev = 0.5 * (a.history[i - 2].mean_loss + a.history[i - 1].mean_loss);
    const double cur = 0.5 * (a.history[i - 1].mean_loss + a.history[i].mean_loss);
    CHECK(cur <= prev * 1.02);
  }
  CHECK(a.history.back().mean_loss < a.history.front().mean_loss);
}

TEST_CASE("oracle predictor scores perfectly") {
  const Dataset d = small_dataset(40, 7, 10.0);
  std::size_t most = 0;
  RecallAccumulator bound15;
  for (const auto& s : d.scenes) {
    for (const auto& f : s.frames) {
      const auto n = collapse_groups(f).edges.size();
      most = std::max(most, n);
      if (n > 0) bound15.add(std::min(1.0, 15.0 / double(n)));
    }
  }
  const int k_all = static_cast<int>(most);
  const std::vector<int> ks{15, k_all};
  const EvalReport r = evaluate(d, oracle_predictor(), ks);
  CHECK(r.pairwise_accuracy == 1.0);
  CHECK(r.r_at.at(k_all) == 1.0);
  // Frames with more than K related pairs cap recall at K / |gt|.
  CHECK(r.r_at.at(15) == doctest::Approx(bound15.mean()).epsilon(1e-12));
  CHECK(r.avg_degree_gt == doctest::Approx(r.avg_degree_pred));
  CHECK_THROWS_AS(evaluate(d, oracle_predictor(), std::vector<int>{0}), ValidationError);
}
