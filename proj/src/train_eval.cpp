#include "rsg/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace rsg {

namespace {

void check_breakpoints(double a, double b, double c, double d) {
  if (!(a <= b && b <= c && c <= d)) {
    throw ValidationError("breakpoint order violated: need a <= b <= c <= d");
  }
}

struct TrainingExample {
  DualGraph dual;
  std::vector<EdgeTarget> targets;
  ad::Matrix mask;
};

std::vector<TrainingExample> prepare(const Dataset& data, const PriorTable& pt,
                                     const TrainConfig& cfg) {
  std::vector<TrainingExample> out;
  out.reserve(data.frame_count());
  for (const auto& scene : data.scenes) {
    for (const auto& frame : scene.frames) {
      TrainingExample ex;
      ex.dual = prune_candidates(build_dense(collapse_groups(frame), pt), cfg.max_dist);
      ex.targets = frame_targets(scene, frame, ex.dual, cfg.slope, cfg.no_relation_downweight);
      ex.mask = class_mask(ex.dual);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

/// frame_loss evaluated directly on plain logits.
template <typename Scalar>
Scalar reference_frame_loss(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& logits,
                            std::span<const EdgeTarget> targets, const ad::Matrix& mask) {
  using std::exp;
  using std::log;
  Scalar total = 0, loss = 0;
  for (std::size_t e = 0; e < targets.size(); ++e) {
    const auto row = static_cast<Eigen::Index>(e);
    Scalar top = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      if (mask(row, c) != 0) top = std::max(top, logits(row, c));
    }
    Scalar z = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      if (mask(row, c) != 0) z += exp(logits(row, c) - top);
    }
    const Scalar w = targets[e].weight;
    loss += w * (log(z) + top - logits(row, targets[e].cls));
    total += w;
  }
  return total > 0 ? loss / total : Scalar(0);
}

}  // namespace

std::string_view to_string(SlopeMode m) {
  switch (m) {
    case SlopeMode::Off:
      return "off";
    case SlopeMode::Paper:
      return "paper";
    case SlopeMode::Continuous:
      return "continuous";
  }
  return "?";
}

SlopeMode parse_slope_mode(std::string_view s) {
  if (s == "off") return SlopeMode::Off;
  if (s == "paper") return SlopeMode::Paper;
  if (s == "continuous") return SlopeMode::Continuous;
  throw ValidationError("unknown slope mode '" + std::string(s) + "'");
}

std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adam" : "sgd_momentum";
}

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::SgdMomentum;
  throw ValidationError("unknown optimizer '" + std::string(s) + "'");
}

double slope_weight_paper(double x, double a, double b, double c, double d) {
  check_breakpoints(a, b, c, d);
  if (x < a || x > d) return 0.0;
  const double span = d + c - a - b;
  if (x < b) return 2.0 / span * (x - a) / (b - a);
  if (x < c) return 1.0;
  if (d > c) return 2.0 / span * (d - x) / (d - c);
  return 0.0;
}

double slope_weight_continuous(double x, double a, double b, double c, double d) {
  check_breakpoints(a, b, c, d);
  if (x < a || x > d) return 0.0;
  if (x < b) return (x - a) / (b - a);
  if (x < c) return 1.0;
  if (d > c) return (d - x) / (d - c);
  return 0.0;
}

std::vector<EdgeTarget> frame_targets(const Scene& scene, const SceneGraph& frame,
                                      const DualGraph& dual, SlopeMode mode,
                                      double no_relation_weight) {
  const auto mapping = group_map(frame);
  auto root = [&](int id) {
    for (const auto& [m, r] : mapping) {
      if (m == id) return r;
    }
    return id;
  };
  const auto x = static_cast<double>(frame.frame_index);
  std::map<PairKey, EdgeTarget> labeled;
  for (const auto& iv : scene.intervals) {
    if (frame.find(iv.subject_id) == nullptr || frame.find(iv.object_id) == nullptr) continue;
    // Inside [a, d] the pair belongs to the interval even where the ramp
    // weight is 0; with slope off only the midpoint-labeled frames count.
    if (mode != SlopeMode::Off && (x < iv.a || x > iv.d)) continue;
    double w = 0;
    switch (mode) {
      case SlopeMode::Off:
        w = iv.labels_frame(x) ? 1.0 : 0.0;
        break;
      case SlopeMode::Paper:
        w = slope_weight_paper(x, iv.a, iv.b, iv.c, iv.d);
        break;
      case SlopeMode::Continuous:
        w = slope_weight_continuous(x, iv.a, iv.b, iv.c, iv.d);
        break;
    }
    if (mode == SlopeMode::Off && w <= 0.0) continue;
    const int s = root(iv.subject_id), o = root(iv.object_id);
    if (s == o) continue;
    auto [it, inserted] = labeled.emplace(pair_key(s, o), EdgeTarget{index_of(iv.rel), w});
    if (!inserted && w > it->second.weight) it->second = {index_of(iv.rel), w};
  }
  std::vector<EdgeTarget> out;
  out.reserve(dual.edge_nodes.size());
  for (const auto& ce : dual.edge_nodes) {
    auto it = labeled.find(pair_key(ce.subject_id, ce.object_id));
    out.push_back(it != labeled.end()
                      ? it->second
                      : EdgeTarget{index_of(RelationshipType::NoRelation), no_relation_weight});
  }
  return out;
}

ad::Tensor frame_loss(ad::Tape& tape, const ad::Tensor& logits,
                      std::span<const EdgeTarget> targets, const ad::Matrix& mask) {
  double total = 0;
  std::vector<int> cls;
  std::vector<double> w;
  cls.reserve(targets.size());
  w.reserve(targets.size());
  for (const auto& t : targets) {
    cls.push_back(t.cls);
    w.push_back(t.weight);
    total += t.weight;
  }
  if (targets.empty() || total <= 0.0) return tape.constant(ad::Matrix::Zero(1, 1));
  return ad::scale(ad::weighted_softmax_cross_entropy(logits, cls, w, &mask), 1.0 / total);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(no_relation_downweight >= 0.0)) throw ValidationError("no_relation_downweight must be >= 0");
  if (!(max_dist > 0.0)) throw ValidationError("max_dist must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("validation_fraction must lie in [0, 1)");
  }
  if (layers && *layers < 1) throw ValidationError("layers must be >= 1");
}

void Adam::step(std::span<ad::Parameter* const> params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * p.grad;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -=
        lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
  }
}

void SgdMomentum::step(std::span<ad::Parameter* const> params) {
  if (velocity_.empty()) {
    for (const auto* p : params) velocity_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    velocity_[k] = momentum_ * velocity_[k] + params[k]->grad;
    params[k]->value -= lr_ * velocity_[k];
  }
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg) {
  if (cfg.optimizer == OptimizerKind::Adam) {
    return std::make_unique<Adam>(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  }
  return std::make_unique<SgdMomentum>(cfg.learning_rate, cfg.momentum);
}

TrainResult train(const Dataset& train_set, const PriorTable& pt, ModelConfig mcfg,
                  const TrainConfig& tcfg, const EpochCallback& on_epoch) {
  tcfg.validate();
  if (train_set.scenes.empty()) throw ValidationError("empty dataset");
  if (tcfg.layers) mcfg.num_layers = *tcfg.layers;
  mcfg.validate();

  Dataset fit = train_set;
  Dataset held_out;
  if (tcfg.validation_fraction > 0.0 && train_set.scenes.size() >= 2) {
    std::tie(fit, held_out) = split_dataset(train_set, tcfg.validation_fraction);
  }

  const auto examples = prepare(fit, pt, tcfg);
  std::vector<std::size_t> scene_begin{0};
  for (const auto& s : fit.scenes) scene_begin.push_back(scene_begin.back() + s.frames.size());

  TrainResult result;
  result.params = init_parameters(mcfg);
  auto params = result.params.all();
  auto optimizer = make_optimizer(tcfg);
  std::mt19937_64 rng(tcfg.seed);
  std::vector<std::size_t> order(fit.scenes.size());

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::int64_t steps = 0;
    for (std::size_t si : order) {
      for (std::size_t fi = scene_begin[si]; fi < scene_begin[si + 1]; ++fi) {
        const auto& ex = examples[fi];
        if (ex.dual.size() == 0) continue;
        result.params.zero_grad();
        ad::Tape tape;
        const auto bound = bind(tape, result.params);
        const auto logits = forward(tape, ex.dual, bound, mcfg.num_layers);
        const auto loss = frame_loss(tape, logits, ex.targets, ex.mask);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw NumericError("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch));
        }
        tape.backward(loss);
        optimizer->step(params);
        loss_sum += value;
        ++steps;
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = steps == 0 ? 0.0 : loss_sum / static_cast<double>(steps);
    stats.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (!held_out.scenes.empty()) {
      PairwiseTally tally;
      const auto predictor = model_predictor(pt, result.params, tcfg.max_dist);
      for (const auto& scene : held_out.scenes) {
        for (const auto& frame : scene.frames) {
          const auto pred = predictor(scene, frame);
          tally += pairwise_tally(pred.graph.edges, collapse_groups(frame).edges);
        }
      }
      if (tally.total > 0) stats.val_accuracy = tally.accuracy();
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  result.params.zero_grad();
  return result;
}

Predictor model_predictor(const PriorTable& pt, const ModelParameters& params, double max_dist) {
  return [&pt, &params, max_dist](const Scene&, const SceneGraph& frame) {
    return predict(frame, pt, params, max_dist);
  };
}

Predictor oracle_predictor() {
  return [](const Scene&, const SceneGraph& frame) {
    Prediction p;
    p.graph = collapse_groups(frame);
    std::erase_if(p.graph.edges,
                  [](const auto& e) { return e.rel == RelationshipType::NoRelation; });
    for (auto& e : p.graph.edges) {
      e.confidence = 1.0;
      p.ranked.push_back({e.subject_id, e.object_id, e.rel, 1.0});
    }
    const auto n = p.graph.nodes.size();
    p.candidate_pairs = n < 2 ? 0 : n * (n - 1) / 2;
    rank_edges(p.ranked);
    return p;
  };
}

EvalReport evaluate(const Dataset& data, const Predictor& predictor, std::span<const int> ks,
                    const MergeMap* merge, std::vector<FrameResult>* frames) {
  for (int k : ks) {
    if (k <= 0) throw ValidationError("K must be positive");
  }
  EvalReport report;
  report.confusion = make_confusion(merge);
  std::map<int, RecallAccumulator> recall;
  PairwiseTally tally;
  std::vector<SceneGraph> gt_graphs, pred_graphs;
  for (const auto& scene : data.scenes) {
    for (const auto& frame : scene.frames) {
      auto pred = predictor(scene, frame);
      SceneGraph gt = collapse_groups(frame);
      std::erase_if(gt.edges, [](const auto& e) { return e.rel == RelationshipType::NoRelation; });
      for (int k : ks) recall[k].add(recall_at_k(pred.ranked, gt.edges, k));
      tally += pairwise_tally(pred.graph.edges, gt.edges);
      report.confusion.add(pred.graph.edges, gt.edges);
      ++report.frames;
      if (frames != nullptr) {
        frames->push_back({scene.scene_id, frame.frame_index, pred, gt.edges});
      }
      pred_graphs.push_back(std::move(pred.graph));
      gt_graphs.push_back(std::move(gt));
    }
  }
  for (const auto& [k, acc] : recall) report.r_at[k] = acc.mean();
  report.related_pairs = tally.total;
  report.pairwise_accuracy = tally.accuracy();
  report.per_class_accuracy = tally.per_class_recall();
  report.confusion.normalize();
  const auto gt_stats = degree_stats(gt_graphs);
  report.avg_edges_per_frame = gt_stats.avg_edges_per_frame;
  report.avg_degree_gt = gt_stats.avg_degree;
  report.avg_degree_pred = degree_stats(pred_graphs).avg_degree;
  return report;
}

Scene random_check_scene(std::uint64_t seed, int n_nodes) {
  if (n_nodes < 2) throw ValidationError("need at least two nodes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-20.0, 20.0), vel(-3.0, 3.0), acc(-1.0, 1.0),
      ang(-3.0, 3.0);
  std::uniform_int_distribution<int> cls(0, static_cast<int>(kNumClasses) - 1);
  SceneGraph g;
  for (int i = 0; i < n_nodes; ++i) {
    ObjectNode n;
    n.id = i;
    n.cls = class_from_index(cls(rng));
    n.x = pos(rng);
    n.y = pos(rng);
    n.vx = vel(rng);
    n.vy = vel(rng);
    n.ax = acc(rng);
    n.ay = acc(rng);
    n.yaw = ang(rng);
    g.nodes.push_back(n);
  }
  Scene s;
  s.scene_id = "check";
  for (int i = 0; i < n_nodes; ++i) {
    for (int j = i + 1; j < n_nodes; ++j) {
      const auto& a = g.nodes[static_cast<std::size_t>(i)];
      const auto& b = g.nodes[static_cast<std::size_t>(j)];
      std::vector<RelationshipType> options;
      for (std::size_t r = 0; r < kNumRelationships; ++r) {
        const auto rel = relation_from_index(static_cast<int>(r));
        if (is_valid(rel, a.cls, b.cls)) options.push_back(rel);
      }
      const auto rel = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
      if (rel == RelationshipType::NoRelation) continue;
      const auto canon = canonical_classes(rel);
      const bool forward = canon && canon->subject == a.cls;
      const int subj = forward ? a.id : b.id, obj = forward ? b.id : a.id;
      g.edges.push_back({subj, obj, rel, 1.0});
      s.intervals.push_back({subj, obj, rel, 0, 0, 1, 1});
    }
  }
  s.frames.push_back(std::move(g));
  return s;
}

ad::GradCheckReport model_gradient_check(const ModelConfig& cfg, std::uint64_t seed,
                                         int n_nodes, std::size_t max_coords) {
  cfg.validate();
  const Scene scene = random_check_scene(seed, n_nodes);
  const auto pt = PriorTable::from_counts(PriorTable::CountGrid{}, 1.0);
  const auto dual = build_dense(scene.frames.front(), pt);
  auto targets = frame_targets(scene, scene.frames.front(), dual, SlopeMode::Off, 0.1);
  const auto mask = class_mask(dual);
  ModelConfig mc = cfg;
  mc.seed = seed;
  auto params = init_parameters(mc);
  auto loss_fn = [&](ad::Tape& tape) {
    const auto bound = bind(tape, params);
    const auto logits = forward(tape, dual, bound, mc.num_layers);
    return frame_loss(tape, logits, targets, mask);
  };
  auto reference = [&]() -> long double {
    const auto logits = forward_reference_as<long double>(dual, params);
    return reference_frame_loss(logits, targets, mask);
  };
  return ad::gradient_check(loss_fn, params.all(), reference, 1e-5, max_coords, seed);
}

}  // namespace rsg
