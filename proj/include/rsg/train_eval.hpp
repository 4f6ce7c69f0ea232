#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsg/metrics.hpp"

namespace rsg {

enum class SlopeMode { Off, Paper, Continuous };

std::string_view to_string(SlopeMode m);
SlopeMode parse_slope_mode(std::string_view s);

/// Piecewise weight: 2/(d+c-a-b) * (x-a)/(b-a) on [a,b), 1 on
/// [b,c), 2/(d+c-a-b) * (d-x)/(d-c) on [c,d], 0 elsewhere. Empty ramps
/// (b == a or d == c) contribute nothing.
double slope_weight_paper(double x, double a, double b, double c, double d);

/// Linear 0 -> 1 on [a,b), 1 on [b,c), linear 1 -> 0 on [c,d], 0 elsewhere.
double slope_weight_continuous(double x, double a, double b, double c, double d);

/// Training target of one edge node.
struct EdgeTarget {
  int cls = static_cast<int>(RelationshipType::NoRelation);
  double weight = 0;
};

/// Targets for every edge node of `dual` at this frame. With slope Off an
/// interval labels frames in [(a+b)/2, (c+d)/2) with weight 1; otherwise
/// every frame in [a, d] gets the interval's type weighted by the slope
/// function. Unlabeled pairs get NoRelation with `no_relation_weight`.
std::vector<EdgeTarget> frame_targets(const Scene& scene, const SceneGraph& frame,
                                      const DualGraph& dual, SlopeMode mode,
                                      double no_relation_weight);

/// sum_pairs w * CE(masked softmax, target) / sum_pairs w; 0 for no pairs or
/// zero total weight.
ad::Tensor frame_loss(ad::Tape& tape, const ad::Tensor& logits,
                      std::span<const EdgeTarget> targets, const ad::Matrix& mask);

enum class OptimizerKind { Adam, SgdMomentum };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double no_relation_downweight = 0.1;
  SlopeMode slope = SlopeMode::Continuous;
  std::uint64_t seed = 0;
  std::optional<int> layers;
  double max_dist = 60.0;
  double validation_fraction = 0.1;

  void validate() const;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::span<ad::Parameter* const> params) = 0;
};

class Adam final : public Optimizer {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::span<ad::Parameter* const> params) override;

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<ad::Matrix> m_, v_;
};

class SgdMomentum final : public Optimizer {
 public:
  SgdMomentum(double lr, double momentum = 0.9) : lr_(lr), momentum_(momentum) {}
  void step(std::span<ad::Parameter* const> params) override;

 private:
  double lr_, momentum_;
  std::vector<ad::Matrix> velocity_;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0;
  /// NaN when the internal validation split has no related pairs.
  double val_accuracy = 0;
};

struct TrainResult {
  ModelParameters params;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Per-frame optimization over scenes shuffled each epoch (frames in order).
/// The last validation_fraction of the scenes is held out for the
/// per-epoch accuracy. Throws NumericError when the loss turns non-finite.
TrainResult train(const Dataset& train_set, const PriorTable& pt, ModelConfig mcfg,
                  const TrainConfig& tcfg, const EpochCallback& on_epoch = {});

/// Produces a prediction for one frame of a scene.
using Predictor = std::function<Prediction(const Scene&, const SceneGraph&)>;

Predictor model_predictor(const PriorTable& pt, const ModelParameters& params,
                          double max_dist = 60.0);

/// Emits the collapsed ground truth with confidence 1; used to check the
/// evaluation plumbing.
Predictor oracle_predictor();

struct FrameResult {
  std::string scene_id;
  int frame_index = 0;
  Prediction prediction;
  std::vector<RelationshipEdge> gt;
};

/// Runs the predictor over every frame of `data` and aggregates R@K, pairwise
/// accuracy, the confusion matrix and degree statistics.
EvalReport evaluate(const Dataset& data, const Predictor& predictor, std::span<const int> ks,
                    const MergeMap* merge = nullptr, std::vector<FrameResult>* frames = nullptr);

/// Random frame of `n_nodes` objects of random classes within a 40 m box,
/// labeled with random valid relationships.
Scene random_check_scene(std::uint64_t seed, int n_nodes = 4);

/// Finite-difference check of the full training loss (forward, masked
/// softmax, weighted cross-entropy) on random_check_scene(seed).
ad::GradCheckReport model_gradient_check(const ModelConfig& cfg, std::uint64_t seed,
                                         int n_nodes = 4, std::size_t max_coords = 200);

}  // namespace rsg
