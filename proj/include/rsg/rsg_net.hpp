#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "rsg/autodiff.hpp"
#include "rsg/graph_build.hpp"

namespace rsg {

inline constexpr int kNodeFeatDim = 13;
inline constexpr int kNumOutputClasses = static_cast<int>(kNumRelationships);

struct ModelConfig {
  int hidden_dim = 64;
  int num_layers = 4;
  double init_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// All learnable arrays. Weights are stored (out x in).
struct ModelParameters {
  ModelConfig config;
  ad::Parameter node_w, node_b;
  ad::Parameter edge_w, edge_b;
  ad::Parameter pool_subject, pool_object, pool_neighbors;
  ad::Parameter gate_w;
  ad::Parameter gru_xr, gru_hr, gru_xz, gru_hz, gru_xh, gru_hh;
  ad::Parameter out_w, out_b;

  std::vector<ad::Parameter*> all();
  std::vector<const ad::Parameter*> all() const;
  void zero_grad();
  std::size_t parameter_count() const;
  bool operator==(const ModelParameters&) const = default;
};

/// Uniform in [-s, s] with s = init_scale / sqrt(fan_in); biases zero.
ModelParameters init_parameters(const ModelConfig& cfg);

/// Raw 13-wide node vector: one-hot class, x, y, vx, vy, ax, ay, yaw, pitch, roll.
Eigen::VectorXd node_feature(const ObjectNode& n);

/// Fixed per-feature multipliers applied before the encoders so that meters
/// and m/s enter at comparable magnitudes.
const Eigen::VectorXd& node_feature_scale();
const Eigen::VectorXd& edge_feature_scale();

// Plain evaluation, column-vector convention (W * x).

template <typename Scalar>
struct GruWeights {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat xr, hr, xz, hz, xh, hh;
};

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sigmoid(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  return (Scalar(1) + (-x.array()).exp()).inverse().matrix();
}

/// r = s(Wxr f + Whr h), z = s(Wxz f + Whz h), c = tanh(Wxh f + Whh (r.h)),
/// h' = z.h + (1 - z).c
template <typename DerivedF, typename DerivedH>
Eigen::Matrix<typename DerivedF::Scalar, Eigen::Dynamic, 1> gru_step(
    const Eigen::MatrixBase<DerivedF>& f, const Eigen::MatrixBase<DerivedH>& h_prev,
    const GruWeights<typename DerivedF::Scalar>& w) {
  using Scalar = typename DerivedF::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Vec r = sigmoid<Scalar>(w.xr * f + w.hr * h_prev);
  const Vec z = sigmoid<Scalar>(w.xz * f + w.hz * h_prev);
  const Vec c = (w.xh * f + w.hh * r.cwiseProduct(h_prev)).array().tanh().matrix();
  return z.cwiseProduct(h_prev) + (Vec::Ones(z.size()) - z).cwiseProduct(c);
}

GruWeights<double> gru_weights(const ModelParameters& p);

/// Per-edge states of the dual graph for plain evaluation.
struct EdgeStates {
  Eigen::MatrixXd node_encoding;  // hidden x n_objects
  Eigen::MatrixXd edge_hidden;    // hidden x n_edges
};

/// Gated 3-way pooling of subject, object and mean neighbor-edge messages
/// for edge node `e`.
Eigen::VectorXd pool_messages(int e, const DualGraph& dual, const EdgeStates& states,
                              const ModelParameters& params);

/// Reference forward pass, one edge at a time, evaluated in `Scalar`
/// (instantiated for double and long double). Returns n_edges x 22 logits.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> forward_reference_as(
    const DualGraph& dual, const ModelParameters& params);

extern template Eigen::MatrixXd forward_reference_as<double>(const DualGraph&,
                                                             const ModelParameters&);
extern template Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>
forward_reference_as<long double>(const DualGraph&, const ModelParameters&);

ad::Matrix forward_reference(const DualGraph& dual, const ModelParameters& params);

// Tape evaluation, row convention (one edge node per row).

struct BoundParameters {
  ad::Tensor node_w, node_b, edge_w, edge_b;
  ad::Tensor pool_subject, pool_object, pool_neighbors, gate_w;
  ad::Tensor gru_xr, gru_hr, gru_xz, gru_hz, gru_xh, gru_hh;
  ad::Tensor out_w, out_b;
};

/// Registers the parameters on the tape (as constants when the tape has
/// gradients disabled).
BoundParameters bind(ad::Tape& tape, ModelParameters& params);

/// Batched GRU update; f and h are n_edges x hidden.
ad::Tensor gru_step(const ad::Tensor& f, const ad::Tensor& h, const BoundParameters& p);

/// Logits (n_edges x 22) for every edge node. Empty graphs give a 0 x 22 tensor.
ad::Tensor forward(ad::Tape& tape, const DualGraph& dual, const BoundParameters& p,
                   int num_layers);

/// 1 for classes valid for the pair's classes, 0 otherwise (n_edges x 22).
ad::Matrix class_mask(const DualGraph& dual);

/// Logits without gradient tracking.
ad::Matrix infer_logits(const DualGraph& dual, const ModelParameters& params);

struct ScoredEdge {
  int subject_id = 0;
  int object_id = 0;
  RelationshipType rel = RelationshipType::NoRelation;
  double confidence = 0;

  bool operator==(const ScoredEdge&) const = default;
};

/// Subject/object orientation for a predicted relation on pair (lo, hi):
/// the canonical subject class of `rel` decides; same-class pairs keep lo first.
ScoredEdge orient(const DualGraph& dual, const CandidateEdge& ce, RelationshipType rel,
                  double confidence);

struct Prediction {
  /// Collapsed nodes plus argmax edges (NoRelation omitted).
  SceneGraph graph;
  /// Every (pair, non-NoRelation class) with its masked probability, ranked by
  /// confidence descending then (subject, object, class).
  std::vector<ScoredEdge> ranked;
  /// Ground-truth pairs removed by pruning are absent from `ranked`.
  std::size_t candidate_pairs = 0;
};

void rank_edges(std::vector<ScoredEdge>& edges);

Prediction predict(const SceneGraph& g, const PriorTable& pt, const ModelParameters& params,
                   double max_dist = 60.0);

}  // namespace rsg
