#include "rsg/rsg_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rsg {

namespace {

using ad::Matrix;
using ad::Tensor;

ad::Parameter make_weight(const std::string& name, int out, int in, double init_scale,
                          std::mt19937_64& rng) {
  Matrix w(out, in);
  const double s = init_scale / std::sqrt(static_cast<double>(in));
  if (s == 0.0) {
    w.setZero();
  } else {
    std::uniform_real_distribution<double> dist(-s, s);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  }
  return ad::Parameter(name, std::move(w));
}

ad::Parameter make_bias(const std::string& name, int n) {
  return ad::Parameter(name, Matrix::Zero(1, n));
}

template <typename Binder>
BoundParameters bind_with(ModelParameters& p, Binder&& b) {
  return BoundParameters{b(p.node_w),         b(p.node_b),        b(p.edge_w),
                         b(p.edge_b),         b(p.pool_subject),  b(p.pool_object),
                         b(p.pool_neighbors), b(p.gate_w),        b(p.gru_xr),
                         b(p.gru_hr),         b(p.gru_xz),        b(p.gru_hz),
                         b(p.gru_xh),         b(p.gru_hh),        b(p.out_w),
                         b(p.out_b)};
}

Matrix node_inputs(const DualGraph& dual) {
  Matrix x(static_cast<Eigen::Index>(dual.object_nodes.size()), kNodeFeatDim);
  const auto& scale = node_feature_scale();
  for (std::size_t i = 0; i < dual.object_nodes.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) =
        node_feature(dual.object_nodes[i]).cwiseProduct(scale).transpose();
  }
  return x;
}

Eigen::VectorXd edge_input(const CandidateEdge& ce) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(kEdgeFeatDim));
  for (std::size_t k = 0; k < kEdgeFeatDim; ++k) v(static_cast<Eigen::Index>(k)) = ce.feat[k];
  return v.cwiseProduct(edge_feature_scale());
}

Matrix edge_inputs(const DualGraph& dual) {
  Matrix x(static_cast<Eigen::Index>(dual.edge_nodes.size()), static_cast<Eigen::Index>(kEdgeFeatDim));
  for (std::size_t e = 0; e < dual.edge_nodes.size(); ++e) {
    x.row(static_cast<Eigen::Index>(e)) = edge_input(dual.edge_nodes[e]).transpose();
  }
  return x;
}

Eigen::MatrixXd as_col_major(const Matrix& m) { return Eigen::MatrixXd(m); }

}  // namespace

void ModelConfig::validate() const {
  if (num_layers < 1) throw ValidationError("num_layers must be >= 1");
  if (hidden_dim < 4) throw ValidationError("hidden_dim must be >= 4");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) {
    throw ValidationError("init_scale must be finite and nonnegative");
  }
}

std::vector<ad::Parameter*> ModelParameters::all() {
  return {&node_w,  &node_b,  &edge_w,  &edge_b,  &pool_subject, &pool_object,
          &pool_neighbors, &gate_w, &gru_xr, &gru_hr, &gru_xz, &gru_hz,
          &gru_xh,  &gru_hh,  &out_w,   &out_b};
}

std::vector<const ad::Parameter*> ModelParameters::all() const {
  auto ps = const_cast<ModelParameters*>(this)->all();
  return {ps.begin(), ps.end()};
}

void ModelParameters::zero_grad() {
  for (auto* p : all()) p->zero_grad();
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : all()) n += static_cast<std::size_t>(p->size());
  return n;
}

ModelParameters init_parameters(const ModelConfig& cfg) {
  cfg.validate();
  const int h = cfg.hidden_dim;
  const double s = cfg.init_scale;
  std::mt19937_64 rng(cfg.seed);
  ModelParameters p;
  p.config = cfg;
  p.node_w = make_weight("node_w", h, kNodeFeatDim, s, rng);
  p.node_b = make_bias("node_b", h);
  p.edge_w = make_weight("edge_w", h, static_cast<int>(kEdgeFeatDim), s, rng);
  p.edge_b = make_bias("edge_b", h);
  p.pool_subject = make_weight("pool_subject", h, h, s, rng);
  p.pool_object = make_weight("pool_object", h, h, s, rng);
  p.pool_neighbors = make_weight("pool_neighbors", h, h, s, rng);
  p.gate_w = make_weight("gate_w", 3, 3 * h, s, rng);
  p.gru_xr = make_weight("gru_xr", h, h, s, rng);
  p.gru_hr = make_weight("gru_hr", h, h, s, rng);
  p.gru_xz = make_weight("gru_xz", h, h, s, rng);
  p.gru_hz = make_weight("gru_hz", h, h, s, rng);
  p.gru_xh = make_weight("gru_xh", h, h, s, rng);
  p.gru_hh = make_weight("gru_hh", h, h, s, rng);
  p.out_w = make_weight("out_w", kNumOutputClasses, h, s, rng);
  p.out_b = make_bias("out_b", kNumOutputClasses);
  return p;
}

Eigen::VectorXd node_feature(const ObjectNode& n) {
  Eigen::VectorXd v(kNodeFeatDim);
  const auto oh = one_hot(n.cls);
  for (std::size_t k = 0; k < kNumClasses; ++k) v(static_cast<Eigen::Index>(k)) = oh[k];
  v.tail(9) << n.x, n.y, n.vx, n.vy, n.ax, n.ay, n.yaw, n.pitch, n.roll;
  return v;
}

const Eigen::VectorXd& node_feature_scale() {
  static const Eigen::VectorXd s = [] {
    Eigen::VectorXd v(kNodeFeatDim);
    v << 1, 1, 1, 1, 0.05, 0.2, 0.1, 0.5, 0.5, 0.5, 1, 1, 1;
    return v;
  }();
  return s;
}

const Eigen::VectorXd& edge_feature_scale() {
  static const Eigen::VectorXd s = [] {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(kEdgeFeatDim));
    v.head(4) << 0.05, 0.2, 0.1, 0.5;
    return v;
  }();
  return s;
}

GruWeights<double> gru_weights(const ModelParameters& p) {
  return {as_col_major(p.gru_xr.value), as_col_major(p.gru_hr.value),
          as_col_major(p.gru_xz.value), as_col_major(p.gru_hz.value),
          as_col_major(p.gru_xh.value), as_col_major(p.gru_hh.value)};
}

namespace {

template <typename Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Parameters converted to column-major matrices of the evaluation scalar.
template <typename Scalar>
struct ReferenceWeights {
  MatT<Scalar> node_w, edge_w, pool_subject, pool_object, pool_neighbors, gate_w, out_w;
  VecT<Scalar> node_b, edge_b, out_b;
  GruWeights<Scalar> gru;

  explicit ReferenceWeights(const ModelParameters& p)
      : node_w(p.node_w.value.cast<Scalar>()),
        edge_w(p.edge_w.value.cast<Scalar>()),
        pool_subject(p.pool_subject.value.cast<Scalar>()),
        pool_object(p.pool_object.value.cast<Scalar>()),
        pool_neighbors(p.pool_neighbors.value.cast<Scalar>()),
        gate_w(p.gate_w.value.cast<Scalar>()),
        out_w(p.out_w.value.cast<Scalar>()),
        node_b(p.node_b.value.row(0).transpose().cast<Scalar>()),
        edge_b(p.edge_b.value.row(0).transpose().cast<Scalar>()),
        out_b(p.out_b.value.row(0).transpose().cast<Scalar>()),
        gru{p.gru_xr.value.cast<Scalar>(), p.gru_hr.value.cast<Scalar>(),
            p.gru_xz.value.cast<Scalar>(), p.gru_hz.value.cast<Scalar>(),
            p.gru_xh.value.cast<Scalar>(), p.gru_hh.value.cast<Scalar>()} {}
};

template <typename Scalar>
VecT<Scalar> pool_at(int e, const DualGraph& dual, const MatT<Scalar>& node_encoding,
                     const MatT<Scalar>& edge_hidden, const ReferenceWeights<Scalar>& w) {
  using std::exp;
  const auto& ce = dual.edge_nodes.at(static_cast<std::size_t>(e));
  const Eigen::Index h = edge_hidden.rows();
  const VecT<Scalar> m1 = w.pool_subject * node_encoding.col(ce.subject_node);
  const VecT<Scalar> m2 = w.pool_object * node_encoding.col(ce.object_node);
  VecT<Scalar> pooled = VecT<Scalar>::Zero(h);
  const auto& adj = dual.edge_adjacency.at(static_cast<std::size_t>(e));
  for (int other : adj) pooled += edge_hidden.col(other);
  if (!adj.empty()) pooled /= static_cast<Scalar>(adj.size());
  const VecT<Scalar> m3 = w.pool_neighbors * pooled;

  VecT<Scalar> stacked(3 * h);
  stacked << m1, m2, m3;
  VecT<Scalar> gate = w.gate_w * stacked;
  gate = (gate.array() - gate.maxCoeff()).exp().matrix();
  gate /= gate.sum();
  return gate(0) * m1 + gate(1) * m2 + gate(2) * m3;
}

template <typename Scalar>
MatT<Scalar> node_encodings(const DualGraph& dual, const ReferenceWeights<Scalar>& w) {
  MatT<Scalar> enc(w.node_w.rows(), static_cast<Eigen::Index>(dual.object_nodes.size()));
  for (std::size_t i = 0; i < dual.object_nodes.size(); ++i) {
    const VecT<Scalar> x =
        node_feature(dual.object_nodes[i]).cwiseProduct(node_feature_scale()).cast<Scalar>();
    enc.col(static_cast<Eigen::Index>(i)) = w.node_w * x + w.node_b;
  }
  return enc;
}

}  // namespace

Eigen::VectorXd pool_messages(int e, const DualGraph& dual, const EdgeStates& states,
                              const ModelParameters& params) {
  const ReferenceWeights<double> w(params);
  return pool_at<double>(e, dual, states.node_encoding, states.edge_hidden, w);
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> forward_reference_as(
    const DualGraph& dual, const ModelParameters& params) {
  const int h = params.config.hidden_dim;
  const auto n_edges = static_cast<Eigen::Index>(dual.edge_nodes.size());
  MatT<Scalar> logits(n_edges, kNumOutputClasses);
  if (n_edges == 0) return logits;

  const ReferenceWeights<Scalar> w(params);
  const MatT<Scalar> nodes = node_encodings(dual, w);
  MatT<Scalar> hidden(h, n_edges);
  for (Eigen::Index e = 0; e < n_edges; ++e) {
    const VecT<Scalar> x = edge_input(dual.edge_nodes[static_cast<std::size_t>(e)]).cast<Scalar>();
    hidden.col(e) = w.edge_w * x + w.edge_b;
  }

  for (int t = 0; t < params.config.num_layers; ++t) {
    MatT<Scalar> next(h, n_edges);
    for (Eigen::Index e = 0; e < n_edges; ++e) {
      const VecT<Scalar> f = pool_at<Scalar>(static_cast<int>(e), dual, nodes, hidden, w);
      const VecT<Scalar> prev = hidden.col(e);
      next.col(e) = gru_step(f, prev, w.gru);
    }
    hidden = std::move(next);
  }
  for (Eigen::Index e = 0; e < n_edges; ++e) {
    logits.row(e) = (w.out_w * hidden.col(e) + w.out_b).transpose();
  }
  return logits;
}

template Eigen::MatrixXd forward_reference_as<double>(const DualGraph&, const ModelParameters&);
template Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>
forward_reference_as<long double>(const DualGraph&, const ModelParameters&);

Matrix forward_reference(const DualGraph& dual, const ModelParameters& params) {
  return forward_reference_as<double>(dual, params);
}

BoundParameters bind(ad::Tape& tape, ModelParameters& params) {
  if (tape.grad_enabled()) {
    return bind_with(params, [&](ad::Parameter& p) { return tape.bind(p); });
  }
  return bind_with(params, [&](ad::Parameter& p) { return tape.constant(p.value); });
}

Tensor gru_step(const Tensor& f, const Tensor& h, const BoundParameters& p) {
  const Tensor r = ad::sigmoid(ad::add(ad::matmul_nt(f, p.gru_xr), ad::matmul_nt(h, p.gru_hr)));
  const Tensor z = ad::sigmoid(ad::add(ad::matmul_nt(f, p.gru_xz), ad::matmul_nt(h, p.gru_hz)));
  const Tensor c =
      ad::tanh(ad::add(ad::matmul_nt(f, p.gru_xh), ad::matmul_nt(ad::mul(r, h), p.gru_hh)));
  // z.h + (1 - z).c  ==  c + z.(h - c)
  return ad::add(c, ad::mul(z, ad::sub(h, c)));
}

Tensor forward(ad::Tape& tape, const DualGraph& dual, const BoundParameters& p, int num_layers) {
  const auto n_edges = static_cast<Eigen::Index>(dual.edge_nodes.size());
  const auto n_nodes = static_cast<Eigen::Index>(dual.object_nodes.size());
  if (n_edges == 0) return tape.constant(Matrix(0, kNumOutputClasses));
  const Eigen::Index hidden = p.node_w.rows();

  Matrix pick_subject = Matrix::Zero(n_edges, n_nodes);
  Matrix pick_object = Matrix::Zero(n_edges, n_nodes);
  Matrix neighbor_mean = Matrix::Zero(n_edges, n_edges);
  for (Eigen::Index e = 0; e < n_edges; ++e) {
    const auto& ce = dual.edge_nodes[static_cast<std::size_t>(e)];
    pick_subject(e, ce.subject_node) = 1.0;
    pick_object(e, ce.object_node) = 1.0;
    const auto& adj = dual.edge_adjacency[static_cast<std::size_t>(e)];
    for (int other : adj) neighbor_mean(e, other) = 1.0 / static_cast<double>(adj.size());
  }

  const Tensor nodes = tape.constant(node_inputs(dual));
  const Tensor edges = tape.constant(edge_inputs(dual));
  const Tensor phi = ad::add(ad::matmul_nt(nodes, p.node_w), p.node_b);
  const Tensor m_subject =
      ad::matmul_nt(ad::matmul(tape.constant(std::move(pick_subject)), phi), p.pool_subject);
  const Tensor m_object =
      ad::matmul_nt(ad::matmul(tape.constant(std::move(pick_object)), phi), p.pool_object);
  const Tensor mean_op = tape.constant(std::move(neighbor_mean));
  const Tensor spread = tape.constant(Matrix::Ones(1, hidden));

  Tensor h = ad::add(ad::matmul_nt(edges, p.edge_w), p.edge_b);
  for (int t = 0; t < num_layers; ++t) {
    const Tensor m_neighbors = ad::matmul_nt(ad::matmul(mean_op, h), p.pool_neighbors);
    const std::array<Tensor, 3> parts{m_subject, m_object, m_neighbors};
    const Tensor alpha = ad::softmax_rows(ad::matmul_nt(ad::concat_cols(parts), p.gate_w));
    Tensor f = ad::mul(ad::matmul(ad::slice_cols(alpha, 0, 1), spread), m_subject);
    f = ad::add(f, ad::mul(ad::matmul(ad::slice_cols(alpha, 1, 1), spread), m_object));
    f = ad::add(f, ad::mul(ad::matmul(ad::slice_cols(alpha, 2, 1), spread), m_neighbors));
    h = gru_step(f, h, p);
  }
  return ad::add(ad::matmul_nt(h, p.out_w), p.out_b);
}

Matrix class_mask(const DualGraph& dual) {
  Matrix mask = Matrix::Zero(static_cast<Eigen::Index>(dual.edge_nodes.size()), kNumOutputClasses);
  for (std::size_t e = 0; e < dual.edge_nodes.size(); ++e) {
    const auto& ce = dual.edge_nodes[e];
    const auto valid = valid_relationships(dual.object_nodes[static_cast<std::size_t>(ce.subject_node)].cls,
                                           dual.object_nodes[static_cast<std::size_t>(ce.object_node)].cls);
    for (std::size_t r = 0; r < kNumRelationships; ++r) {
      if (valid.test(r)) mask(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(r)) = 1.0;
    }
  }
  return mask;
}

Matrix infer_logits(const DualGraph& dual, const ModelParameters& params) {
  ad::Tape tape(false);
  auto& mutable_params = const_cast<ModelParameters&>(params);  // constants only, never written
  const auto bound = bind(tape, mutable_params);
  return forward(tape, dual, bound, params.config.num_layers).value();
}

ScoredEdge orient(const DualGraph& dual, const CandidateEdge& ce, RelationshipType rel,
                  double confidence) {
  ScoredEdge out{ce.subject_id, ce.object_id, rel, confidence};
  if (auto cc = canonical_classes(rel)) {
    const auto lo = dual.object_nodes[static_cast<std::size_t>(ce.subject_node)].cls;
    const auto hi = dual.object_nodes[static_cast<std::size_t>(ce.object_node)].cls;
    if (cc->subject == hi && cc->subject != lo) std::swap(out.subject_id, out.object_id);
  }
  return out;
}

void rank_edges(std::vector<ScoredEdge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const ScoredEdge& l, const ScoredEdge& r) {
    if (l.confidence != r.confidence) return l.confidence > r.confidence;
    if (l.subject_id != r.subject_id) return l.subject_id < r.subject_id;
    if (l.object_id != r.object_id) return l.object_id < r.object_id;
    return index_of(l.rel) < index_of(r.rel);
  });
}

Prediction predict(const SceneGraph& g, const PriorTable& pt, const ModelParameters& params,
                   double max_dist) {
  Prediction out;
  const SceneGraph collapsed = collapse_groups(g);
  out.graph.frame_index = g.frame_index;
  out.graph.timestamp_s = g.timestamp_s;
  out.graph.nodes = collapsed.nodes;

  const DualGraph dual = prune_candidates(build_dense(collapsed, pt), max_dist);
  out.candidate_pairs = dual.size();
  if (dual.size() == 0) return out;

  const Matrix mask = class_mask(dual);
  const Matrix probs = ad::masked_softmax(infer_logits(dual, params), &mask);
  constexpr int kNone = static_cast<int>(RelationshipType::NoRelation);
  for (std::size_t e = 0; e < dual.edge_nodes.size(); ++e) {
    const auto row = static_cast<Eigen::Index>(e);
    const auto& ce = dual.edge_nodes[e];
    Eigen::Index best = 0;
    probs.row(row).maxCoeff(&best);
    if (best != kNone) {
      const auto se = orient(dual, ce, relation_from_index(static_cast<int>(best)), probs(row, best));
      out.graph.edges.push_back({se.subject_id, se.object_id, se.rel, se.confidence});
    }
    for (int r = 0; r < kNumOutputClasses; ++r) {
      if (r == kNone || mask(row, r) == 0.0) continue;
      out.ranked.push_back(orient(dual, ce, relation_from_index(r), probs(row, r)));
    }
  }
  rank_edges(out.ranked);
  return out;
}

}  // namespace rsg
