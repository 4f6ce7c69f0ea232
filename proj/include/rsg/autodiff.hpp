#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rsg/errors.hpp"

/// Minimal reverse-mode differentiation over dense row-major matrices.
///
/// A Tape records every operation of one forward pass together with a
/// closure that propagates the output gradient to its inputs. Tensors are
/// lightweight handles into a tape; the tape owns values and gradients.
/// Everything is 2-D: vectors are 1xN rows, scalars are 1x1.
namespace rsg::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// A persistent learnable array. Gradients from any tape that binds it are
/// added into `grad`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Index size() const { return value.size(); }
  bool operator==(const Parameter& o) const { return name == o.name && value == o.value; }
};

class Tape;

class Tensor {
 public:
  Tensor() = default;

  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  std::array<Index, 2> shape() const { return {rows(), cols()}; }
  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;
  /// Scalar value of a 1x1 tensor.
  double item() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Tensor(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the gradient of the node's output and pushes contributions to
  /// the node's inputs via Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  /// Leaf owned by the tape. Its gradient accumulates across backward calls.
  Tensor variable(Matrix value);
  /// Leaf backed by a Parameter; each backward pass adds into p.grad.
  Tensor bind(Parameter& p);

  /// Reverse sweep from a 1x1 loss. Intermediate gradients are reset on each
  /// call; tape-owned variables and bound parameters accumulate.
  void backward(const Tensor& loss);

  Tensor record(Matrix value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op);
  void accumulate(std::size_t id, const Matrix& g);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool grad_enabled() const { return grad_enabled_; }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool leaf = true;
    Parameter* sink = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    const char* op = "leaf";
  };

  Tensor push_leaf(Matrix value, bool requires_grad, Parameter* sink);

  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

// Primitive operations. All inputs must live on the same tape.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// Elementwise sum; `b` may also be a 1 x cols row vector added to every row.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, Index begin, Index count);
/// Column-wise mean over rows, 1 x cols. An empty input yields zeros.
Tensor mean_rows(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor softmax_rows(const Tensor& a);

/// sum_i weight[i] * -log softmax(logits_i)[target[i]].
///
/// With a mask (rows x classes, entries 0 or 1) the softmax runs over the
/// classes whose mask entry is 1 only; masked classes get probability 0.
Tensor weighted_softmax_cross_entropy(const Tensor& logits, std::span<const int> targets,
                                      std::span<const double> weights,
                                      const Matrix* mask = nullptr);

/// Row-wise softmax restricted to mask==1 entries (plain evaluation).
Matrix masked_softmax(const Matrix& logits, const Matrix* mask = nullptr);

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients of `loss_fn` with central differences
/// (f(p+eps) - f(p-eps)) / (2 eps). Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8). When the parameters hold more than
/// `max_coords` entries a seeded random subset is checked. Parameter
/// gradients are overwritten.
GradCheckReport gradient_check(const std::function<Tensor(Tape&)>& loss_fn,
                               std::span<Parameter* const> params, double eps = 1e-5,
                               std::size_t max_coords = 200, std::uint64_t seed = 0);

/// Same check, but the central differences come from `reference_loss`, an
/// independent evaluation of the same function (typically in extended
/// precision) that reads the current parameter values. Double-precision
/// differences lose about eps_machine * |f| / eps in absolute accuracy, which
/// swamps coordinates whose gradient is below ~1e-7.
GradCheckReport gradient_check(const std::function<Tensor(Tape&)>& loss_fn,
                               std::span<Parameter* const> params,
                               const std::function<long double()>& reference_loss,
                               double eps = 1e-5, std::size_t max_coords = 200,
                               std::uint64_t seed = 0);

}  // namespace rsg::ad
