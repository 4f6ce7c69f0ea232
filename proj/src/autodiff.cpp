#include "rsg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace rsg::ad {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw NumericError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
}

Matrix checked(Matrix m, const char* op) {
  if (!m.allFinite()) throw NumericError(std::string(op) + ": non-finite result");
  return m;
}

Tape& same_tape(const Tensor& a, const Tensor& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw NumericError("operands belong to different tapes");
  }
  return *a.tape();
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Matrix& Tensor::value() const { return tape_->value(id_); }
const Matrix& Tensor::grad() const { return tape_->grad(id_); }
bool Tensor::requires_grad() const { return tape_->requires_grad(id_); }

double Tensor::item() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw NumericError("item() on non-scalar " + shape_str(v));
  return v(0, 0);
}

Tensor Tape::push_leaf(Matrix value, bool requires_grad, Parameter* sink) {
  if (!value.allFinite()) throw NumericError("leaf: non-finite value");
  Node n;
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.grad = Matrix::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.sink = sink;
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::constant(Matrix value) { return push_leaf(std::move(value), false, nullptr); }

Tensor Tape::variable(Matrix value) { return push_leaf(std::move(value), true, nullptr); }

Tensor Tape::bind(Parameter& p) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
  return push_leaf(p.value, true, &p);
}

Tensor Tape::record(Matrix value, std::vector<std::size_t> inputs, BackwardFn fn,
                    const char* op) {
  Node n;
  n.value = checked(std::move(value), op);
  n.leaf = false;
  n.op = op;
  if (grad_enabled_) {
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [&](std::size_t i) { return nodes_[i].requires_grad; });
  }
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  auto& n = nodes_[id];
  if (!n.requires_grad) return;
  n.grad += g;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw NumericError("backward: loss belongs to another tape");
  const auto& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw NumericError("backward: loss must be scalar, got " + shape_str(lv));
  }
  if (!nodes_[loss.id()].requires_grad) return;

  for (auto& n : nodes_) {
    if (!n.requires_grad) continue;
    if (!n.leaf || n.sink != nullptr) n.grad.setZero(n.value.rows(), n.value.cols());
  }
  nodes_[loss.id()].grad(0, 0) += 1.0;

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.leaf) continue;
    n.backward(*this, n.grad);
  }
  for (auto& n : nodes_) {
    if (n.sink != nullptr && n.requires_grad) n.sink->grad += n.grad;
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Matrix out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib},
                  [ia, ib](Tape& tp, const Matrix& g) {
                    if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
                    if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
                  },
                  "matmul");
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) shape_error("matmul_nt", av, bv);
  Matrix out(av.rows(), bv.rows());
  out.noalias() = av * bv.transpose();
  const auto ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib},
                  [ia, ib](Tape& tp, const Matrix& g) {
                    if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib));
                    if (tp.needs_grad(ib)) tp.accumulate(ib, g.transpose() * tp.value(ia));
                  },
                  "matmul_nt");
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const auto ia = a.id(), ib = b.id();
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return t.record(av + bv, {ia, ib},
                    [ia, ib](Tape& tp, const Matrix& g) {
                      tp.accumulate(ia, g);
                      tp.accumulate(ib, g);
                    },
                    "add");
  }
  if (bv.rows() == 1 && bv.cols() == av.cols()) {
    Matrix out = av.rowwise() + bv.row(0);
    return t.record(std::move(out), {ia, ib},
                    [ia, ib](Tape& tp, const Matrix& g) {
                      tp.accumulate(ia, g);
                      if (tp.needs_grad(ib)) tp.accumulate(ib, g.colwise().sum());
                    },
                    "add_row");
  }
  shape_error("add", av, bv);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("sub", av, bv);
  const auto ia = a.id(), ib = b.id();
  return t.record(av - bv, {ia, ib},
                  [ia, ib](Tape& tp, const Matrix& g) {
                    tp.accumulate(ia, g);
                    if (tp.needs_grad(ib)) tp.accumulate(ib, -g);
                  },
                  "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("mul", av, bv);
  const auto ia = a.id(), ib = b.id();
  return t.record(av.cwiseProduct(bv), {ia, ib},
                  [ia, ib](Tape& tp, const Matrix& g) {
                    if (tp.needs_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
                    if (tp.needs_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
                  },
                  "mul");
}

Tensor scale(const Tensor& a, double s) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  return t.record(a.value() * s, {ia},
                  [ia, s](Tape& tp, const Matrix& g) { tp.accumulate(ia, g * s); }, "scale");
}

Tensor sigmoid(const Tensor& a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix y = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  const std::size_t self = t.size();
  return t.record(std::move(y), {ia},
                  [ia, self](Tape& tp, const Matrix& g) {
                    const Matrix& yv = tp.value(self);
                    tp.accumulate(ia, g.cwiseProduct(yv.cwiseProduct((1.0 - yv.array()).matrix())));
                  },
                  "sigmoid");
}

Tensor tanh(const Tensor& a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  Matrix y = a.value().array().tanh().matrix();
  const std::size_t self = t.size();
  return t.record(std::move(y), {ia},
                  [ia, self](Tape& tp, const Matrix& g) {
                    const Matrix& yv = tp.value(self);
                    tp.accumulate(ia, (g.array() * (1.0 - yv.array().square())).matrix());
                  },
                  "tanh");
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw NumericError("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const Index rows = parts.front().rows();
  Index cols = 0;
  std::vector<std::size_t> ids;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Matrix out(rows, cols);
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.record(std::move(out), ids,
                  [ids, widths](Tape& tp, const Matrix& g) {
                    Index o = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (tp.needs_grad(ids[k])) tp.accumulate(ids[k], g.middleCols(o, widths[k]));
                      o += widths[k];
                    }
                  },
                  "concat_cols");
}

Tensor slice_cols(const Tensor& a, Index begin, Index count) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  if (begin < 0 || count < 0 || begin + count > av.cols()) {
    throw NumericError("slice_cols: range [" + std::to_string(begin) + ", " +
                       std::to_string(begin + count) + ") outside " + shape_str(av));
  }
  const auto ia = a.id();
  const Index rows = av.rows(), cols = av.cols();
  return t.record(av.middleCols(begin, count), {ia},
                  [ia, begin, count, rows, cols](Tape& tp, const Matrix& g) {
                    Matrix full = Matrix::Zero(rows, cols);
                    full.middleCols(begin, count) = g;
                    tp.accumulate(ia, full);
                  },
                  "slice_cols");
}

Tensor mean_rows(const Tensor& a) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  const Index rows = av.rows();
  Matrix out = rows == 0 ? Matrix::Zero(1, av.cols()) : Matrix(av.colwise().mean());
  const auto ia = a.id();
  return t.record(std::move(out), {ia},
                  [ia, rows](Tape& tp, const Matrix& g) {
                    if (rows == 0) return;
                    Matrix full = g.replicate(rows, 1) / static_cast<double>(rows);
                    tp.accumulate(ia, full);
                  },
                  "mean_rows");
}

Tensor sum(const Tensor& a) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  Matrix out(1, 1);
  out(0, 0) = av.sum();
  const auto ia = a.id();
  const Index rows = av.rows(), cols = av.cols();
  return t.record(std::move(out), {ia},
                  [ia, rows, cols](Tape& tp, const Matrix& g) {
                    tp.accumulate(ia, Matrix::Constant(rows, cols, g(0, 0)));
                  },
                  "sum");
}

Matrix masked_softmax(const Matrix& logits, const Matrix* mask) {
  if (mask != nullptr && (mask->rows() != logits.rows() || mask->cols() != logits.cols())) {
    shape_error("masked_softmax", logits, *mask);
  }
  Matrix p = Matrix::Zero(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < logits.cols(); ++j) {
      if (mask == nullptr || (*mask)(i, j) != 0.0) mx = std::max(mx, logits(i, j));
    }
    if (!std::isfinite(mx)) throw NumericError("masked_softmax: row with no admissible class");
    double z = 0;
    for (Index j = 0; j < logits.cols(); ++j) {
      if (mask == nullptr || (*mask)(i, j) != 0.0) {
        p(i, j) = std::exp(logits(i, j) - mx);
        z += p(i, j);
      }
    }
    p.row(i) /= z;
  }
  return p;
}

Tensor softmax_rows(const Tensor& a) {
  Tape& t = *a.tape();
  const auto ia = a.id();
  const std::size_t self = t.size();
  return t.record(masked_softmax(a.value()), {ia},
                  [ia, self](Tape& tp, const Matrix& g) {
                    const Matrix& y = tp.value(self);
                    Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
                    Matrix gx = y.cwiseProduct((g.colwise() - dots));
                    tp.accumulate(ia, gx);
                  },
                  "softmax_rows");
}

Tensor weighted_softmax_cross_entropy(const Tensor& logits, std::span<const int> targets,
                                      std::span<const double> weights, const Matrix* mask) {
  Tape& t = *logits.tape();
  const Matrix& lv = logits.value();
  const auto n = static_cast<std::size_t>(lv.rows());
  if (targets.size() != n || weights.size() != n) {
    throw NumericError("weighted_softmax_cross_entropy: " + std::to_string(n) + " rows but " +
                       std::to_string(targets.size()) + " targets and " +
                       std::to_string(weights.size()) + " weights");
  }
  Matrix p = masked_softmax(lv, mask);
  Matrix out(1, 1);
  out(0, 0) = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int k = targets[i];
    if (k < 0 || k >= lv.cols()) throw NumericError("weighted_softmax_cross_entropy: bad target");
    if (weights[i] == 0.0) continue;
    out(0, 0) -= weights[i] * std::log(p(static_cast<Index>(i), k));
  }
  const auto il = logits.id();
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  return t.record(std::move(out), {il},
                  [il, p = std::move(p), tg = std::move(tg), w = std::move(w)](
                      Tape& tp, const Matrix& g) {
                    Matrix gl = p;
                    for (std::size_t i = 0; i < tg.size(); ++i) {
                      const auto r = static_cast<Index>(i);
                      gl(r, tg[i]) -= 1.0;
                      gl.row(r) *= w[i] * g(0, 0);
                    }
                    tp.accumulate(il, gl);
                  },
                  "weighted_softmax_cross_entropy");
}

namespace {

GradCheckReport check_against(const std::function<Tensor(Tape&)>& loss_fn,
                              std::span<Parameter* const> params,
                              const std::function<long double()>& numeric_loss, double eps,
                              std::size_t max_coords, std::uint64_t seed) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    tape.backward(loss);
  }

  std::vector<std::pair<std::size_t, Index>> coords;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Index i = 0; i < params[k]->size(); ++i) coords.emplace_back(k, i);
  }
  if (coords.size() > max_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }

  GradCheckReport report;
  report.coordinates = coords.size();
  for (const auto& [k, i] : coords) {
    double& v = params[k]->value.data()[i];
    const double saved = v;
    v = saved + eps;
    const long double up = numeric_loss();
    v = saved - eps;
    const long double down = numeric_loss();
    v = saved;
    const auto numeric = static_cast<double>((up - down) / (2.0L * eps));
    const double analytic = params[k]->grad.data()[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic - numeric) / denom);
  }
  return report;
}

}  // namespace

GradCheckReport gradient_check(const std::function<Tensor(Tape&)>& loss_fn,
                               std::span<Parameter* const> params, double eps,
                               std::size_t max_coords, std::uint64_t seed) {
  auto eval = [&]() -> long double {
    Tape tape(false);
    return loss_fn(tape).item();
  };
  return check_against(loss_fn, params, eval, eps, max_coords, seed);
}

GradCheckReport gradient_check(const std::function<Tensor(Tape&)>& loss_fn,
                               std::span<Parameter* const> params,
                               const std::function<long double()>& reference_loss, double eps,
                               std::size_t max_coords, std::uint64_t seed) {
  return check_against(loss_fn, params, reference_loss, eps, max_coords, seed);
}

}  // namespace rsg::ad
