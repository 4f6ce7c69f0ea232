#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rsg/autodiff.hpp"

using namespace rsg;
using namespace rsg::ad;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Contracts an op's output against a fixed random matrix so every output
// entry reaches the scalar loss with an O(1) weight.
double check_op(std::mt19937_64& rng, std::vector<Parameter>& inputs,
                const std::function<Tensor(Tape&, std::vector<Tensor>&)>& op) {
  Matrix probe;
  {
    Tape t;
    std::vector<Tensor> xs;
    for (auto& p : inputs) xs.push_back(t.bind(p));
    const Tensor y = op(t, xs);
    probe = random_matrix(rng, y.rows(), y.cols());
  }
  std::vector<Parameter*> ptrs;
  for (auto& p : inputs) ptrs.push_back(&p);
  auto loss = [&](Tape& t) {
    std::vector<Tensor> xs;
    for (auto& p : inputs) xs.push_back(t.bind(p));
    return sum(mul(op(t, xs), t.constant(probe)));
  };
  return gradient_check(loss, ptrs).max_rel_error;
}

}  // namespace

TEST_CASE("elementary values") {
  Tape t;
  const Tensor z = t.constant(Matrix::Zero(1, 1));
  CHECK(sigmoid(z).item() == 0.5);
  CHECK(ad::tanh(z).item() == 0.0);

  const Tensor logits = t.constant(Matrix::Zero(1, 22));
  const int target = 3;
  const double w = 1.0;
  const Tensor ce = weighted_softmax_cross_entropy(logits, std::span<const int>(&target, 1),
                                                   std::span<const double>(&w, 1));
  CHECK(ce.item() == doctest::Approx(std::log(22.0)).epsilon(1e-12));
  CHECK(ce.item() == doctest::Approx(3.0910).epsilon(1e-4));
}

TEST_CASE("backward basics") {
  SUBCASE("linear map gives the weights") {
    Tape t;
    Matrix wv(1, 3);
    wv << 2.0, -1.0, 0.5;
    const Tensor x = t.variable(Matrix::Ones(1, 3));
    const Tensor loss = sum(mul(t.constant(wv), x));
    t.backward(loss);
    CHECK(x.grad() == wv);
  }
  SUBCASE("sigmoid slope at zero") {
    Tape t;
    const Tensor x = t.variable(Matrix::Zero(1, 1));
    t.backward(sigmoid(x));
    CHECK(x.grad()(0, 0) == doctest::Approx(0.25));
  }
  SUBCASE("repeated backward accumulates into leaves") {
    Tape t;
    const Tensor x = t.variable(Matrix::Constant(1, 1, 3.0));
    const Tensor loss = sum(mul(x, x));
    t.backward(loss);
    t.backward(loss);
    CHECK(x.grad()(0, 0) == doctest::Approx(12.0));
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape t;
    const Tensor x = t.variable(Matrix::Ones(2, 2));
    CHECK_THROWS_AS(t.backward(x), NumericError);
  }
}

TEST_CASE("shape and finiteness errors") {
  Tape t;
  const Tensor a = t.constant(Matrix::Ones(2, 3));
  const Tensor b = t.constant(Matrix::Ones(2, 3));
  CHECK_THROWS_AS(matmul(a, b), NumericError);
  CHECK_THROWS_AS(add(a, t.constant(Matrix::Ones(3, 3))), NumericError);
  CHECK_THROWS_AS(slice_cols(a, 2, 2), NumericError);
  Matrix bad = Matrix::Ones(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(t.constant(bad), NumericError);
  const Tensor huge = t.constant(Matrix::Constant(1, 1, 1e308));
  CHECK_THROWS_AS(scale(huge, 10.0), NumericError);
}

TEST_CASE("gradient_check on a quadratic") {
  std::mt19937_64 rng(5);
  Parameter p("p", random_matrix(rng, 3, 4));
  std::vector<Parameter*> ps{&p};
  const auto rep = gradient_check([&](Tape& t) {
    const Tensor x = t.bind(p);
    return sum(mul(x, x));
  }, ps);
  CHECK(rep.coordinates == 12);
  CHECK(rep.max_rel_error < 1e-9);
}

TEST_CASE("gradient_check samples at most max_coords coordinates") {
  std::mt19937_64 rng(6);
  Parameter p("p", random_matrix(rng, 30, 30));
  std::vector<Parameter*> ps{&p};
  const auto rep = gradient_check([&](Tape& t) { return sum(sigmoid(t.bind(p))); }, ps, 1e-5, 200, 3);
  CHECK(rep.coordinates == 200);
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("per-op gradients match central differences") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const Index r = 1 + static_cast<Index>(rng() % 4), c = 1 + static_cast<Index>(rng() % 5),
                k = 1 + static_cast<Index>(rng() % 4);
    auto fresh = [&](std::initializer_list<std::pair<Index, Index>> shapes) {
      std::vector<Parameter> ps;
      int i = 0;
      for (auto [rr, cc] : shapes) ps.emplace_back("x" + std::to_string(i++), random_matrix(rng, rr, cc));
      return ps;
    };
    CAPTURE(trial);
    {
      auto ps = fresh({{r, k}, {k, c}});
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return matmul(x[0], x[1]); }) < 1e-6);
    }
    {
      auto ps = fresh({{r, k}, {c, k}});
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return matmul_nt(x[0], x[1]); }) < 1e-6);
    }
    {
      auto ps = fresh({{r, c}, {r, c}});
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return add(x[0], x[1]); }) < 1e-6);
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return sub(x[0], x[1]); }) < 1e-6);
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return mul(x[0], x[1]); }) < 1e-6);
    }
    {
      auto ps = fresh({{r, c}, {1, c}});
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return add(x[0], x[1]); }) < 1e-6);
    }
    {
      auto ps = fresh({{r, c}});
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return scale(x[0], -1.7); }) < 1e-6);
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return sigmoid(x[0]); }) < 1e-6);
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return ad::tanh(x[0]); }) < 1e-6);
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return mean_rows(x[0]); }) < 1e-6);
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return sum(x[0]); }) < 1e-6);
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return softmax_rows(x[0]); }) < 1e-6);
      const Index b = static_cast<Index>(rng() % static_cast<std::uint64_t>(c));
      CHECK(check_op(rng, ps, [&](Tape&, auto& x) { return slice_cols(x[0], b, c - b); }) < 1e-6);
    }
    {
      auto ps = fresh({{r, c}, {r, k}, {r, 2}});
      CHECK(check_op(rng, ps, [](Tape&, auto& x) { return concat_cols(std::span<const Tensor>(x)); }) < 1e-6);
    }
    {
      const Index classes = 2 + static_cast<Index>(rng() % 6);
      auto ps = fresh({{r, classes}});
      std::vector<int> targets;
      std::vector<double> weights;
      Matrix mask = Matrix::Ones(r, classes);
      for (Index i = 0; i < r; ++i) {
        targets.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(classes)));
        weights.push_back(0.1 + 0.9 * double(rng() % 10) / 9.0);
        for (Index j = 0; j < classes; ++j) {
          if (j != targets.back() && rng() % 3 == 0) mask(i, j) = 0;
        }
      }
      CHECK(check_op(rng, ps, [&](Tape&, auto& x) {
              return weighted_softmax_cross_entropy(x[0], targets, weights);
            }) < 1e-6);
      CHECK(check_op(rng, ps, [&](Tape&, auto& x) {
              return weighted_softmax_cross_entropy(x[0], targets, weights, &mask);
            }) < 1e-6);
    }
  }
}

TEST_CASE("masked softmax puts no mass on masked classes") {
  std::mt19937_64 rng(9);
  const Matrix logits = random_matrix(rng, 5, 7, -30, 30);
  Matrix mask = Matrix::Ones(5, 7);
  mask(0, 3) = mask(1, 0) = mask(4, 6) = 0;
  const Matrix p = masked_softmax(logits, &mask);
  for (Index i = 0; i < 5; ++i) {
    CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Index j = 0; j < 7; ++j) {
      if (mask(i, j) == 0) CHECK(p(i, j) == 0.0);
    }
  }
}

TEST_CASE("forward is bit-for-bit deterministic") {
  std::mt19937_64 rng(10);
  const Matrix a = random_matrix(rng, 4, 6), b = random_matrix(rng, 6, 3);
  auto run = [&] {
    Tape t;
    return softmax_rows(ad::tanh(matmul(t.constant(a), t.constant(b)))).value();
  };
  CHECK(run() == run());
}
