#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nrg/error.hpp"
#include "nrg/tensor/gradcheck.hpp"
#include "nrg/tensor/tape.hpp"

namespace {

using namespace nrg::tensor;

Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.5,
                     double hi = 1.5) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = d(rng);
  return t;
}

TEST(Tensor, ShapeInvariant) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), nrg::ShapeError);
  EXPECT_THROW(Tensor(Shape{0, 3}), nrg::ShapeError);
  Tensor t({2, 3});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.grad().size(), t.size());
}

TEST(Primitives, SoftmaxSymmetric) {
  Tape tape;
  Var x = tape.constant(Tensor({2}, {0.0, 0.0}));
  const Tensor& y = softmax(x).value();
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.5);
}

TEST(Primitives, IdentityMatmul) {
  std::mt19937_64 rng(3);
  Tape tape;
  Tensor eye = Tensor::matrix(3, 3);
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Tensor a = random_tensor(3, 3, rng);
  Var out = matmul(tape.input(eye), tape.input(a));
  EXPECT_TRUE(out.value().same_values(a));
}

TEST(Primitives, MaxWithZero) {
  Tape tape;
  Var x = tape.constant(Tensor({2}, {-0.1, 2.82}));
  const Tensor& y = relu(x).value();
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 2.82);
}

TEST(Primitives, ShapeMismatchNamesBothShapes) {
  Tape tape;
  Var a = tape.constant(Tensor::matrix(2, 3));
  Var b = tape.constant(Tensor::matrix(4, 5));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const nrg::ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
  EXPECT_THROW(add(a, b), nrg::ShapeError);
}

TEST(Primitives, NonFiniteOutputNamesOp) {
  Tape tape;
  Var x = tape.constant(Tensor({1}, {0.0}));
  try {
    log(x);
    FAIL() << "expected NumericError";
  } catch (const nrg::NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos);
  }
}

TEST(Primitives, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    Tape tape;
    Tensor a = random_tensor(dim(rng), dim(rng), rng, -30.0, 30.0);
    const Tensor& y = softmax(tape.input(a)).value();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) {
        total += y.at(r, c);
        EXPECT_GE(y.at(r, c), 0.0);
        EXPECT_LE(y.at(r, c), 1.0);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Backward, SumGivesOnes) {
  Tensor x({4}, {1.0, -2.0, 3.0, 0.5});
  Tape tape;
  tape.backward(sum(tape.param(x)));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, HingeAtZeroHasZeroSubgradient) {
  Tensor x({1}, {0.0});
  Tape tape;
  tape.backward(sum(relu(tape.param(x))));
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Backward, SecondCallRejected) {
  Tensor x({2}, {1.0, 2.0});
  Tape tape;
  Var loss = sum(tape.param(x));
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), nrg::StateError);
  EXPECT_THROW(sum(loss), nrg::StateError);
}

TEST(Backward, RequiresScalarLoss) {
  Tensor x({2}, {1.0, 2.0});
  Tape tape;
  EXPECT_THROW(tape.backward(tanh(tape.param(x))), nrg::ShapeError);
  Tape empty;
  Var dummy;
  EXPECT_THROW(empty.backward(dummy), nrg::StateError);
}

TEST(Backward, TanhMatmulMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  Tensor w = random_tensor(4, 3, rng);
  Tensor x = random_tensor(3, 1, rng);
  auto report = gradient_check(
      [&](Tape& t) { return sum(tanh(matmul(t.param(w), t.input(x)))); }, {{"W", &w}},
      {.step = 1e-6, .tolerance = 1e-4});
  EXPECT_TRUE(report.passed) << report.params[0].max_rel_error;
}

TEST(GradCheck, QuadraticClosedForm) {
  Tensor x({2}, {3.0, 4.0});
  auto build = [&](Tape& t) {
    Var v = t.param(x);
    return scale(sum(mul(v, v)), 0.5);
  };
  auto report = gradient_check(build, {{"x", &x}}, {.step = 1e-5, .tolerance = 1e-9});
  EXPECT_TRUE(report.passed);
  EXPECT_LE(report.params[0].max_rel_error, 1e-9);
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
}

TEST(GradCheck, ConstantLoss) {
  Tensor x({3}, {1.0, 2.0, 3.0});
  auto report = gradient_check([&](Tape& t) { return t.constant(Tensor::scalar(7.0)); }, {{"x", &x}});
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.params[0].max_rel_error, 0.0);
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(GradCheck, RejectsNonDeterministicBuilder) {
  Tensor x({1}, {1.0});
  int calls = 0;
  auto build = [&](Tape& t) { return sum(shift(t.param(x), ++calls)); };
  EXPECT_THROW(gradient_check(build, {{"x", &x}}), nrg::StateError);
  EXPECT_THROW(gradient_check(build, {{"x", &x}}, {.step = 0.0}), nrg::InvalidArgument);
}

// Finite-difference agreement for every primitive over random shapes up to 8x8.
// Each output is contracted with random weights so every gradient entry matters.
class PrimitiveGrad : public ::testing::TestWithParam<Op> {};

TEST_P(PrimitiveGrad, MatchesFiniteDifferences) {
  const Op op = GetParam();
  std::mt19937_64 rng(100 + static_cast<int>(op));
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t r = dim(rng), c = dim(rng), k = dim(rng);
    const bool positive = op == Op::kLog;
    Tensor a = random_tensor(r, c, rng, positive ? 0.2 : -1.5, positive ? 2.0 : 1.5);
    if (op == Op::kRelu) {
      for (double& v : a.values()) if (std::abs(v) < 1e-2) v = 0.5;
    }
    Tensor b = op == Op::kMatmul ? random_tensor(c, k, rng) : random_tensor(r, c, rng);
    Tensor row_b = random_tensor(1, c, rng);
    std::vector<std::size_t> ids(r);
    for (auto& id : ids) id = std::uniform_int_distribution<std::size_t>(0, c - 1)(rng);
    std::vector<std::size_t> rows_ids(k);
    for (auto& id : rows_ids) id = std::uniform_int_distribution<std::size_t>(0, r - 1)(rng);
    const std::size_t begin = std::uniform_int_distribution<std::size_t>(0, c - 1)(rng);
    const std::size_t count = std::uniform_int_distribution<std::size_t>(1, c - begin)(rng);

    auto apply_op = [&](Tape& t) -> Var {
      Var va = t.param(a);
      Var vb = t.param(b);
      switch (op) {
        case Op::kMatmul: return matmul(va, vb);
        case Op::kAdd: return add(add(va, vb), t.param(row_b));
        case Op::kSub: return sub(sub(va, vb), t.param(row_b));
        case Op::kMul: return mul(mul(va, vb), t.param(row_b));
        case Op::kScale: return scale(va, -1.7);
        case Op::kShift: return shift(va, 0.3);
        case Op::kTanh: return tanh(va);
        case Op::kSigmoid: return sigmoid(va);
        case Op::kSoftmax: return softmax(va);
        case Op::kLogSoftmax: return log_softmax(va);
        case Op::kConcat: return concat({va, vb, va});
        case Op::kEmbed: return embed(va, rows_ids);
        case Op::kLog: return log(va);
        case Op::kSum: return sum(va);
        case Op::kRelu: return relu(va);
        case Op::kPick: return pick(va, ids);
        case Op::kSliceCols: return slice_cols(va, begin, count);
        case Op::kLeaf: break;
      }
      return va;
    };
    Tensor weights;
    {
      Tape probe;
      weights = random_tensor(apply_op(probe).value().rows(), apply_op(probe).value().cols(), rng);
    }
    auto build = [&](Tape& t) { return sum(mul(apply_op(t), t.input(weights))); };
    auto report = gradient_check(build, {{"a", &a}, {"b", &b}, {"row", &row_b}},
                                 {.step = 1e-6, .tolerance = 1e-4});
    for (const auto& p : report.params) {
      EXPECT_LE(p.max_rel_error, 1e-4) << op_name(op) << " param " << p.name << " trial " << trial;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, PrimitiveGrad,
                         ::testing::Values(Op::kMatmul, Op::kAdd, Op::kSub, Op::kMul, Op::kScale, Op::kShift,
                                           Op::kTanh, Op::kSigmoid, Op::kSoftmax, Op::kLogSoftmax, Op::kConcat,
                                           Op::kEmbed, Op::kLog, Op::kSum, Op::kRelu, Op::kPick, Op::kSliceCols),
                         [](const auto& info) {
                           std::string n(op_name(info.param));
                           for (char& ch : n) if (ch == '-') ch = '_';
                           return n;
                         });

TEST(Record, TopologicalAndReplayDeterministic) {
  std::mt19937_64 rng(21);
  Tensor w = random_tensor(5, 4, rng);
  Tensor x = random_tensor(3, 5, rng);
  Tape tape;
  Var h = tanh(matmul(tape.input(x), tape.param(w)));
  Var loss = sum(log_softmax(concat({h, sigmoid(h)})));
  for (std::uint32_t id = 0; id < tape.size(); ++id) {
    for (std::uint32_t in : tape.inputs(id)) EXPECT_LT(in, id);
  }
  EXPECT_TRUE(tape.replay());

  Tape again;
  Var loss2 = sum(log_softmax(concat({tanh(matmul(again.input(x), again.param(w))),
                                      sigmoid(tanh(matmul(again.input(x), again.param(w))))})));
  EXPECT_EQ(loss.item(), loss2.item());
}

TEST(Record, ReplayDetectsChangedLeaves) {
  Tensor w({2}, {1.0, 2.0});
  Tape tape;
  tanh(tape.param(w));
  w[0] = 1.5;
  EXPECT_FALSE(tape.replay());
}

TEST(Backward, Linear) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor w = random_tensor(4, 4, rng);
    Tensor x = random_tensor(2, 4, rng);
    const double a = 0.7, b = -1.3;
    auto l1 = [&](Tape& t) { return sum(tanh(matmul(t.input(x), t.param(w)))); };
    auto l2 = [&](Tape& t) { return sum(log_softmax(matmul(t.input(x), t.param(w)))); };
    auto grad_of = [&](auto&& f) {
      w.zero_grad();
      Tape t;
      t.backward(f(t));
      return std::vector<double>(w.grad().begin(), w.grad().end());
    };
    const auto g1 = grad_of(l1);
    const auto g2 = grad_of(l2);
    const auto g = grad_of([&](Tape& t) { return add(scale(l1(t), a), scale(l2(t), b)); });
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], a * g1[i] + b * g2[i], 1e-12);
  }
}

}  // namespace
