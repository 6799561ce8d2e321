// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "grassnet/gradcheck.hpp"
#include "grassnet/tensor.hpp"
#include "test_util.hpp"

namespace grassnet {
namespace {

using testing::max_abs_diff;
using testing::naive_matmul;
using testing::random_tensor;

TEST(Matmul, IdentityAndZero) {
  std::mt19937_64 rng(1);
  const Tensor m = random_tensor({3, 4}, rng);
  EXPECT_EQ(max_abs_diff(matmul(Tensor::eye(3), m), m), 0.0);
  const Tensor z = matmul(Tensor::zeros({2, 3}), m);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, HandExampleMatchesTripleLoop) {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
  const auto oracle = naive_matmul(a.values(), b.values(), 2, 2, 2);
  EXPECT_EQ(oracle, (std::vector<double>{19, 22, 43, 50}));
  const Tensor c = matmul(a, b);
  EXPECT_EQ(std::vector<double>(c.values().begin(), c.values().end()), oracle);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    const auto first = msg.find("[2x3]");
    ASSERT_NE(first, std::string::npos);
    EXPECT_NE(msg.find("[2x3]", first + 1), std::string::npos);
  }
}

TEST(Bmm, AllTransposeCombinationsMatchOracle) {
  std::mt19937_64 rng(2);
  const std::size_t batch = 3, m = 4, k = 5, n = 2;
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      const Tensor a = random_tensor(ta ? Shape{batch, k, m} : Shape{batch, m, k}, rng);
      const Tensor b = random_tensor(tb ? Shape{batch, n, k} : Shape{batch, k, n}, rng);
      const Tensor c = bmm(a, b, ta, tb);
      ASSERT_EQ(c.shape(), (Shape{batch, m, n}));
      for (std::size_t i = 0; i < batch; ++i) {
        auto ai = std::vector<double>(a.values().begin() + i * m * k, a.values().begin() + (i + 1) * m * k);
        auto bi = std::vector<double>(b.values().begin() + i * k * n, b.values().begin() + (i + 1) * k * n);
        if (ta) ai = testing::naive_transpose(ai, k, m);
        if (tb) bi = testing::naive_transpose(bi, n, k);
        const auto ref = naive_matmul(ai, bi, m, k, n);
        EXPECT_LT(max_abs_diff(ref, std::span<const double>(c.values().data() + i * m * n, m * n)), 1e-12);
      }
    }
}

TEST(Pointwise, Examples) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_DOUBLE_EQ(leaky_relu(Tensor::scalar(-1.0), 0.2).item(), -0.2);
  EXPECT_DOUBLE_EQ(pointwise(Tensor::scalar(-1.0), Pointwise::leaky_relu).item(), -0.2);
  EXPECT_DOUBLE_EQ(pointwise(Tensor::scalar(0.0), Pointwise::tanh).item(), 0.0);
  EXPECT_DOUBLE_EQ(pointwise(Tensor::scalar(0.0), Pointwise::exp).item(), 1.0);
  EXPECT_DOUBLE_EQ(pointwise(Tensor::scalar(1.0), Pointwise::log).item(), 0.0);

  Tensor x = Tensor::scalar(0.0, true);
  sigmoid(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Pointwise, LogRejectsNonPositive) {
  EXPECT_THROW(log(Tensor::from({2}, {1.0, 0.0})), DomainError);
  EXPECT_THROW(log(Tensor::scalar(-3.0)), DomainError);
}

TEST(Softmax, Examples) {
  const Tensor a = softmax_last(Tensor::from({1, 2}, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  EXPECT_DOUBLE_EQ(softmax_last(Tensor::from({1, 1}, {42.0}))[0], 1.0);
  const Tensor b = softmax_last(Tensor::from({1, 2}, {std::log(1.0), std::log(3.0)}));
  // direct e^x / sum oracle
  const double z = std::exp(std::log(1.0)) + std::exp(std::log(3.0));
  EXPECT_NEAR(b[0], 1.0 / z, 1e-15);
  EXPECT_NEAR(b[1], 3.0 / z, 1e-15);
  EXPECT_NEAR(b[0], 0.25, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor({5, 7}, rng, false, -20.0, 20.0);
    const Tensor y = softmax_last(x);
    const Tensor shifted = softmax_last(add_scalar(x, 123.456));
    for (std::size_t r = 0; r < 5; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_GE(y.at(r, j), 0.0);
        s += y.at(r, j);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    EXPECT_LT(max_abs_diff(y, shifted), 1e-12);
  }
}

TEST(Glu, Examples) {
  std::mt19937_64 rng(4);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor half = glu(a, Tensor::zeros({3, 4}));
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_DOUBLE_EQ(half[i], 0.5 * a[i]);
  const Tensor zero = glu(Tensor::zeros({3, 4}), random_tensor({3, 4}, rng));
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);

  const Tensor g = random_tensor({3, 4}, rng);
  const Tensor out = glu(a, g);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double sig = 1.0 / (1.0 + std::exp(-g[i]));
    EXPECT_LT(std::abs(out[i] - a[i] * sig), 1e-12);
  }
  EXPECT_THROW(glu(a, Tensor::zeros({4, 3})), ShapeError);
}

TEST(LayerNorm, Examples) {
  const Tensor ones = Tensor::full({4}, 1.0);
  const Tensor zeros = Tensor::zeros({4});
  const Tensor c = layer_norm(Tensor::full({1, 4}, 3.5), ones, zeros);
  for (double v : c.values()) EXPECT_EQ(v, 0.0);

  const Tensor unit = Tensor::from({1, 4}, {-1.0, 1.0, -1.0, 1.0});  // mean 0, var 1
  const Tensor u = layer_norm(unit, ones, zeros, 1e-5);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(u[i], unit[i], 1e-5);

  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({3, 6}, rng);
  const Tensor gain = random_tensor({6}, rng);
  const Tensor bias = random_tensor({6}, rng);
  const Tensor y = layer_norm(x, gain, bias, 1e-5);
  for (std::size_t r = 0; r < 3; ++r) {
    double mu = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 6; ++j) mu += x.at(r, j) / 6.0;
    for (std::size_t j = 0; j < 6; ++j) var += (x.at(r, j) - mu) * (x.at(r, j) - mu) / 6.0;
    for (std::size_t j = 0; j < 6; ++j) {
      const double expect = (x.at(r, j) - mu) / std::sqrt(var + 1e-5) * gain[j] + bias[j];
      EXPECT_LT(std::abs(y.at(r, j) - expect), 1e-12);
    }
  }
}

TEST(Backward, SumOfSquaresGivesTwoX) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({5}, rng, true);
  sum(mul(x, x)).backward();
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * x[i]);
}

TEST(Backward, UnusedLeafGetsZeroGradient) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor unused = Tensor::from({2}, {3.0, 4.0}, true);
  const Tensor loss = add(sum(x), mul(sum(unused), Tensor::scalar(0.0)));
  loss.backward();
  ASSERT_TRUE(unused.has_grad());
  EXPECT_EQ(unused.grad()[0], 0.0);
  EXPECT_EQ(unused.grad()[1], 0.0);
}

TEST(Backward, RepeatedCallsAccumulateUntilZeroed) {
  Tensor x = Tensor::from({2}, {1.0, -2.0}, true);
  const Tensor loss = sum(mul(x, x));
  loss.backward();
  loss.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -8.0);
  x.zero_grad();
  loss.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
}

TEST(Backward, NonScalarLossIsRejected) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  EXPECT_THROW(mul(x, x).backward(), ShapeError);
}

TEST(GradCheck, LinearAndQuadratic) {
  std::mt19937_64 rng(7);
  Tensor x = random_tensor({6}, rng, true);
  const Tensor c = random_tensor({6}, rng);
  const auto lin = grad_check([&] { return sum(mul(c, x)); }, {x});
  EXPECT_LT(lin.max_rel_error, 1e-9);
  EXPECT_EQ(lin.checked, 6u);
  const auto quad = grad_check([&] { return sum(mul(mul(x, x), c)); }, {x});
  EXPECT_LT(quad.max_rel_error, 1e-7);
}

// Autodiff soundness: every differentiable op against central differences
// on random inputs in [-1, 1].
struct OpCase {
  const char* name;
  std::function<Tensor(const std::vector<Tensor>&)> f;
  std::vector<Shape> shapes;
  double lo = -1.0;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto& c = GetParam();
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<Tensor> inputs;
    for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng, true, c.lo, 1.0));
    // random projection makes every output element matter
    const Tensor probe = random_tensor(c.f(inputs).shape(), rng);
    const auto res = grad_check([&] { return sum(mul(c.f(inputs), probe)); }, inputs);
    EXPECT_LT(res.max_rel_error, 1e-4) << c.name;
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllOps, OpGradient,
    ::testing::Values(
        OpCase{"matmul", [](auto& v) { return matmul(v[0], v[1]); }, {{3, 4}, {4, 2}}},
        OpCase{"bmm", [](auto& v) { return bmm(v[0], v[1]); }, {{2, 3, 4}, {2, 4, 2}}},
        OpCase{"bmm_ta", [](auto& v) { return bmm(v[0], v[1], true, false); }, {{2, 4, 3}, {2, 4, 2}}},
        OpCase{"bmm_tb", [](auto& v) { return bmm(v[0], v[1], false, true); }, {{2, 3, 4}, {2, 2, 4}}},
        OpCase{"bmm_tt", [](auto& v) { return bmm(v[0], v[1], true, true); }, {{2, 4, 3}, {2, 2, 4}}},
        OpCase{"transpose", [](auto& v) { return transpose(v[0]); }, {{2, 3, 4}}},
        OpCase{"add", [](auto& v) { return add(v[0], v[1]); }, {{3, 2}, {3, 2}}},
        OpCase{"sub", [](auto& v) { return sub(v[0], v[1]); }, {{3, 2}, {3, 2}}},
        OpCase{"mul", [](auto& v) { return mul(v[0], v[1]); }, {{3, 2}, {3, 2}}},
        OpCase{"add_broadcast", [](auto& v) { return add_broadcast(v[0], v[1]); }, {{2, 3, 4}, {3, 4}}},
        OpCase{"outer_sum", [](auto& v) { return outer_sum(v[0], v[1]); }, {{2, 3}, {2, 3}}},
        OpCase{"sigmoid", [](auto& v) { return sigmoid(v[0]); }, {{4, 3}}},
        OpCase{"tanh", [](auto& v) { return tanh(v[0]); }, {{4, 3}}},
        OpCase{"leaky_relu", [](auto& v) { return leaky_relu(v[0], 0.2); }, {{4, 3}}},
        OpCase{"exp", [](auto& v) { return exp(v[0]); }, {{4, 3}}},
        OpCase{"log", [](auto& v) { return log(v[0]); }, {{4, 3}}, 0.1},
        OpCase{"pow", [](auto& v) { return pow(v[0], 2.5); }, {{4, 3}}, 0.1},
        OpCase{"glu", [](auto& v) { return glu(v[0], v[1]); }, {{3, 3}, {3, 3}}},
        OpCase{"softmax", [](auto& v) { return softmax_last(v[0]); }, {{3, 5}}},
        OpCase{"layer_norm", [](auto& v) { return layer_norm(v[0], v[1], v[2]); }, {{3, 5}, {5}, {5}}},
        OpCase{"sum_last", [](auto& v) { return sum_last(v[0]); }, {{3, 5}}},
        OpCase{"mean", [](auto& v) { return mean(v[0]); }, {{3, 5}}},
        OpCase{"slice_concat", [](auto& v) { return concat_last({slice_last(v[0], 1, 2), v[1]}); }, {{3, 4}, {3, 2}}},
        OpCase{"reshape", [](auto& v) { return reshape(v[0], {6, 2}); }, {{3, 4}}},
        OpCase{"gather_rows", [](auto& v) { return gather_rows(v[0], {2, 0, 2}); }, {{3, 4}}},
        OpCase{"conv1d_same", [](auto& v) { return conv1d_same(v[0], v[1], v[2]); }, {{3, 6}, {3}, {1}}},
        OpCase{"conv1d_short", [](auto& v) { return conv1d_same(v[0], v[1], v[2]); }, {{4, 2}, {3}, {1}}}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(Dropout, EvalIsIdentityAndTrainingScalesKeptUnits) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({20, 20}, rng);
  EXPECT_EQ(dropout(x, 0.2, nullptr).node(), x.node());
  const Tensor y = dropout(x, 0.5, &rng);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (y[i] != 0.0) {
      EXPECT_DOUBLE_EQ(y[i], 2.0 * x[i]);
      ++kept;
    }
  }
  EXPECT_GT(kept, 100u);
  EXPECT_LT(kept, 300u);
}

TEST(Tensor, FromRejectsWrongValueCount) { EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError); }

}  // namespace
}  // namespace grassnet
