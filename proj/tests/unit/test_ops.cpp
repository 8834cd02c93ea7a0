#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/grad_check.hpp"
#include "dghif/tensorcore/grad_suite.hpp"
#include "dghif/tensorcore/ops.hpp"
#include "test_util.hpp"

using namespace dghif;
using namespace dghif::tc;
using dghif::testing::F64Test;
using dghif::testing::random_tensor;

using OpsTest = F64Test;

TEST_F(OpsTest, TrivialValues) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  auto s = softmax_last(Tensor::from_values({3}, {0.7, 0.7, 0.7}));
  for (double v : s.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(gelu(Tensor::scalar(0.0)).item(), 0.0);
  EXPECT_EQ(silu(Tensor::scalar(0.0)).item(), 0.0);
  auto ln = layer_norm(Tensor::full({4}, 3.0), Tensor::full({4}, 1.0), Tensor::zeros({4}));
  for (double v : ln.values()) EXPECT_EQ(v, 0.0);
}

TEST_F(OpsTest, GeluUsesGaussianCdf) {
  const double x = 1.3;
  EXPECT_NEAR(gelu(Tensor::scalar(x)).item(), x * 0.5 * std::erfc(-x / std::numbers::sqrt2), 1e-15);
}

TEST_F(OpsTest, MatmulMatchesLoops) {
  std::mt19937_64 rng(1);
  auto a = random_tensor({2, 3, 4}, rng);
  auto b = random_tensor({4, 5}, rng);
  auto c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 5}));
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < 4; ++p) acc += a.values()[r * 4 + p] * b.values()[p * 5 + j];
      EXPECT_NEAR(c.values()[r * 5 + j], acc, 1e-14);
    }
  }
  auto v = matmul(a, random_tensor({4}, rng));
  EXPECT_EQ(v.shape(), (Shape{2, 3}));
}

TEST_F(OpsTest, ShapeErrorsNameOpAndShapes) {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({3, 2});
  try {
    add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos);
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[3, 2]"), std::string::npos);
  }
  EXPECT_THROW(matmul(a, a), ShapeError);
  EXPECT_THROW(concat_last({a, Tensor::zeros({3, 3})}), ShapeError);
  EXPECT_NO_THROW(add(a, Tensor::zeros({3})));
  EXPECT_THROW(add(a, Tensor::zeros({2})), ShapeError);
}

TEST_F(OpsTest, DomainErrors) {
  EXPECT_THROW(log(Tensor::from_values({2}, {1.0, 0.0})), DomainError);
  EXPECT_THROW(log(Tensor::scalar(-1.0)), DomainError);
  EXPECT_THROW(div(Tensor::scalar(1.0), Tensor::scalar(0.0)), DomainError);
  EXPECT_THROW(bce_with_logits(Tensor::scalar(0.0), std::vector<double>{2.0}), DomainError);
}

TEST_F(OpsTest, SoftmaxRowsAreDistributions) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor({7, 9}, rng, -30, 30, false);
    auto y = softmax_last(x);
    for (std::size_t r = 0; r < 7; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 9; ++c) {
        EXPECT_GE(y.at(r, c), 0.0);
        total += y.at(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST_F(OpsTest, DropoutEvalIsIdentity) {
  std::mt19937_64 rng(5);
  auto x = random_tensor({100}, rng);
  auto y = dropout(x, 0.2, false, rng);
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
            std::vector<double>(x.values().begin(), x.values().end()));
}

TEST_F(OpsTest, DropoutTrainPreservesExpectation) {
  std::mt19937_64 rng(11);
  auto x = Tensor::full({10000}, 1.0);
  auto y = dropout(x, 0.2, true, rng);
  double total = 0;
  std::size_t zeros = 0;
  for (double v : y.values()) {
    total += v;
    zeros += v == 0.0;
  }
  EXPECT_NEAR(total / 10000.0, 1.0, 0.02);
  EXPECT_NEAR(static_cast<double>(zeros) / 10000.0, 0.2, 0.02);
  EXPECT_THROW(dropout(x, 1.0, true, rng), DomainError);
}

TEST_F(OpsTest, CrossEntropyLimits) {
  const std::size_t v = 11;
  auto uniform = Tensor::zeros({3, v});
  std::vector<std::size_t> targets{0, 4, 10};
  EXPECT_NEAR(cross_entropy(uniform, targets).item(), std::log(static_cast<double>(v)), 1e-12);
  std::vector<double> peaked(3 * v, -1e3);
  for (std::size_t r = 0; r < 3; ++r) peaked[r * v + targets[r]] = 1e3;
  EXPECT_NEAR(cross_entropy(Tensor::from_values({3, v}, peaked), targets).item(), 0.0, 1e-12);
}

TEST_F(OpsTest, BceAtZeroLogitIsLn2) {
  EXPECT_NEAR(bce_with_logits(Tensor::scalar(0.0), std::vector<double>{1.0}).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_with_logits(Tensor::scalar(0.0), std::vector<double>{0.0}).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_with_logits(Tensor::scalar(20.0), std::vector<double>{1.0}).item(), 2.061e-9, 1e-11);
}

TEST_F(OpsTest, SegmentSoftmaxIgnoresOtherSegments) {
  auto s = Tensor::from_values({5}, {1, 2, 3, 100, -100});
  std::vector<std::size_t> off{0, 3, 3, 5};
  auto y = segment_softmax(s, off);
  EXPECT_NEAR(y.at(0) + y.at(1) + y.at(2), 1.0, 1e-12);
  EXPECT_NEAR(y.at(3) + y.at(4), 1.0, 1e-12);
  EXPECT_THROW(segment_mean(Tensor::zeros({5, 2}), off), DataError);
}

TEST_F(OpsTest, AdjacencyTransposeRoundTrip) {
  Csr g;
  g.offsets = {0, 2, 2, 3};
  g.indices = {1, 3, 1};
  auto adj = Adjacency::from_gather(g, 4);
  EXPECT_EQ(adj->scatter.offsets, (std::vector<std::size_t>{0, 0, 2, 2, 3}));
  EXPECT_EQ(adj->scatter.indices, (std::vector<std::size_t>{0, 2, 0}));
  auto x = Tensor::from_values({4, 1}, {1, 10, 100, 1000});
  auto y = neighbor_sum(x, adj);
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()), (std::vector<double>{1010, 0, 10}));
}

// --- finite-difference checks: every primitive at 20 random points ---------

class PrimitiveGradient : public F64Test, public ::testing::WithParamInterface<std::size_t> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  const PrimitiveCase& c = primitive_cases().at(GetParam());
  const auto report = check_primitive(c, 20, 1000 + GetParam());
  ASSERT_EQ(report.entries.size(), c.shapes.size());
  EXPECT_TRUE(report.passed()) << c.name << " max rel err " << report.max_rel_error();
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient, ::testing::Range<std::size_t>(0, primitive_cases().size()),
                         [](const auto& info) { return std::string(primitive_cases()[info.param].name); });

TEST_F(OpsTest, GradCheckExamples) {
  std::mt19937_64 rng(77);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto r1 = grad_check([&] { return sum(matmul(a, b)); }, {{"a", "t", a}, {"b", "t", b}});
  EXPECT_LT(r1.max_rel_error(), 1e-6);
  auto x = Tensor::from_values({4}, {-2, -0.5, 0.3, 4}, true);
  auto r2 = grad_check([&] { return sum(gelu(x)); }, {{"x", "t", x}});
  EXPECT_LT(r2.max_rel_error(), 1e-5);
}
