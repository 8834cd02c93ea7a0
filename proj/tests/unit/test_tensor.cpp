#include <gtest/gtest.h>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/ops.hpp"
#include "dghif/tensorcore/precision.hpp"
#include "test_util.hpp"

using namespace dghif;
using namespace dghif::tc;
using dghif::testing::F64Test;

using TensorTest = F64Test;

TEST_F(TensorTest, FactoriesKeepShapeAndValues) {
  auto t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
  EXPECT_FALSE(t.has_grad());
  EXPECT_THROW(Tensor::from_values({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_EQ(Tensor::scalar(3.0).rank(), 0u);
  EXPECT_DOUBLE_EQ(Tensor::full({4}, 2.5).at(3), 2.5);
}

TEST_F(TensorTest, SumOfSquaresGradient) {
  auto w = Tensor::from_values({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  backward(sum(mul(w, w)));
  ASSERT_TRUE(w.has_grad());
  EXPECT_DOUBLE_EQ(w.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(w.grad()[1], 4.0);
}

TEST_F(TensorTest, SigmoidGradientAtZero) {
  auto x = Tensor::scalar(0.0, true);
  Tape tape;
  TapeScope scope(tape);
  backward(sigmoid(x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST_F(TensorTest, FanOutAccumulates) {
  auto x = Tensor::scalar(3.0, true);
  Tape tape;
  TapeScope scope(tape);
  auto y = add(mul(x, x), scale(x, 5.0));
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 11.0);
}

TEST_F(TensorTest, RecordsAreTopologicallyOrdered) {
  auto a = Tensor::from_values({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  auto b = tanh(a);
  auto c = mul(b, a);
  auto d = sum(c);
  ASSERT_EQ(tape.size(), 3u);
  EXPECT_LT(b.tape_id(), c.tape_id());
  EXPECT_LT(c.tape_id(), d.tape_id());
  for (std::size_t i = 0; i < tape.size(); ++i) {
    for (const auto& in : tape.record(i).inputs) EXPECT_LT(in->tape_id, static_cast<std::int64_t>(i));
  }
}

TEST_F(TensorTest, NonScalarLossIsRejected) {
  auto x = Tensor::from_values({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  EXPECT_THROW(backward(mul(x, x)), ShapeError);
}

TEST_F(TensorTest, BackwardWithoutTapeIsRejected) {
  auto x = Tensor::scalar(1.0, true);
  EXPECT_THROW(backward(mul(x, x)), StateError);
}

TEST_F(TensorTest, LossNotOnTapeIsRejected) {
  auto x = Tensor::scalar(1.0, false);
  Tape tape;
  TapeScope scope(tape);
  EXPECT_THROW(backward(mul(x, x)), StateError);
}

TEST_F(TensorTest, NoRecordingWithoutTrackedInputs) {
  auto x = Tensor::from_values({2}, {1, 2});
  Tape tape;
  TapeScope scope(tape);
  auto y = sum(mul(x, x));
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST_F(TensorTest, NoGradScopeSuspendsRecording) {
  auto x = Tensor::from_values({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  {
    NoGradScope off;
    sum(x);
    EXPECT_EQ(tape.size(), 0u);
  }
  sum(x);
  EXPECT_EQ(tape.size(), 1u);
}

TEST_F(TensorTest, EveryTrackedLeafGetsGradient) {
  auto used = Tensor::from_values({2}, {1, 2}, true);
  auto unused_branch = Tensor::from_values({2}, {3, 4}, true);
  Tape tape;
  TapeScope scope(tape);
  auto zero_path = mul(unused_branch, Tensor::zeros({2}));
  backward(sum(add(used, zero_path)));
  EXPECT_TRUE(used.has_grad());
  ASSERT_TRUE(unused_branch.has_grad());
  EXPECT_DOUBLE_EQ(unused_branch.grad()[0], 0.0);
}

TEST_F(TensorTest, DetachCutsGradientFlow) {
  auto x = Tensor::scalar(2.0, true);
  auto d = x.detach();
  EXPECT_FALSE(d.requires_grad());
  EXPECT_DOUBLE_EQ(d.item(), 2.0);
}

TEST_F(TensorTest, TapeReplayIsBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(42);
    auto w = dghif::testing::random_tensor({4, 3}, rng);
    auto x = dghif::testing::random_tensor({5, 4}, rng, -1, 1, false);
    Tape tape;
    TapeScope scope(tape);
    auto loss = mean(gelu(matmul(x, w)));
    const double value = loss.item();
    backward(loss);
    return std::make_pair(value, std::vector<double>(w.grad().begin(), w.grad().end()));
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(PrecisionTest, F32RoundsValues) {
  PrecisionScope p(Precision::f32);
  auto t = Tensor::scalar(0.1);
  EXPECT_EQ(t.item(), static_cast<double>(0.1f));
  auto s = add(t, t);
  EXPECT_EQ(s.item(), static_cast<double>(0.1f + 0.1f));
}

TEST(PrecisionTest, ParsesNames) {
  EXPECT_EQ(parse_precision("f32"), Precision::f32);
  EXPECT_EQ(parse_precision("f64"), Precision::f64);
  EXPECT_THROW(parse_precision("f16"), ConfigError);
}
