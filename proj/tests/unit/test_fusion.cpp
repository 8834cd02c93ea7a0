#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dghif/common/errors.hpp"
#include "dghif/fusion/fusion.hpp"
#include "dghif/tensorcore/grad_check.hpp"
#include "dghif/tensorcore/ops.hpp"
#include "test_util.hpp"

using namespace dghif;
using namespace dghif::fusion;
using dghif::testing::F64Test;
using dghif::testing::random_tensor;
using tc::Tensor;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

FusionConfig cfg(std::size_t d, FusionMode mode = FusionMode::Gated) {
  FusionConfig c;
  c.text_dim = d;
  c.graph_dim = d;
  c.dim = d;
  c.mode = mode;
  return c;
}

void set_identity(Tensor& w) {
  auto v = w.mutable_values();
  for (std::size_t r = 0; r < w.dim(0); ++r)
    for (std::size_t c = 0; c < w.dim(1); ++c) v[r * w.dim(1) + c] = r == c ? 1.0 : 0.0;
}

}  // namespace

class FusionTest : public F64Test {
 protected:
  std::mt19937_64 rng{31};
};

TEST_F(FusionTest, ZeroTextGivesZeroView) {
  auto p = FusionParams::init(cfg(4), rng);
  auto out = project_text(Tensor::zeros({1, 4}), p);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST_F(FusionTest, SharedParamsGiveEqualViews) {
  auto p = FusionParams::init(cfg(4), rng);
  p.w_q = p.w_p;
  p.b_q = p.b_p;
  auto h = random_tensor({3, 4}, rng, -1, 1, false);
  auto views = project_views(h, h, p);
  EXPECT_EQ(vals(views.p), vals(views.q));
}

TEST_F(FusionTest, IdentityProjectionMatchesStraightLine) {
  auto p = FusionParams::init(cfg(5), rng);
  set_identity(p.w_p);
  auto h = random_tensor({1, 5}, rng, -2, 2, false);
  auto out = project_text(h, p);
  double mu = 0, var = 0;
  for (double x : h.values()) mu += x;
  mu /= 5;
  for (double x : h.values()) var += (x - mu) * (x - mu);
  var /= 5;
  for (std::size_t c = 0; c < 5; ++c) {
    const double n = (h.at(c) - mu) / std::sqrt(var + 1e-5);
    EXPECT_NEAR(out.at(c), n / (1 + std::exp(-n)), 1e-12);
  }
}

TEST_F(FusionTest, InteractionFeatureArithmetic) {
  auto r = interaction_features(Tensor::from_values({2}, {2, 3}), Tensor::from_values({2}, {1, -1}));
  EXPECT_EQ(vals(r.r_times), (std::vector<double>{2, -3}));
  EXPECT_EQ(vals(r.r_delta), (std::vector<double>{1, 4}));
  auto p = Tensor::from_values({2}, {0.5, -2});
  auto same = interaction_features(p, p);
  EXPECT_EQ(vals(same.r_delta), (std::vector<double>{0, 0}));
  auto zero = interaction_features(p, Tensor::zeros({2}));
  EXPECT_EQ(vals(zero.r_times), (std::vector<double>{0, 0}));
  EXPECT_EQ(vals(zero.r_delta), vals(p));
}

TEST_F(FusionTest, GateEndpoints) {
  auto params = FusionParams::init(cfg(3), rng);
  for (double& w : params.gate_w2.mutable_values()) w = 0.0;
  auto p = random_tensor({2, 3}, rng, -1, 1, false), q = random_tensor({2, 3}, rng, -1, 1, false);
  auto g = compute_gate(p, q, interaction_features(p, q), params, false, rng);
  for (double v : g.values()) EXPECT_EQ(v, 0.5);
  for (double& b : params.gate_b2.mutable_values()) b = 50.0;
  auto g1 = compute_gate(p, q, interaction_features(p, q), params, false, rng);
  for (double v : g1.values()) EXPECT_NEAR(v, 1.0, 1e-15);
  std::mt19937_64 r1(1), r2(2);
  auto fresh = FusionParams::init(cfg(3), rng);
  auto a = compute_gate(p, q, interaction_features(p, q), fresh, false, r1);
  auto b = compute_gate(p, q, interaction_features(p, q), fresh, false, r2);
  EXPECT_EQ(vals(a), vals(b));
}

TEST_F(FusionTest, MixtureEndpointsAndMidpoint) {
  auto params = FusionParams::init(cfg(2), rng);
  for (double& w : params.gate_w2.mutable_values()) w = 0.0;
  // g = 0.5; pick inputs whose projections are known through identity maps
  auto h = random_tensor({1, 2}, rng, -1, 1, false);
  auto v = random_tensor({1, 2}, rng, -1, 1, false);
  auto out = fuse(h, v, params, false, rng);
  for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(out.z.at(c), 0.5 * (out.p.at(c) + out.q.at(c)), 1e-15);
  for (double& b : params.gate_b2.mutable_values()) b = 60.0;
  auto top = fuse(h, v, params, false, rng);
  for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(top.z.at(c), top.p.at(c), 1e-15);
}

TEST_F(FusionTest, ColdStartReturnsTextViewExactly) {
  auto params = FusionParams::init(cfg(4), rng);
  auto h = random_tensor({3, 4}, rng, -1, 1, false);
  auto none = fuse(h, Tensor(), params, true, rng);
  EXPECT_EQ(vals(none.z), vals(none.p));
  EXPECT_FALSE(none.g.defined());
  auto v = random_tensor({3, 4}, rng, -1, 1, false);
  auto partial = fuse(h, v, params, true, rng, {true, false, true});
  EXPECT_TRUE(partial.bypassed[1]);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(partial.z.at(1, c), partial.p.at(1, c));
}

TEST_F(FusionTest, ModesHaveDocumentedWidths) {
  auto h = random_tensor({2, 4}, rng, -1, 1, false), v = random_tensor({2, 4}, rng, -1, 1, false);
  EXPECT_EQ(fuse(h, v, FusionParams::init(cfg(4), rng), false, rng).z.dim(1), 4u);
  EXPECT_EQ(fuse(h, v, FusionParams::init(cfg(4, FusionMode::Concat), rng), false, rng).z.dim(1), 8u);
  auto text_only = fuse(h, v, FusionParams::init(cfg(4, FusionMode::TextOnly), rng), false, rng);
  EXPECT_EQ(vals(text_only.z), vals(text_only.p));
  auto graph_only = fuse(h, v, FusionParams::init(cfg(4, FusionMode::GraphOnly), rng), false, rng);
  EXPECT_EQ(vals(graph_only.z), vals(graph_only.q));
  EXPECT_THROW(fuse(h, Tensor(), FusionParams::init(cfg(4, FusionMode::GraphOnly), rng), false, rng), DataError);
}

TEST_F(FusionTest, GatedOutputIsCoordinatewiseConvex) {
  for (int draw = 0; draw < 2000; ++draw) {
    auto params = FusionParams::init(cfg(4), rng);
    auto h = random_tensor({5, 4}, rng, -3, 3, false), v = random_tensor({5, 4}, rng, -3, 3, false);
    auto out = fuse(h, v, params, draw % 2 == 0, rng);
    for (std::size_t i = 0; i < out.z.numel(); ++i) {
      const double p = out.p.values()[i], q = out.q.values()[i], z = out.z.values()[i];
      ASSERT_GE(z, std::min(p, q) - 1e-9);
      ASSERT_LE(z, std::max(p, q) + 1e-9);
    }
  }
}

TEST_F(FusionTest, GatedPathGradientsMatchFiniteDifferences) {
  for (auto mode : {FusionMode::Gated, FusionMode::Concat}) {
    auto c = cfg(3, mode);
    c.text_dim = 4;
    c.graph_dim = 5;
    auto params = FusionParams::init(c, rng);
    auto h = random_tensor({3, 4}, rng), v = random_tensor({3, 5}, rng);
    auto weights = random_tensor({3, c.output_dim()}, rng, -1, 1, false);
    auto list = params.parameters();
    list.push_back({"h", "test", h});
    list.push_back({"v", "test", v});
    auto loss = [&] {
      std::mt19937_64 fixed(4);
      return tc::sum(tc::mul(fuse(h, v, params, true, fixed, {true, true, false}).z, weights));
    };
    auto report = tc::grad_check(loss, list, {.step = 1e-5, .tolerance = 1e-4, .floor = 1e-4});
    for (const auto& e : report.entries) EXPECT_LT(e.max_rel_error, 1e-4) << e.name;
  }
}

TEST(GateAudit, Statistics) {
  std::vector<double> half{0.5, 0.5, 0.5};
  std::vector<std::string> one{"all", "all", "all"};
  auto s = gate_audit(half, one);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].mean_gate, 0.5);
  EXPECT_EQ(s[0].frac_below, 0.0);
  std::vector<double> mixed{0.2, 0.4};
  std::vector<std::string> two{"c", "c"};
  EXPECT_EQ(gate_audit(mixed, two)[0].frac_below, 0.5);
  auto masses = gate_masses(Tensor::from_values({2, 2}, {0.1, 0.3, 0.5, 0.7}));
  EXPECT_NEAR(masses[0], 0.2, 1e-15);
  EXPECT_NEAR(masses[1], 0.6, 1e-15);
  std::ostringstream csv;
  write_gate_audit(csv, gate_audit(mixed, two));
  EXPECT_EQ(csv.str(), "cohort,mean_gate,frac_below_threshold,n\nc,0.300000,0.500000,2\n");
}
