#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "occsurf/nn/adam.hpp"
#include "occsurf/nn/encoding.hpp"
#include "occsurf/nn/loss.hpp"
#include "occsurf/nn/mlp.hpp"
#include "occsurf/nn/objective.hpp"
#include "support.hpp"

using namespace occsurf;
using namespace occsurf::nn;

TEST(Encoding, ZeroPoint) {
  PositionalEncoding pe{6};
  const auto e = pe.encode(Vec3::Zero());
  ASSERT_EQ(e.size(), 39);
  for (int a = 0; a < 3; ++a) EXPECT_EQ(e[a], 0.0);
  for (int k = 0; k < 6; ++k)
    for (int a = 0; a < 3; ++a) {
      EXPECT_EQ(e[3 + 6 * k + a], 0.0);
      EXPECT_EQ(e[6 + 6 * k + a], 1.0);
    }
}

TEST(Encoding, MatchesDirectTrig) {
  PositionalEncoding pe{6};
  const Vec3 q(0.3, -0.71, 0.94);
  const auto e = pe.encode(q);
  for (int k = 0; k < 6; ++k)
    for (int a = 0; a < 3; ++a) {
      const double w = std::ldexp(std::numbers::pi, k) * q[a];
      EXPECT_NEAR(e[3 + 6 * k + a], std::sin(w), 1e-12);
      EXPECT_NEAR(e[6 + 6 * k + a], std::cos(w), 1e-12);
    }
}

TEST(Encoding, Parity) {
  PositionalEncoding pe{6};
  const Vec3 q(0.12, 0.5, -0.33);
  const auto a = pe.encode(q), b = pe.encode(-q);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(b[i], -a[i]);
  for (int k = 0; k < 6; ++k)
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(b[3 + 6 * k + i], -a[3 + 6 * k + i], 1e-15);
      EXPECT_NEAR(b[6 + 6 * k + i], a[6 + 6 * k + i], 1e-15);
    }
}

TEST(Encoding, NormalizeMapsCubeToUnitRange) {
  const Vec3 o(-0.2, -0.2, -0.2);
  EXPECT_TRUE(normalize_point(o, o, 5.12).isApprox(-Vec3::Ones()));
  EXPECT_TRUE(normalize_point(o + Vec3::Constant(5.12), o, 5.12).isApprox(Vec3::Ones()));
}

TEST(Loss, BceClosedForms) {
  EXPECT_NEAR(loss_bce(0, 0, 0.025), std::log(2.0), 1e-12);
  EXPECT_NEAR(loss_bce(-0.25, -0.25, 0.025), 0.0, 1e-3);
  EXPECT_NEAR(loss_bce(0.25, 0.25, 0.025), 0.0, 1e-3);
}

TEST(Loss, BceGradientMatchesFiniteDifference) {
  for (double gt : {-0.05, 0.0, 0.01, 0.2})
    for (double p : {-0.1, -0.01, 0.0, 0.03}) {
      const double h = 1e-7;
      const double fd = (loss_bce(p + h, gt, 0.025) - loss_bce(p - h, gt, 0.025)) / (2 * h);
      EXPECT_NEAR(bce_with_grad(p, gt, 0.025).d_pred, fd, 1e-5);
    }
}

TEST(Loss, BceSaturatesWithoutOverflow) {
  const auto r = bce_with_grad(100.0, -100.0, 0.025);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, -kLogFloor, 1e-9);
  EXPECT_EQ(r.d_pred, 0.0);
}

TEST(Loss, EikonalAndSmooth) {
  EXPECT_EQ(loss_eikonal(Vec3(0, 0, 1)), 0.0);
  EXPECT_EQ(loss_eikonal(Vec3::Zero()), 1.0);
  EXPECT_EQ(loss_smooth(Vec3(1, 2, 3), Vec3(1, 2, 3)), 0.0);
  EXPECT_DOUBLE_EQ(loss_smooth(Vec3(1, 0, 0), Vec3(0, 1, 0)), 2.0);
}

TEST(Mlp, ZeroWeightsGiveZero) {
  Mlp<double> net(MlpArch{5, 8, 4, false, 0.0, 2});
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 7);
  EXPECT_TRUE(net.forward(X).isZero());
}

TEST(Mlp, HandComputedTwoLayer) {
  Mlp<double> net(MlpArch{1, 1, 2, false, 0.0, -1});
  net.weight_v(0)(0, 0) = 2.0;
  net.bias(0)[0] = -1.0;
  net.weight_v(1)(0, 0) = 3.0;
  net.bias(1)[0] = 0.5;
  Eigen::MatrixXd X(1, 3);
  X << 1.0, 0.25, 2.0;
  const auto y = net.forward(X);
  EXPECT_DOUBLE_EQ(y[0], 3.0 * 1.0 + 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.5);  // relu(-0.5) = 0
  EXPECT_DOUBLE_EQ(y[2], 3.0 * 3.0 + 0.5);
}

TEST(Mlp, WeightNormRescalesRows) {
  Mlp<double> net(MlpArch{2, 2, 2, true, 0.0, -1});
  net.weight_v(0) << 3, 4, 0, 2;
  net.gain(0) << 1, 4;
  const auto w = net.effective_weight(0);
  EXPECT_NEAR(w(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(w(0, 1), 0.8, 1e-15);
  EXPECT_NEAR(w(1, 1), 4.0, 1e-15);
}

TEST(Mlp, InitKeepsEffectiveWeightsEqualToV) {
  Mlp<double> net(MlpArch{10, 16, 4, true, 0.3, 2});
  net.init(3);
  for (int l = 0; l < 4; ++l) EXPECT_TRUE(net.effective_weight(l).isApprox(Eigen::MatrixXd(net.weight_v(l))));
  for (int l = 0; l < 4; ++l) EXPECT_TRUE(net.bias(l).isZero());
}

TEST(Mlp, SkipLayerInputWidth) {
  const MlpArch a{39, 64, 8, true, 0.3, 4};
  EXPECT_EQ(a.layer_in(4), 64 + 39);
  EXPECT_EQ(a.layer_in(3), 64);
  EXPECT_EQ(a.layer_out(7), 1);
}

TEST(Mlp, InferenceIsDeterministic) {
  Mlp<double> net(MlpArch{6, 16, 5, true, 0.3, 3});
  net.init(9);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 11);
  const Eigen::RowVectorXd a = net.forward(X), b = net.forward(X);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
}

TEST(Mlp, WidthMismatchThrows) {
  Mlp<double> net(MlpArch{6, 16, 3, false, 0.0, -1});
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(5, 2)), ArgumentError);
}

TEST(Mlp, DropoutMaskRepeatsWithPeriod) {
  Mlp<double> net(MlpArch{4, 32, 3, false, 0.5, -1});
  net.init(1);
  Rng rng(5);
  const auto masks = net.sample_dropout(rng, 3);
  Eigen::MatrixXd X(4, 6);
  X.leftCols(3) = Eigen::MatrixXd::Random(4, 3);
  X.rightCols(3) = X.leftCols(3);
  const auto y = net.forward(X, nullptr, &masks);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(y[c], y[c + 3]);
  EXPECT_NE(y.leftCols(3), net.forward(X).leftCols(3));
}

TEST(Mlp, CheckpointRoundTrip) {
  const auto dir = support::temp_dir("mlp");
  Mlp<float> net(MlpArch{87, 64, 8, true, 0.3, 4});
  net.init(21);
  const DecoderMeta meta{"inpainter", 6, 12, 3, 7};
  save_decoder(net, meta, dir / "d.bin");
  DecoderMeta back;
  const auto loaded = load_decoder<float>(dir / "d.bin", &back);
  EXPECT_EQ(loaded.arch(), net.arch());
  EXPECT_EQ(back, meta);
  EXPECT_EQ(loaded.params(), net.params());
}

TEST(Adam, ZeroGradientLeavesParams) {
  Eigen::VectorXd p(3), g = Eigen::VectorXd::Zero(3);
  p << 1, 2, 3;
  AdamState<double> s(3);
  adam_step(p, g, s, 1e-3);
  EXPECT_EQ(p, Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepIsSignTimesLr) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2), g(2);
  g << 5.0, -0.2;
  AdamState<double> s(2);
  adam_step(p, g, s, 1e-2);
  EXPECT_NEAR(p[0], -1e-2, 1e-8);
  EXPECT_NEAR(p[1], 1e-2, 1e-8);
}

TEST(Adam, NonFiniteGradientThrowsBeforeUpdate) {
  Eigen::VectorXd p = Eigen::VectorXd::Ones(2), g(2);
  g << 1.0, std::nan("");
  AdamState<double> s(2);
  EXPECT_THROW(adam_step(p, g, s, 1e-2), NumericalError);
  EXPECT_EQ(p, Eigen::VectorXd::Ones(2));
  EXPECT_EQ(s.step, 0);
}

namespace {

// Single-level volume over the whole cube so every probe has coverage.
struct AffineFixture {
  RunConfig cfg = RunConfig::desk();
  OctreeFeatureVolume volume;
  FieldInput input;
  Mlp<double> net;

  AffineFixture() {
    std::vector<Vec3> pts;
    for (double x = 0.5; x < 1.5; x += 0.02)
      for (double y = 0.5; y < 1.5; y += 0.02) pts.emplace_back(x, y, 1.0);
    volume = OctreeFeatureVolume::build(pts, octree_layout(cfg), 1);
    input = FieldInput{&volume, 0, 0, PositionalEncoding{0}};
    net = Mlp<double>(MlpArch{input.width(), 4, 2, false, 0.0, -1});
  }
};

}  // namespace

TEST(SpatialGradient, ConstantDecoderIsZero) {
  AffineFixture f;
  f.net.bias(1)[0] = 0.7;
  const auto g = spatial_gradient(f.net, f.input, Vec3(1, 1, 1), 0.01);
  ASSERT_TRUE(g);
  EXPECT_EQ(*g, Vec3::Zero());
}

TEST(SpatialGradient, AffineDecoderIsExact) {
  AffineFixture f;
  // Raw encoding columns are the normalized point; pass them through a
  // positive-biased ReLU layer so the network is affine in p.
  f.net.weight_v(0).setZero();
  for (int a = 0; a < 3; ++a) f.net.weight_v(0)(a, a) = 1.0;
  f.net.bias(0).setConstant(5.0);
  f.net.weight_v(1) << 0.3, -1.2, 2.0, 0.0;
  const double scale = 2.0 / f.volume.layout().side;
  const auto g = spatial_gradient(f.net, f.input, Vec3(1.0, 0.9, 1.1), 0.01);
  ASSERT_TRUE(g);
  EXPECT_NEAR((*g)[0], 0.3 * scale, 1e-9);
  EXPECT_NEAR((*g)[1], -1.2 * scale, 1e-9);
  EXPECT_NEAR((*g)[2], 2.0 * scale, 1e-9);
}

TEST(SpatialGradient, RichardsonStepHalving) {
  RunConfig cfg = RunConfig::desk();
  auto volume = support::gradcheck_volume(cfg, 4);
  const auto input = fine_input(volume, cfg);
  Mlp<double> net(geo_arch(cfg));
  net.init(8);
  // Coverage at every probe of both step sizes.
  const Vec3 p(1.0, 1.0, 0.8 + 0.1 * std::sin(3.0) * std::cos(2.0));
  const double h = 1e-3;
  const auto g1 = spatial_gradient(net, input, p, h);
  const auto g2 = spatial_gradient(net, input, p, h / 2);
  ASSERT_TRUE(g1 && g2);
  const auto g4 = spatial_gradient(net, input, p, h / 4);
  ASSERT_TRUE(g4);
  // Successive differences shrink by ~4 for an O(h^2) scheme.
  const double d12 = (*g1 - *g2).norm(), d24 = (*g2 - *g4).norm();
  if (d12 > 1e-12) {
    EXPECT_LT(d24, 0.5 * d12);
  }
}

TEST(SpatialGradient, LostCoverageIsInvalid) {
  AffineFixture f;
  // A point on the edge of the single occupied coarse region: a probe leaves it.
  const auto& layout = f.volume.layout();
  const Vec3 edge = layout.origin + Vec3::Constant(layout.side) - Vec3::Constant(0.001);
  EXPECT_FALSE(spatial_gradient(f.net, f.input, edge, 0.01));
  EXPECT_THROW(spatial_gradient(f.net, f.input, Vec3(1, 1, 1), 0.0), ArgumentError);
}

TEST(Objective, ZeroLambdasGiveMeanBce) {
  RunConfig cfg = RunConfig::desk();
  auto volume = support::gradcheck_volume(cfg, 2);
  const auto input = fine_input(volume, cfg);
  Mlp<double> net(geo_arch(cfg));
  net.init(2);
  const auto batch = support::gradcheck_batch(16, 2);
  ObjectiveConfig oc = objective_config(cfg);
  oc.lambda_eik = oc.lambda_smooth = 0;
  const auto t = evaluate_objective<double>(net, input, std::span(batch), oc, nullptr, nullptr);
  double expect = 0;
  for (const auto& s : batch) {
    Eigen::MatrixXd X(input.width(), 1);
    input.fill(s.p, X.col(0));
    expect += loss_bce(net.forward(X)[0], s.d_gt, oc.sigma);
  }
  EXPECT_NEAR(t.total, expect / batch.size(), 1e-12);
  EXPECT_NEAR(t.bce, t.total, 1e-12);
}

TEST(Objective, PerfectSampleIsLog2) {
  AffineFixture f;
  // Decoder = 0.5 * (normalized z) * side / 2 + const: unit gradient along z, zero at p.
  f.net.weight_v(0).setZero();
  f.net.weight_v(0)(0, 2) = 1.0;
  f.net.bias(0).setConstant(5.0);
  const double side = f.volume.layout().side;
  f.net.weight_v(1)(0, 0) = side / 2.0;
  const Vec3 p(1.0, 1.0, 1.0);
  Eigen::MatrixXd X(f.input.width(), 1);
  f.input.fill(p, X.col(0));
  f.net.bias(1)[0] = -f.net.forward(X)[0];
  const std::vector<ObjectiveSample> batch{{p, 0.0, Vec3(0.01, 0, 0)}};
  const auto t = evaluate_objective<double>(f.net, f.input, std::span(batch), objective_config(f.cfg), nullptr, nullptr);
  EXPECT_NEAR(t.eik, 0.0, 1e-12);
  EXPECT_NEAR(t.smooth, 0.0, 1e-12);
  EXPECT_NEAR(t.total, std::log(2.0), 1e-9);
}

TEST(Objective, DuplicatedBatchKeepsMean) {
  RunConfig cfg = RunConfig::desk();
  auto volume = support::gradcheck_volume(cfg, 3);
  const auto input = fine_input(volume, cfg);
  Mlp<double> net(geo_arch(cfg));
  net.init(3);
  auto batch = support::gradcheck_batch(8, 3);
  const auto a = evaluate_objective<double>(net, input, std::span(batch), objective_config(cfg), nullptr, nullptr);
  const auto copy = batch;
  batch.insert(batch.end(), copy.begin(), copy.end());
  const auto b = evaluate_objective<double>(net, input, std::span(batch), objective_config(cfg), nullptr, nullptr);
  EXPECT_NEAR(a.total, b.total, 1e-12);
}

TEST(Objective, EmptyBatchThrows) {
  AffineFixture f;
  std::vector<ObjectiveSample> none;
  EXPECT_THROW(evaluate_objective<double>(f.net, f.input, std::span(none), objective_config(f.cfg), nullptr, nullptr),
               ArgumentError);
}

class GradientCheck : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(GradientCheck, GeoDecoder) {
  const auto r = support::check_objective_gradients(false, GetParam(), 80, 80);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_analytic << " vs " << r.worst_numeric;
  EXPECT_GT(r.features_checked, 0);
  EXPECT_EQ(r.untouched_nonzero, 0);
  EXPECT_LE(r.skipped, 15);
}

TEST_P(GradientCheck, InpainterWithDropout) {
  const auto r = support::check_objective_gradients(true, GetParam(), 80, 80);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_analytic << " vs " << r.worst_numeric;
  EXPECT_GT(r.features_checked, 0);
  EXPECT_EQ(r.untouched_nonzero, 0);
  EXPECT_LE(r.skipped, 15);
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientCheck, ::testing::Values(1u, 2u, 3u));

TEST(Objective, FrozenNetworkLeavesParamGradZero) {
  RunConfig cfg = RunConfig::desk();
  auto volume = support::gradcheck_volume(cfg, 5);
  const auto input = coarse_input(volume, cfg);
  Mlp<double> net(inpainter_arch(cfg));
  net.init(5);
  const auto batch = support::gradcheck_batch(6, 5);
  ObjectiveGradients<double> full, frozen;
  frozen.param_grads = false;
  evaluate_objective(net, input, std::span(batch), objective_config(cfg), nullptr, &full);
  evaluate_objective(net, input, std::span(batch), objective_config(cfg), nullptr, &frozen);
  EXPECT_TRUE(frozen.net.isZero());
  EXPECT_FALSE(full.net.isZero());
  for (std::size_t i = 0; i < full.features.size(); ++i) EXPECT_TRUE(full.features[i].isApprox(frozen.features[i]));
}
