// Copyright 2026 The CPT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cpt/gradcheck.hpp"
#include "cpt/losses.hpp"

namespace cpt {
namespace {

// Plain central difference in binary128 with a tiny step; independent of
// the library's stencil.
template <typename Loss>
std::vector<double> numeric_grad(const Grid& pred, Loss&& loss) {
  std::vector<Quad> x(pred.values().begin(), pred.values().end());
  std::vector<double> out(x.size());
  const Quad h("1e-10");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Quad keep = x[i];
    x[i] = keep + h;
    const Quad up = loss(DenseGrid<Quad>(pred.channels(), pred.height(), pred.width(), x)).value;
    x[i] = keep - h;
    const Quad down = loss(DenseGrid<Quad>(pred.channels(), pred.height(), pred.width(), x)).value;
    x[i] = keep;
    out[i] = static_cast<double>((up - down) / (2 * h));
  }
  return out;
}

void expect_grad_close(std::span<const double> analytic, const std::vector<double>& numeric, double tol) {
  ASSERT_EQ(analytic.size(), numeric.size());
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    EXPECT_LT(relative_error(analytic[i], numeric[i]), tol) << "index " << i << ": " << analytic[i] << " vs " << numeric[i];
  }
}

TEST(FocalLoss, SingleCellPositive) {
  const Grid pred(1, 1, 1, 0.5);
  const Grid target(1, 1, 1, 1.0);
  EXPECT_NEAR(focal_loss(pred, target).value, 0.173287, 1e-6);
  EXPECT_DOUBLE_EQ(focal_loss(pred, target).value, -0.25 * std::log(0.5));
}

TEST(FocalLoss, PositivePlusPenalizedNegative) {
  const Grid pred(1, 1, 2, std::vector<double>{0.5, 0.5});
  const Grid target(1, 1, 2, std::vector<double>{1.0, 0.5});
  EXPECT_NEAR(focal_loss(pred, target).value, 0.184118, 1e-6);
}

TEST(FocalLoss, PerfectPredictionNearZero) {
  Grid target(1, 6, 6);
  target(0, 2, 3) = 1.0;
  const auto lv = focal_loss(target, target);
  EXPECT_LT(lv.value, 10 * 1e-4);
  EXPECT_GE(lv.value, 0);
}

TEST(FocalLoss, NoPositivesNormalizesByOne) {
  const Grid pred(1, 1, 1, 0.5);
  const Grid target(1, 1, 1, 0.0);
  EXPECT_DOUBLE_EQ(focal_loss(pred, target).value, -0.25 * std::log(0.5));
}

TEST(FocalLoss, ClampedCellsHaveZeroGradient) {
  const Grid pred(1, 1, 3, std::vector<double>{0.0, 1.0, 0.3});
  const Grid target(1, 1, 3, std::vector<double>{1.0, 0.0, 0.0});
  const auto lv = focal_loss(pred, target);
  EXPECT_TRUE(std::isfinite(lv.value));
  EXPECT_EQ(lv.grad(0, 0, 0), 0.0);
  EXPECT_EQ(lv.grad(0, 0, 1), 0.0);
  EXPECT_NE(lv.grad(0, 0, 2), 0.0);
}

TEST(FocalLoss, GradientMatchesCentralDifference) {
  CounterRng rng(21);
  Grid target(2, 8, 8);
  render_gaussian(target, {2, 3}, 0, 1.2);
  render_gaussian(target, {6, 5}, 1, 0.8);
  Grid pred(2, 8, 8);
  for (auto& v : pred.values()) v = rng.uniform(0.01, 0.99);
  const auto analytic = focal_loss(pred, target);
  const auto tq = target.cast<Quad>();
  expect_grad_close(analytic.grad.values(), numeric_grad(pred, [&](const DenseGrid<Quad>& p) { return focal_loss(p, tq); }),
                    1e-6);
}

TEST(FocalLoss, RejectsBadParams) {
  const Grid g(1, 1, 1, 0.5);
  EXPECT_THROW(focal_loss(g, g, FocalParams{0, 4, 1e-4}), InputError);
  EXPECT_THROW(focal_loss(g, Grid(1, 1, 2), FocalParams{}), InputError);
}

TEST(MaskedL1, WorkedExamples) {
  Grid size(2, 4, 4);
  size(0, 1, 1) = 2;
  size(1, 1, 1) = 8;
  const std::vector<L1Site> one{{1, 1, {4, 4}, {}, 0}};
  EXPECT_DOUBLE_EQ(masked_l1(size, std::span<const L1Site>(one)).value, 6.0);

  Grid off(2, 4, 4);
  off(0, 0, 0) = 0.5;
  off(1, 2, 2) = 0.5;
  const std::vector<L1Site> two{{0, 0, {0, 0}, {}, 0}, {2, 2, {0, 0}, {}, 0}};
  EXPECT_DOUBLE_EQ(masked_l1(off, std::span<const L1Site>(two)).value, 0.5);

  const std::vector<L1Site> none;
  const auto empty = masked_l1(off, std::span<const L1Site>(none));
  EXPECT_EQ(empty.value, 0.0);
  for (double g : empty.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(MaskedL1, ZeroAtTargetAndSignGradient) {
  Grid pred(3, 2, 2);
  pred(0, 1, 0) = 1.5;
  pred(1, 1, 0) = 1.6;
  pred(2, 1, 0) = 3.9;
  const std::vector<L1Site> at{{0, 1, {1.5, 1.6, 3.9}, {}, 0}};
  const auto lv = masked_l1(pred, std::span<const L1Site>(at));
  EXPECT_EQ(lv.value, 0.0);
  for (double g : lv.grad.values()) EXPECT_EQ(g, 0.0);

  Grid ones(3, 2, 2, 1.0);
  const auto dims = masked_l1(ones, std::span<const L1Site>(at));
  EXPECT_NEAR(dims.value, 4.0, 1e-12);
  EXPECT_EQ(dims.grad(0, 1, 0), -1.0);
}

TEST(MaskedL1, WeightsMaskChannels) {
  Grid pred(2, 1, 1, 5.0);
  const std::vector<L1Site> sites{{0, 0, {0, 0}, {1, 0}, 0}};
  const auto lv = masked_l1(pred, std::span<const L1Site>(sites));
  EXPECT_DOUBLE_EQ(lv.value, 5.0);
  EXPECT_EQ(lv.grad(1, 0, 0), 0.0);
}

TEST(MaskedL1, GradientAwayFromKinks) {
  CounterRng rng(4);
  Grid pred(2, 5, 5);
  for (auto& v : pred.values()) v = rng.uniform(-1, 1);
  std::vector<L1Site> sites{{1, 1, {0.3, -0.2}, {}, 0}, {3, 4, {0.9, 0.1}, {}, 0}};
  const auto analytic = masked_l1(pred, std::span<const L1Site>(sites));
  expect_grad_close(analytic.grad.values(),
                    numeric_grad(pred, [&](const DenseGrid<Quad>& p) { return masked_l1(p, std::span<const L1Site>(sites)); }),
                    1e-6);
}

TEST(DepthLoss, WorkedExamples) {
  const std::vector<DepthSite> one{{0, 0, 1.0}};
  EXPECT_NEAR(depth_loss(Grid(1, 1, 1, 0.0), std::span<const DepthSite>(one)).value, 0.0, 1e-15);
  const std::vector<DepthSite> nine{{0, 0, 9.0}};
  EXPECT_NEAR(depth_loss(Grid(1, 1, 1, -std::log(9.0)), std::span<const DepthSite>(nine)).value, 0.0, 1e-12);
  const std::vector<DepthSite> three{{0, 0, 3.0}};
  EXPECT_DOUBLE_EQ(depth_loss(Grid(1, 1, 1, 0.0), std::span<const DepthSite>(three)).value, 2.0);
}

TEST(DepthLoss, DecodeAgreesWithSigmoidForm) {
  for (double raw : {-4.0, -1.0, 0.0, 0.5, 3.0}) {
    const double s = 1 / (1 + std::exp(-raw));
    EXPECT_NEAR(decode_depth(raw), 1 / s - 1, 1e-12 * std::max(1.0, 1 / s));
  }
}

TEST(DepthLoss, Gradient) {
  Grid pred(1, 3, 3);
  pred(0, 0, 0) = -2.0;
  pred(0, 2, 1) = 0.7;
  const std::vector<DepthSite> sites{{0, 0, 3.0}, {1, 2, 0.2}};
  const auto analytic = depth_loss(pred, std::span<const DepthSite>(sites));
  expect_grad_close(analytic.grad.values(),
                    numeric_grad(pred, [&](const DenseGrid<Quad>& p) { return depth_loss(p, std::span<const DepthSite>(sites)); }),
                    1e-6);
}

TEST(OrientationLoss, ConfidentCorrectLogits) {
  const double theta = std::numbers::pi / 2;
  const auto t = encode_orientation(theta);
  Grid pred(8, 1, 1);
  for (int c = 0; c < 8; ++c) pred(c, 0, 0) = t[c];
  // +10 on the labelled class of each bin
  pred(0, 0, 0) = 10;
  pred(1, 0, 0) = 0;
  pred(4, 0, 0) = 0;
  pred(5, 0, 0) = 10;
  const std::vector<OrientationSite> sites{{0, 0, theta}};
  const double per_bin = std::log1p(std::exp(-10.0));
  EXPECT_NEAR(per_bin, 4.54e-5, 1e-7);
  EXPECT_NEAR(orientation_loss(pred, std::span<const OrientationSite>(sites)).value, 2 * per_bin, 1e-12);
}

TEST(OrientationLoss, UniformLogitsGiveLn2PerBin) {
  for (double theta : {0.0, 2.0}) {
    const auto t = encode_orientation(theta);
    Grid pred(8, 1, 1);
    for (int c : {2, 3, 6, 7}) pred(c, 0, 0) = t[c];
    const std::vector<OrientationSite> sites{{0, 0, theta}};
    EXPECT_NEAR(orientation_loss(pred, std::span<const OrientationSite>(sites)).value, 2 * std::log(2.0), 1e-12);
  }
}

TEST(OrientationLoss, OverlapSupervisesBothResiduals) {
  Grid pred(8, 1, 1);
  const std::vector<OrientationSite> sites{{0, 0, 0.0}};
  const auto lv = orientation_loss(pred, std::span<const OrientationSite>(sites));
  // targets are (1, 0) and (-1, 0); a zero prediction is off by 1 in each
  EXPECT_NEAR(lv.value, 2 * std::log(2.0) + 2.0, 1e-12);
  EXPECT_EQ(lv.grad(2, 0, 0), -1.0);
  EXPECT_EQ(lv.grad(6, 0, 0), 1.0);
  const std::vector<OrientationSite> only_b2{{0, 0, 2.0}};
  EXPECT_EQ(orientation_loss(pred, std::span<const OrientationSite>(only_b2)).grad(2, 0, 0), 0.0);
}

TEST(OrientationLoss, GradientRandom) {
  CounterRng rng(8);
  Grid pred(8, 3, 3);
  for (auto& v : pred.values()) v = rng.uniform(-2, 2);
  const std::vector<OrientationSite> sites{{0, 0, 0.4}, {2, 1, -2.5}, {1, 2, 3.0}};
  const auto analytic = orientation_loss(pred, std::span<const OrientationSite>(sites));
  expect_grad_close(
      analytic.grad.values(),
      numeric_grad(pred, [&](const DenseGrid<Quad>& p) { return orientation_loss(p, std::span<const OrientationSite>(sites)); }),
      1e-6);
}

TEST(WeightedTotal, Composition) {
  const LossWeights w;
  EXPECT_DOUBLE_EQ(weighted_total<double>({{"heatmap", 1}, {"size", 10}, {"offset", 0.5}}, w), 2.5);
  EXPECT_EQ(weighted_total<double>({{"heatmap", 0}, {"size", 0}, {"offset", 0}}, w), 0.0);
  LossWeights zero{0, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(weighted_total<double>({{"size", 3}, {"offset", 7}}, zero), 0.0);
  EXPECT_THROW(head_weight("nope", w), InputError);
}

TargetSet two_objects() {
  EncoderConfig cfg;
  cfg.input_width = 64;
  cfg.input_height = 64;
  std::vector<ObjectAnnotation> anns(2);
  anns[0].bbox = {4, 4, 20, 28};
  anns[1].bbox = {30, 10, 50, 22};
  for (auto& a : anns) {
    a.depth = 12;
    a.dims3d = std::array<double, 3>{1.5, 1.6, 3.9};
    a.yaw = 1.0;
  }
  return encode(anns, cfg);
}

TEST(TotalLoss, PerfectPredictionAndGradients) {
  const TargetSet ts = two_objects();
  const auto heads = render_head_maps(ts);
  HeadOutputs<double> out{&ts.heatmap, &ts.offset, &ts.size, &*heads.depth, &*heads.dims};
  const auto r = total_loss(out, ts);
  EXPECT_GT(r.terms.at("heatmap"), 0.0);
  EXPECT_EQ(r.terms.at("offset"), 0.0);
  EXPECT_EQ(r.terms.at("size"), 0.0);
  EXPECT_NEAR(r.terms.at("depth"), 0.0, 1e-12);
  EXPECT_EQ(r.terms.at("dims"), 0.0);
  EXPECT_EQ(r.positives, 2u);
  EXPECT_EQ(r.objects, 2u);

  Grid size = ts.size;
  size(0, ts.objects[0].cell_y, ts.objects[0].cell_x) += 4;
  out.size = &size;
  const auto r2 = total_loss(out, ts);
  EXPECT_DOUBLE_EQ(r2.terms.at("size"), 2.0);
  EXPECT_DOUBLE_EQ(r2.total - r.total, 0.1 * 2.0);
  EXPECT_DOUBLE_EQ(r2.gradients.at("size")(0, ts.objects[0].cell_y, ts.objects[0].cell_x), 0.1 * 0.5);
}

TEST(TotalLoss, DuplicatedObjectsLeaveLossUnchanged) {
  EncoderConfig cfg;
  cfg.input_width = 64;
  cfg.input_height = 64;
  std::vector<ObjectAnnotation> anns(2);
  anns[0].bbox = {4, 4, 20, 28};
  anns[1].bbox = {30, 10, 50, 22};
  for (auto& a : anns) {
    a.depth = 12;
    a.dims3d = std::array<double, 3>{1.5, 1.6, 3.9};
    a.yaw = 2.0;
  }
  auto doubled = anns;
  doubled.insert(doubled.end(), anns.begin(), anns.end());
  const auto ts1 = encode(anns, cfg);
  const auto ts2 = encode(doubled, cfg);
  EXPECT_EQ(ts1.heatmap, ts2.heatmap);

  CounterRng rng(2);
  auto noisy = [&](const Grid& like, double lo, double hi) {
    Grid g(like.channels(), like.height(), like.width());
    for (auto& v : g.values()) v = rng.uniform(lo, hi);
    return g;
  };
  const Grid hm = noisy(ts1.heatmap, 0.01, 0.99), off = noisy(ts1.offset, 0, 1), sz = noisy(ts1.size, 0, 30),
             dep = noisy(Grid(1, 16, 16), -3, 0), dim = noisy(Grid(3, 16, 16), 1, 4), ori = noisy(Grid(8, 16, 16), -1, 1);
  const HeadOutputs<double> heads{&hm, &off, &sz, &dep, &dim, &ori};
  const auto a = total_loss(heads, ts1);
  const auto b = total_loss(heads, ts2);
  for (const auto& [name, v] : a.terms) EXPECT_NEAR(v, b.terms.at(name), 1e-12) << name;
}

TEST(TotalLoss, RejectsMissingOrMisshapenHeads) {
  const TargetSet ts = two_objects();
  HeadOutputs<double> out{&ts.heatmap, &ts.offset, nullptr};
  EXPECT_THROW(total_loss(out, ts), InputError);
  const Grid wrong(1, 3, 3);
  out.size = &wrong;
  EXPECT_THROW(total_loss(out, ts), InputError);
}

TEST(Gradcheck, SuiteSeedSeven) {
  for (const auto& [name, r] : gradcheck_suite(7)) {
    EXPECT_TRUE(r.passed()) << name << " " << r.max_rel_error;
    EXPECT_GT(r.checked, 0u) << name;
  }
}

TEST(Gradcheck, DetectsWrongGradient) {
  const Grid pred(1, 1, 2, std::vector<double>{0.3, 0.6});
  const std::vector<double> wrong{1.0, 1.0};
  const auto r = gradcheck([](std::span<const Quad> v) { return v[0] * v[0] + v[1]; }, pred.values(), wrong, {});
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(r.worst_index, 0u);
  EXPECT_NEAR(r.worst_numeric, 0.6, 1e-12);
}

}  // namespace
}  // namespace cpt
