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

#include "cpt/geometry.hpp"
#include "cpt/detection.hpp"
#include "cpt/random.hpp"
#include "oracles.hpp"

namespace cpt {
namespace {

TEST(Iou, Basics) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {5, 0, 15, 10}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(iou({1, 1, 1, 1}, {1, 1, 1, 1}), 0.0);
}

TEST(Iou, SymmetricAndBounded) {
  CounterRng rng(17);
  for (int i = 0; i < 500; ++i) {
    const double ax = rng.uniform(0, 50), ay = rng.uniform(0, 50), bx = rng.uniform(0, 50), by = rng.uniform(0, 50);
    const Box a{ax, ay, ax + rng.uniform(0, 30), ay + rng.uniform(0, 30)};
    const Box b{bx, by, bx + rng.uniform(0, 30), by + rng.uniform(0, 30)};
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_GE(iou(a, b), 0.0);
    EXPECT_LE(iou(a, b), 1.0);
    EXPECT_NEAR(iou(a, b), oracle::box_iou(a, b), 1e-12);
  }
}

Detection det(Box b, double score, int category = 0) {
  Detection d;
  d.box = b;
  d.score = score;
  d.category = category;
  return d;
}

TEST(GreedyNms, Examples) {
  const std::vector<Detection> one{det({0, 0, 4, 4}, 0.5)};
  EXPECT_EQ(greedy_nms(one, 0.5).size(), 1u);
  const std::vector<Detection> same{det({0, 0, 4, 4}, 0.9), det({0, 0, 4, 4}, 0.8)};
  const auto kept = greedy_nms(same, 0.5);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);
  const std::vector<Detection> apart{det({0, 0, 4, 4}, 0.9), det({10, 10, 14, 14}, 0.8)};
  EXPECT_EQ(greedy_nms(apart, 0.5).size(), 2u);
  const std::vector<Detection> other_class{det({0, 0, 4, 4}, 0.9), det({0, 0, 4, 4}, 0.8, 1)};
  EXPECT_EQ(greedy_nms(other_class, 0.5).size(), 2u);
}

TEST(GreedyNms, MatchesReference) {
  CounterRng rng(23);
  for (int t = 0; t < 100; ++t) {
    std::vector<Detection> dets;
    const int n = 1 + static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) {
      const double x = rng.uniform(0, 40), y = rng.uniform(0, 40);
      // coarse scores force ties
      dets.push_back(det({x, y, x + rng.uniform(2, 20), y + rng.uniform(2, 20)}, std::round(rng.uniform() * 5) / 5,
                         static_cast<int>(rng.below(2))));
    }
    const auto kept = greedy_nms(dets, 0.5);
    const auto want = oracle::nms(dets, 0.5);
    ASSERT_EQ(kept.size(), want.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      EXPECT_EQ(kept[i].box.x1, dets[want[i]].box.x1);
      EXPECT_EQ(kept[i].score, dets[want[i]].score);
    }
  }
}

TEST(Anchors, CountOn800Square) {
  const AnchorConfig cfg;
  EXPECT_EQ(anchor_positions(800, 16), 50);
  EXPECT_EQ(anchor_count(800, 800, cfg), 37500u);
  EXPECT_EQ(anchor_grid(800, 800, cfg).size(), 37500u);
  EXPECT_EQ(anchor_count(1199.9, 800, cfg), 15u * 50u * 75u);
}

TEST(Anchors, Shapes) {
  const auto shapes = anchor_shapes(AnchorConfig{});
  ASSERT_EQ(shapes.size(), 15u);
  const Box sq = anchor_box(8, 8, shapes[1]);
  EXPECT_DOUBLE_EQ(sq.x1, -8);
  EXPECT_DOUBLE_EQ(sq.y1, -8);
  EXPECT_DOUBLE_EQ(sq.x2, 24);
  EXPECT_DOUBLE_EQ(sq.y2, 24);
  const auto tall = shapes[2];
  EXPECT_NEAR(tall.width, 22.627, 1e-3);
  EXPECT_NEAR(tall.height, 45.255, 1e-3);
  EXPECT_NEAR(tall.width * tall.height, 1024.0, 1e-9);
}

TEST(Anchors, ResizeScale) {
  EXPECT_DOUBLE_EQ(anchor_resize_scale(640, 400, AnchorConfig{}), 2.0);
  EXPECT_DOUBLE_EQ(anchor_resize_scale(1600, 2000, AnchorConfig{}), 0.5);
  AnchorConfig bad;
  bad.stride = 0;
  EXPECT_THROW(bad.validate(), InputError);
}

}  // namespace
}  // namespace cpt
