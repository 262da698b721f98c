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

#pragma once

#include <cmath>
#include <set>
#include <string>
#include <tuple>

#include "cpt/dataset.hpp"
#include "cpt/random.hpp"
#include "cpt/targets.hpp"

namespace cpt {

struct SyntheticOptions {
  int images = 10;
  int min_objects = 1;
  int max_objects = 50;
  int width = 512;
  int height = 384;
  int num_classes = 3;
  int stride = 4;
  double min_size = 8;
  double max_size = 160;
  int collision_pairs = 0;  // same-class, same-cell pairs injected per image
  bool with_3d = false;
  int num_joints = 0;
};

/// Random scenes whose objects occupy pairwise distinct center cells at
/// `stride` (whatever their class, since the size and offset maps are shared),
/// except for the requested same-class injected collision pairs.
inline Dataset make_synthetic_dataset(const SyntheticOptions& opts, CounterRng& rng) {
  require(opts.images >= 0 && opts.min_objects >= 0 && opts.max_objects >= opts.min_objects,
          "synthetic: bad object counts");
  require(opts.num_classes >= 1 && opts.stride >= 1, "synthetic: bad class count or stride");
  require(opts.min_size > 0 && opts.max_size >= opts.min_size, "synthetic: bad size range");
  require(opts.max_size <= opts.width && opts.max_size <= opts.height, "synthetic: objects larger than the image");
  Dataset ds;
  for (int c = 0; c < opts.num_classes; ++c) ds.categories.push_back({c + 1, "class" + std::to_string(c)});
  std::int64_t next_id = 1;

  auto random_object = [&](int category, double cx, double cy) {
    const double w = rng.uniform(opts.min_size, opts.max_size);
    const double h = rng.uniform(opts.min_size, opts.max_size);
    DatasetAnnotation a;
    a.id = next_id++;
    a.object.category = category;
    const double x1 = std::clamp(cx - w / 2, 0.0, opts.width - w);
    const double y1 = std::clamp(cy - h / 2, 0.0, opts.height - h);
    a.object.bbox = {x1, y1, x1 + w, y1 + h};
    a.area = a.object.bbox.area();
    if (opts.with_3d) {
      a.object.depth = rng.uniform(1.0, 80.0);
      a.object.dims3d = std::array<double, 3>{rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0), rng.uniform(2.0, 6.0)};
      a.object.yaw = normalize_angle(rng.uniform(-kPi, kPi));
    }
    for (int j = 0; j < opts.num_joints; ++j) {
      a.object.keypoints.push_back({rng.uniform(a.object.bbox.x1, a.object.bbox.x2),
                                    rng.uniform(a.object.bbox.y1, a.object.bbox.y2), rng.bernoulli(0.8)});
    }
    return a;
  };
  auto cell_of = [&](const DatasetAnnotation& a) {
    return std::tuple<int, std::int64_t, std::int64_t>{
        a.object.category, static_cast<std::int64_t>(std::floor(a.object.bbox.center_x() / opts.stride)),
        static_cast<std::int64_t>(std::floor(a.object.bbox.center_y() / opts.stride))};
  };

  for (int k = 0; k < opts.images; ++k) {
    const std::int64_t image_id = k + 1;
    ds.images.push_back({image_id, opts.width, opts.height});
    const int n = opts.min_objects + static_cast<int>(rng.below(opts.max_objects - opts.min_objects + 1));
    std::set<std::pair<std::int64_t, std::int64_t>> used;  // center cells, any class
    std::vector<DatasetAnnotation> placed;
    int attempts = 0;
    while (static_cast<int>(placed.size()) < n && attempts++ < 100 * (n + 1)) {
      auto a = random_object(static_cast<int>(rng.below(opts.num_classes)), rng.uniform(0, opts.width),
                             rng.uniform(0, opts.height));
      a.image_id = image_id;
      const auto [unused, cx, cy] = cell_of(a);
      if (!used.insert({cx, cy}).second) continue;
      placed.push_back(std::move(a));
    }
    const std::size_t originals = placed.size();
    std::set<std::size_t> partnered;
    for (int p = 0; p < opts.collision_pairs && partnered.size() < originals; ++p) {
      std::size_t target;
      do {
        target = rng.below(originals);
      } while (partnered.count(target));
      partnered.insert(target);
      const auto& base = placed[target];
      // a different box sharing the center cell of `base`
      for (int tries = 0; tries < 1000; ++tries) {
        const double w = rng.uniform(opts.min_size, opts.max_size);
        const double h = rng.uniform(opts.min_size, opts.max_size);
        const double cx = base.object.bbox.center_x();
        const double cy = base.object.bbox.center_y();
        if (cx - w / 2 < 0 || cy - h / 2 < 0 || cx + w / 2 > opts.width || cy + h / 2 > opts.height) continue;
        DatasetAnnotation a = base;
        a.id = next_id++;
        a.object.bbox = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
        a.area = a.object.bbox.area();
        if (cell_of(a) != cell_of(base)) continue;
        placed.push_back(std::move(a));
        break;
      }
    }
    for (auto& a : placed) ds.annotations.push_back(std::move(a));
  }
  return ds;
}

}  // namespace cpt
