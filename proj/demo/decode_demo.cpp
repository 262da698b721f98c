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


// Encodes a few boxes into training targets, decodes them back from the
// ground-truth maps and prints what survives. The last two boxes share a
// center cell and class, so only one of them comes back. Only class 1
// carries 3D labels.

#include <cstdio>
#include <vector>

#include "cpt/cpt.hpp"

int main() {
  using namespace cpt;
  EncoderConfig cfg;
  cfg.stride = 4;
  cfg.num_classes = 2;
  cfg.input_width = 128;
  cfg.input_height = 96;

  std::vector<ObjectAnnotation> objects(4);
  objects[0].bbox = {10, 12, 58, 40};
  objects[1].bbox = {70, 20, 110, 90};
  objects[1].category = 1;
  objects[1].depth = 12.5;
  objects[1].dims3d = std::array<double, 3>{1.5, 1.6, 3.9};
  objects[1].yaw = 0.4;
  objects[2].bbox = {30, 50, 50, 80};
  objects[3].bbox = {28, 52, 53, 79};

  const TargetSet ts = encode(objects, cfg);
  std::printf("grid %dx%d, %zu same-cell collision(s)\n", cfg.grid_width(), cfg.grid_height(), ts.collisions.size());

  DecodeOptions opts;
  opts.stride = cfg.stride;
  auto dets = decode_boxes(ts.heatmap, ts.offset, ts.size, opts);
  const auto heads = render_head_maps(ts);
  decode_3d(dets, heads.depth ? &*heads.depth : nullptr, heads.dims ? &*heads.dims : nullptr,
            heads.orientation ? &*heads.orientation : nullptr);

  for (const auto& cell_det : dets) {
    const Detection d = to_input_space(cell_det, cfg.stride);
    std::printf("class %d  score %.3f  box (%.2f, %.2f, %.2f, %.2f)", d.category, d.score, d.box.x1, d.box.y1, d.box.x2,
                d.box.y2);
    if (d.category == 1) std::printf("  depth %.3f  yaw %.3f", *d.depth, *d.yaw);
    std::printf("\n");
  }
  std::printf("%zu objects in, %zu detections out\n", objects.size(), dets.size());
}
