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

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "cpt/geometry.hpp"
#include "cpt/grid.hpp"

namespace cpt {

enum class JointSource { kRegressed, kSnapped };

struct Joint {
  double x = 0;
  double y = 0;
  JointSource source = JointSource::kRegressed;
};

/// One decoded object. Coordinates are output-grid cells unless converted
/// with to_input_space.
struct Detection {
  std::int64_t image_id = 0;
  int category = 0;
  double score = 0;
  Box box;
  Point2 center;
  int peak_x = 0;
  int peak_y = 0;
  std::optional<double> depth;
  std::optional<std::array<double, 3>> dims3d;
  std::optional<double> yaw;
  std::vector<Joint> joints;
};

}  // namespace cpt
