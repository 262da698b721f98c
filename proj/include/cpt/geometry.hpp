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

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "cpt/error.hpp"

namespace cpt {

/// Axis-aligned box with corners (x1, y1) and (x2, y2), x2 >= x1, y2 >= y1.
struct Box {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return (x1 + x2) / 2; }
  double center_y() const { return (y1 + y2) / 2; }
  bool valid() const { return x2 >= x1 && y2 >= y1; }
  bool contains(double x, double y) const { return x >= x1 && x <= x2 && y >= y1 && y <= y2; }
  Box scaled(double s) const { return {x1 * s, y1 * s, x2 * s, y2 * s}; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Intersection over union. Two boxes with zero union give 0.
inline double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

/// Anything with a box, a score and a category can be suppressed.
template <typename D>
concept Scored = requires(const D& d) {
  { d.box } -> std::convertible_to<Box>;
  { d.score } -> std::convertible_to<double>;
  { d.category } -> std::convertible_to<int>;
};

/// Greedy per-class NMS: walk detections by descending score (input order on
/// ties), keep one, drop every later same-class detection with IoU > thresh.
/// Returns the kept detections in that walk order.
template <Scored D>
std::vector<D> greedy_nms(std::span<const D> dets, double iou_thresh) {
  require(iou_thresh > 0 && iou_thresh < 1, "greedy_nms: iou threshold must be in (0, 1)");
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<D> kept;
  std::vector<bool> removed(dets.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t a = order[i];
    if (removed[a]) continue;
    kept.push_back(dets[a]);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const std::size_t b = order[j];
      if (!removed[b] && dets[b].category == dets[a].category && iou(dets[a].box, dets[b].box) > iou_thresh) {
        removed[b] = true;
      }
    }
  }
  return kept;
}

template <Scored D>
std::vector<D> greedy_nms(const std::vector<D>& dets, double iou_thresh) {
  return greedy_nms(std::span<const D>(dets), iou_thresh);
}

// ---------------------------------------------------------------------------
// Anchors

struct AnchorConfig {
  std::vector<double> sizes{32, 64, 128, 256, 512};
  std::vector<double> ratios{0.5, 1, 2};
  double stride = 16;
  double resize_shorter = 800;

  void validate() const {
    require(!sizes.empty() && !ratios.empty(), "anchor sizes and ratios must be non-empty");
    require(stride >= 1, "anchor stride must be >= 1");
    for (double s : sizes) require(s > 0, "anchor sizes must be positive");
    for (double r : ratios) require(r > 0, "anchor ratios must be positive");
  }
};

struct AnchorShape {
  double width;
  double height;
};

/// Area-preserving shapes with ratio = h / w, ordered size-major.
inline std::vector<AnchorShape> anchor_shapes(const AnchorConfig& cfg) {
  std::vector<AnchorShape> shapes;
  for (double size : cfg.sizes) {
    for (double ratio : cfg.ratios) {
      const double root = std::sqrt(ratio);
      shapes.push_back({size / root, size * root});
    }
  }
  return shapes;
}

/// Number of anchor centers along an axis of the given extent:
/// floor((extent - S/2) / S) + 1, or zero when the extent is below S/2.
inline int anchor_positions(double extent, double stride) {
  const double span = (extent - stride / 2) / stride;
  return span < 0 ? 0 : static_cast<int>(std::floor(span)) + 1;
}

inline double anchor_center(int index, double stride) { return stride / 2 + index * stride; }

inline Box anchor_box(double cx, double cy, const AnchorShape& shape) {
  return {cx - shape.width / 2, cy - shape.height / 2, cx + shape.width / 2, cy + shape.height / 2};
}

inline std::size_t anchor_count(double image_w, double image_h, const AnchorConfig& cfg) {
  return cfg.sizes.size() * cfg.ratios.size() *
         static_cast<std::size_t>(anchor_positions(image_w, cfg.stride)) *
         static_cast<std::size_t>(anchor_positions(image_h, cfg.stride));
}

/// Every anchor of an image already resized to its working resolution.
/// Anchors are not clipped to the image.
inline std::vector<Box> anchor_grid(double image_w, double image_h, const AnchorConfig& cfg) {
  cfg.validate();
  const auto shapes = anchor_shapes(cfg);
  const int nx = anchor_positions(image_w, cfg.stride);
  const int ny = anchor_positions(image_h, cfg.stride);
  std::vector<Box> anchors;
  anchors.reserve(shapes.size() * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      for (const auto& shape : shapes) {
        anchors.push_back(anchor_box(anchor_center(i, cfg.stride), anchor_center(j, cfg.stride), shape));
      }
    }
  }
  return anchors;
}

/// Scale factor that brings the shorter image side to cfg.resize_shorter.
inline double anchor_resize_scale(double image_w, double image_h, const AnchorConfig& cfg) {
  require(image_w > 0 && image_h > 0, "image dimensions must be positive");
  return cfg.resize_shorter / std::min(image_w, image_h);
}

}  // namespace cpt
