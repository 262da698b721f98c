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
#include <cstdint>
#include <map>
#include <span>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "cpt/dataset.hpp"
#include "cpt/geometry.hpp"
#include "cpt/parallel.hpp"

namespace cpt {

struct CollisionPair {
  std::int64_t image_id = 0;
  int category = 0;
  std::int64_t first = 0;  // annotation ids, first < second
  std::int64_t second = 0;
  friend bool operator==(const CollisionPair&, const CollisionPair&) = default;
  friend auto operator<=>(const CollisionPair&, const CollisionPair&) = default;
};

/// Object-size buckets by area: small < 32^2 <= medium <= 96^2 < large.
enum class SizeBucket { kSmall, kMedium, kLarge };

inline SizeBucket size_bucket(double area) {
  if (area < 32.0 * 32.0) return SizeBucket::kSmall;
  if (area <= 96.0 * 96.0) return SizeBucket::kMedium;
  return SizeBucket::kLarge;
}

struct BucketCounts {
  std::size_t small = 0;
  std::size_t medium = 0;
  std::size_t large = 0;

  std::size_t& operator[](SizeBucket b) { return b == SizeBucket::kSmall ? small : (b == SizeBucket::kMedium ? medium : large); }
  std::size_t total() const { return small + medium + large; }
};

struct IouCollisions {
  double threshold = 0;
  std::size_t count = 0;
  std::vector<CollisionPair> pairs;
};

struct CollisionReport {
  int stride = 4;
  std::size_t n_center = 0;
  std::vector<CollisionPair> center_pairs;
  std::vector<IouCollisions> iou;  // in requested threshold order
  std::size_t objects = 0;         // M
  BucketCounts buckets;            // M_S, M_M, M_L
  std::size_t excluded = 0;        // annotations dropped at load
};

struct AnchorReport {
  std::size_t n_anchor = 0;
  std::size_t objects = 0;
  BucketCounts forced;
  BucketCounts totals;
  double iou_thresh = 0.5;

  static double fraction(std::size_t part, std::size_t whole) {
    return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
  }
};

struct AnalysisOptions {
  bool oracle = false;  // use the direct O(n^2) / exhaustive definitions
};

namespace detail {

inline void count_objects(const Dataset& ds, CollisionReport& report) {
  report.objects = ds.annotations.size();
  report.excluded = ds.dropped;
  for (const auto& a : ds.annotations) report.buckets[size_bucket(a.area)]++;
}

inline std::pair<std::int64_t, std::int64_t> strided_center(const Box& b, int stride) {
  return {static_cast<std::int64_t>(std::floor((b.x1 + b.x2) / 2 / stride)),
          static_cast<std::int64_t>(std::floor((b.y1 + b.y2) / 2 / stride))};
}

/// Per image, per category lists of annotation indices.
inline std::map<std::pair<std::int64_t, int>, std::vector<std::size_t>> groups(const Dataset& ds) {
  std::map<std::pair<std::int64_t, int>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < ds.annotations.size(); ++i) {
    const auto& a = ds.annotations[i];
    out[{a.image_id, a.object.category}].push_back(i);
  }
  return out;
}

inline CollisionPair make_pair(const Dataset& ds, std::size_t i, std::size_t j) {
  const auto& a = ds.annotations[i];
  const auto& b = ds.annotations[j];
  return {a.image_id, a.object.category, std::min(a.id, b.id), std::max(a.id, b.id)};
}

}  // namespace detail

/// Unordered same-image, same-category pairs whose box centers floor to the
/// same cell at the given stride.
inline CollisionReport count_center_collisions(const Dataset& ds, int stride = 4, const AnalysisOptions& opts = {}) {
  require(stride >= 1, "stride must be >= 1");
  CollisionReport report;
  report.stride = stride;
  detail::count_objects(ds, report);
  if (opts.oracle) {
    for (const auto& [key, members] : detail::groups(ds)) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          const auto& ba = ds.annotations[members[a]].object.bbox;
          const auto& bb = ds.annotations[members[b]].object.bbox;
          if (detail::strided_center(ba, stride) == detail::strided_center(bb, stride)) {
            report.center_pairs.push_back(detail::make_pair(ds, members[a], members[b]));
          }
        }
      }
    }
  } else {
    using Key = std::tuple<std::int64_t, int, std::int64_t, std::int64_t>;
    struct KeyHash {
      std::size_t operator()(const Key& k) const {
        std::size_t h = std::hash<std::int64_t>{}(std::get<0>(k));
        for (std::int64_t v : {std::int64_t(std::get<1>(k)), std::get<2>(k), std::get<3>(k)}) {
          h ^= std::hash<std::int64_t>{}(v) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
        }
        return h;
      }
    };
    std::unordered_map<Key, std::vector<std::size_t>, KeyHash> cells;
    for (std::size_t i = 0; i < ds.annotations.size(); ++i) {
      const auto& a = ds.annotations[i];
      const auto [cx, cy] = detail::strided_center(a.object.bbox, stride);
      cells[{a.image_id, a.object.category, cx, cy}].push_back(i);
    }
    for (const auto& [key, members] : cells) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          report.center_pairs.push_back(detail::make_pair(ds, members[a], members[b]));
        }
      }
    }
  }
  std::sort(report.center_pairs.begin(), report.center_pairs.end());
  report.n_center = report.center_pairs.size();
  return report;
}

/// Same-image, same-category pairs with IoU strictly above each threshold.
inline CollisionReport count_iou_collisions(const Dataset& ds, std::span<const double> thresholds,
                                            const AnalysisOptions& opts = {}) {
  for (double t : thresholds) require(t >= 0 && t < 1, "IoU thresholds must be in [0, 1)");
  CollisionReport report;
  detail::count_objects(ds, report);
  for (double t : thresholds) report.iou.push_back({t, 0, {}});
  auto visit = [&](std::size_t i, std::size_t j) {
    const double v = iou(ds.annotations[i].object.bbox, ds.annotations[j].object.bbox);
    for (auto& level : report.iou) {
      if (v > level.threshold) level.pairs.push_back(detail::make_pair(ds, i, j));
    }
  };
  for (auto [key, members] : detail::groups(ds)) {
    if (opts.oracle) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) visit(members[a], members[b]);
      }
      continue;
    }
    // sweep along x
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return ds.annotations[a].object.bbox.x1 < ds.annotations[b].object.bbox.x1;
    });
    for (std::size_t a = 0; a < members.size(); ++a) {
      const double right = ds.annotations[members[a]].object.bbox.x2;
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        if (ds.annotations[members[b]].object.bbox.x1 >= right) break;
        visit(members[a], members[b]);
      }
    }
  }
  for (auto& level : report.iou) {
    std::sort(level.pairs.begin(), level.pairs.end());
    level.count = level.pairs.size();
  }
  return report;
}

// ---------------------------------------------------------------------------
// Forced anchor assignments

/// Max IoU of `box` against every anchor of a W x H image, by enumeration.
inline double max_anchor_iou_exhaustive(const Box& box, double image_w, double image_h, const AnchorConfig& cfg) {
  double best = 0;
  for (const Box& a : anchor_grid(image_w, image_h, cfg)) best = std::max(best, iou(box, a));
  return best;
}

/// Same value from the grid positions bracketing the box center, per shape.
inline double max_anchor_iou_nearest(const Box& box, double image_w, double image_h, const AnchorConfig& cfg) {
  const int nx = anchor_positions(image_w, cfg.stride);
  const int ny = anchor_positions(image_h, cfg.stride);
  if (nx == 0 || ny == 0) return 0;
  auto bracket = [&](double center, int n) {
    const int lo = std::clamp(static_cast<int>(std::floor((center - cfg.stride / 2) / cfg.stride)), 0, n - 1);
    return std::pair<int, int>{lo, std::min(lo + 1, n - 1)};
  };
  const auto [i0, i1] = bracket(box.center_x(), nx);
  const auto [j0, j1] = bracket(box.center_y(), ny);
  double best = 0;
  for (const auto& shape : anchor_shapes(cfg)) {
    for (int j : {j0, j1}) {
      for (int i : {i0, i1}) {
        best = std::max(best, iou(box, anchor_box(anchor_center(i, cfg.stride), anchor_center(j, cfg.stride), shape)));
      }
    }
  }
  return best;
}

/// Whether the box's best anchor falls below `iou_thresh`. Near the
/// threshold the fast path defers to enumeration so both paths agree exactly.
inline bool is_forced_assignment(const Box& box, double image_w, double image_h, const AnchorConfig& cfg,
                                 double iou_thresh, bool oracle) {
  if (oracle) return max_anchor_iou_exhaustive(box, image_w, image_h, cfg) < iou_thresh;
  const double fast = max_anchor_iou_nearest(box, image_w, image_h, cfg);
  if (std::abs(fast - iou_thresh) < 1e-9) return max_anchor_iou_exhaustive(box, image_w, image_h, cfg) < iou_thresh;
  return fast < iou_thresh;
}

/// Resizes each image so its shorter side is cfg.resize_shorter, scales its
/// boxes alike and counts boxes whose best anchor IoU is below iou_thresh.
/// Buckets use the original-resolution area.
inline AnchorReport count_forced_assignments(const Dataset& ds, const AnchorConfig& cfg = {}, double iou_thresh = 0.5,
                                             const AnalysisOptions& opts = {}) {
  cfg.validate();
  const auto by_image = ds.annotations_by_image();
  std::vector<std::vector<char>> forced(ds.images.size());
  parallel_for(ds.images.size(), [&](std::size_t k) {
    const auto& im = ds.images[k];
    const double scale = anchor_resize_scale(im.width, im.height, cfg);
    const double w = im.width * scale;
    const double h = im.height * scale;
    for (auto a : by_image[k]) {
      forced[k].push_back(is_forced_assignment(ds.annotations[a].object.bbox.scaled(scale), w, h, cfg, iou_thresh,
                                               opts.oracle));
    }
  });
  AnchorReport report;
  report.iou_thresh = iou_thresh;
  report.objects = ds.annotations.size();
  for (std::size_t k = 0; k < ds.images.size(); ++k) {
    for (std::size_t n = 0; n < by_image[k].size(); ++n) {
      const auto bucket = size_bucket(ds.annotations[by_image[k][n]].area);
      report.totals[bucket]++;
      if (forced[k][n]) {
        report.forced[bucket]++;
        ++report.n_anchor;
      }
    }
  }
  return report;
}

}  // namespace cpt
