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
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "cpt/detection.hpp"
#include "cpt/error.hpp"
#include "cpt/grid.hpp"
#include "cpt/targets.hpp"

namespace cpt {

struct DecodeOptions {
  std::size_t top_k = 100;
  PeakScope scope = PeakScope::kGlobal;
  SizeUnits size_units = SizeUnits::kPixels;  // units of the size map
  int stride = 4;
  double min_score = 0.0;  // peaks must score strictly above this
};

/// Depth from the raw head output: 1 / sigmoid(raw) - 1, which equals
/// exp(-raw) and is evaluated that way.
template <typename T>
T decode_depth(T raw) {
  using std::exp;
  return exp(-raw);
}

/// Picks the bin with the larger in-bin softmax probability (bin 1 on ties)
/// and adds its center back to atan2(sin, cos). Result in (-pi, pi].
inline double decode_orientation(std::span<const double, 8> alpha) {
  // softmax(b)[1] is monotone in b[1] - b[0]
  const double margin1 = alpha[1] - alpha[0];
  const double margin2 = alpha[5] - alpha[4];
  const int j = margin2 > margin1 ? 1 : 0;
  const double theta = std::atan2(alpha[4 * j + 2], alpha[4 * j + 3]) + kBinCenter[j];
  return normalize_angle(theta);
}

inline double decode_orientation(const Orientation8& alpha) {
  return decode_orientation(std::span<const double, 8>(alpha));
}

/// Boxes straight from heatmap peaks, no IoU suppression. Output coordinates
/// are grid cells; the list is sorted by score (ties by channel, y, x).
inline std::vector<Detection> decode_boxes(const Grid& heatmap, const Grid& offset, const Grid& size,
                                           const DecodeOptions& opts = {}) {
  require(offset.channels() == 2 && size.channels() == 2, "decode_boxes: offset and size need 2 channels");
  require(heatmap.same_spatial(offset) && heatmap.same_spatial(size), "decode_boxes: spatial dims differ");
  require(opts.stride >= 1, "decode_boxes: stride must be >= 1");
  const double unit = opts.size_units == SizeUnits::kPixels ? opts.stride : 1.0;
  std::vector<Detection> dets;
  for (const Peak& p : extract_peaks(heatmap, opts.top_k, opts.scope)) {
    if (!(p.score > opts.min_score)) continue;
    Detection d;
    d.category = p.channel;
    d.score = p.score;
    d.peak_x = p.x;
    d.peak_y = p.y;
    d.center = {p.x + offset(0, p.y, p.x), p.y + offset(1, p.y, p.x)};
    const double w = size(0, p.y, p.x) / unit;
    const double h = size(1, p.y, p.x) / unit;
    d.box = {d.center.x - w / 2, d.center.y - h / 2, d.center.x + w / 2, d.center.y + h / 2};
    dets.push_back(std::move(d));
  }
  return dets;
}

/// Reads depth, dimensions and yaw at each detection's peak cell. Any head
/// may be null.
inline void decode_3d(std::span<Detection> dets, const Grid* depth, const Grid* dims, const Grid* rotation) {
  if (depth) require(depth->channels() == 1, "decode_3d: depth head needs 1 channel");
  if (dims) require(dims->channels() == 3, "decode_3d: dims head needs 3 channels");
  if (rotation) require(rotation->channels() == 8, "decode_3d: orientation head needs 8 channels");
  for (auto& d : dets) {
    if (depth) d.depth = decode_depth(depth->at(0, d.peak_y, d.peak_x));
    if (dims) {
      d.dims3d = std::array<double, 3>{dims->at(0, d.peak_y, d.peak_x), dims->at(1, d.peak_y, d.peak_x),
                                       dims->at(2, d.peak_y, d.peak_x)};
    }
    if (rotation) {
      Orientation8 alpha;
      for (int c = 0; c < 8; ++c) alpha[c] = rotation->at(c, d.peak_y, d.peak_x);
      d.yaw = decode_orientation(alpha);
    }
  }
}

inline Detection to_input_space(Detection det, int stride) {
  require(stride >= 1, "to_input_space: stride must be >= 1");
  const double s = stride;
  det.box = det.box.scaled(s);
  det.center = {det.center.x * s, det.center.y * s};
  for (auto& j : det.joints) {
    j.x *= s;
    j.y *= s;
  }
  return det;
}

// ---------------------------------------------------------------------------
// Pose

enum class JointCandidates {
  kPeaks,  // 8-neighbor peaks of each joint heatmap channel
  kCells,  // every cell of the channel
};

struct PoseDecodeOptions {
  double joint_thresh = 0.1;
  JointCandidates candidates = JointCandidates::kPeaks;
  bool refine_before_snap = true;  // apply the joint local offset before the nearest-candidate search
  int person_channel = 0;
};

struct JointCandidate {
  double x = 0;  // position used for matching
  double y = 0;
  double refined_x = 0;
  double refined_y = 0;
  double score = 0;
};

/// Candidates of one joint type scoring strictly above the threshold, in
/// peak order (score descending, then y, x).
inline std::vector<JointCandidate> joint_candidates(const Grid& joint_heatmap, const Grid& joint_offset, int joint,
                                                    std::size_t top_k, const PoseDecodeOptions& opts) {
  std::vector<Peak> cells;
  if (opts.candidates == JointCandidates::kPeaks) {
    Grid plane(1, joint_heatmap.height(), joint_heatmap.width(),
               std::vector<double>(joint_heatmap.channel(joint).begin(), joint_heatmap.channel(joint).end()));
    cells = extract_peaks(plane, top_k, PeakScope::kPerChannel);
  } else {
    for (int y = 0; y < joint_heatmap.height(); ++y) {
      for (int x = 0; x < joint_heatmap.width(); ++x) cells.push_back({x, y, 0, joint_heatmap(joint, y, x)});
    }
    std::sort(cells.begin(), cells.end(), peak_before);
  }
  std::vector<JointCandidate> out;
  for (const Peak& p : cells) {
    if (!(p.score > opts.joint_thresh)) continue;
    JointCandidate c;
    c.refined_x = p.x + joint_offset(0, p.y, p.x);
    c.refined_y = p.y + joint_offset(1, p.y, p.x);
    c.x = opts.refine_before_snap ? c.refined_x : p.x;
    c.y = opts.refine_before_snap ? c.refined_y : p.y;
    c.score = p.score;
    out.push_back(c);
  }
  return out;
}

/// Nearest candidate inside `box` (closed) to `target`, first one on ties.
inline std::optional<std::size_t> snap_joint(std::span<const JointCandidate> candidates, const Box& box,
                                             Point2 target) {
  std::optional<std::size_t> best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!box.contains(c.x, c.y)) continue;
    const double dx = c.x - target.x;
    const double dy = c.y - target.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

/// Person boxes from the center heatmap, joints regressed from the center
/// and snapped to the nearest in-box joint heatmap detection. Joints with no
/// in-box candidate keep their regressed position.
inline std::vector<Detection> decode_pose(const Grid& heatmap, const Grid& offset, const Grid& size,
                                          const Grid& joint_offsets, const Grid& joint_heatmap,
                                          const Grid& joint_local_offset, const DecodeOptions& opts = {},
                                          const PoseDecodeOptions& pose_opts = {}) {
  const int k = joint_heatmap.channels();
  require(joint_offsets.channels() == 2 * k, "decode_pose: joint offset head needs 2 channels per joint");
  require(joint_local_offset.channels() == 2, "decode_pose: joint local offset head needs 2 channels");
  require(heatmap.same_spatial(joint_offsets) && heatmap.same_spatial(joint_heatmap) &&
              heatmap.same_spatial(joint_local_offset),
          "decode_pose: spatial dims differ");
  require(pose_opts.person_channel >= 0 && pose_opts.person_channel < heatmap.channels(),
          "decode_pose: invalid person channel");
  const auto plane = heatmap.channel(pose_opts.person_channel);
  Grid person(1, heatmap.height(), heatmap.width(), std::vector<double>(plane.begin(), plane.end()));
  auto dets = decode_boxes(person, offset, size, opts);
  for (auto& d : dets) d.category = pose_opts.person_channel;

  std::vector<std::vector<JointCandidate>> candidates(k);
  for (int j = 0; j < k; ++j) {
    candidates[j] = joint_candidates(joint_heatmap, joint_local_offset, j, opts.top_k, pose_opts);
  }
  for (auto& d : dets) {
    d.joints.resize(k);
    for (int j = 0; j < k; ++j) {
      const Point2 regressed{d.peak_x + joint_offsets(2 * j, d.peak_y, d.peak_x),
                             d.peak_y + joint_offsets(2 * j + 1, d.peak_y, d.peak_x)};
      const auto pick = snap_joint(candidates[j], d.box, regressed);
      if (pick) {
        const auto& c = candidates[j][*pick];
        d.joints[j] = {c.refined_x, c.refined_y, JointSource::kSnapped};
      } else {
        d.joints[j] = {regressed.x, regressed.y, JointSource::kRegressed};
      }
    }
  }
  return dets;
}

}  // namespace cpt
