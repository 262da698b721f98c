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
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "cpt/error.hpp"
#include "cpt/geometry.hpp"
#include "cpt/grid.hpp"

namespace cpt {

enum class SizeUnits { kPixels, kCells };

inline const char* units_name(SizeUnits u) { return u == SizeUnits::kPixels ? "pixels" : "cells"; }

struct EncoderConfig {
  int stride = 4;
  int num_classes = 1;
  int num_joints = 17;
  double min_overlap = 0.7;
  int input_width = 0;
  int input_height = 0;
  SizeUnits size_units = SizeUnits::kPixels;

  // Inputs are zero-padded up to a multiple of the stride.
  int grid_width() const { return (input_width + stride - 1) / stride; }
  int grid_height() const { return (input_height + stride - 1) / stride; }
  int padded_width() const { return grid_width() * stride; }
  int padded_height() const { return grid_height() * stride; }

  void validate() const {
    require(stride >= 1, "stride must be >= 1");
    require(num_classes >= 1, "num_classes must be >= 1");
    require(num_joints >= 0, "num_joints must be >= 0");
    require(min_overlap > 0 && min_overlap < 1, "min_overlap must be in (0, 1)");
    require(input_width >= 1 && input_height >= 1, "input dimensions must be >= 1");
  }
};

struct Keypoint {
  double x = 0;
  double y = 0;
  bool visible = false;
};

/// Ground truth for one object in input-image pixels.
struct ObjectAnnotation {
  Box bbox;
  int category = 0;
  std::vector<Keypoint> keypoints;
  std::optional<double> depth;
  std::optional<std::array<double, 3>> dims3d;  // (h, w, l) meters
  std::optional<double> yaw;
};

using Orientation8 = std::array<double, 8>;

struct ObjectRecord {
  int category = 0;
  int cell_x = 0;
  int cell_y = 0;
  double offset_x = 0;
  double offset_y = 0;
  double size_w = 0;  // in EncoderConfig::size_units
  double size_h = 0;
  double sigma = 0;
  bool clamped = false;
  std::optional<double> depth;
  std::optional<std::array<double, 3>> dims3d;
  std::optional<double> yaw;
  std::optional<Orientation8> orientation;
  std::vector<double> joint_offsets;  // 2 per joint, cells relative to (cell_x, cell_y)
  std::vector<double> joint_mask;     // 1 per joint
};

struct JointRecord {
  std::size_t object = 0;
  int joint = 0;
  int cell_x = 0;
  int cell_y = 0;
  double offset_x = 0;
  double offset_y = 0;
};

/// Two same-class objects whose centers floor to the same cell.
struct CenterCollision {
  std::size_t first = 0;
  std::size_t second = 0;
  int category = 0;
  int cell_x = 0;
  int cell_y = 0;
};

struct PoseTargets {
  Grid joint_heatmap;       // num_joints channels
  Grid joint_local_offset;  // 2 channels
  std::vector<JointRecord> joints;
};

struct TargetSet {
  EncoderConfig config;
  Grid heatmap;
  Grid size;
  Grid offset;
  Grid center_mask;
  std::vector<ObjectRecord> objects;  // one per input annotation, same order
  std::vector<CenterCollision> collisions;
  int clamped = 0;
  std::optional<PoseTargets> pose;
};

// ---------------------------------------------------------------------------
// Orientation: two overlapping bins with in-bin sin/cos regression.

inline constexpr double kPi = std::numbers::pi;
inline constexpr std::array<double, 2> kBinLow{-7 * kPi / 6, -kPi / 6};
inline constexpr std::array<double, 2> kBinHigh{kPi / 6, 7 * kPi / 6};
inline constexpr std::array<double, 2> kBinCenter{-kPi / 2, kPi / 2};

/// Maps any angle into (-pi, pi].
inline double normalize_angle(double theta) {
  double r = std::fmod(theta, 2 * kPi);
  if (r > kPi) r -= 2 * kPi;
  if (r <= -kPi) r += 2 * kPi;
  return r;
}

inline std::array<int, 2> orientation_bins(double yaw) {
  return {yaw >= kBinLow[0] && yaw <= kBinHigh[0] ? 1 : 0, yaw >= kBinLow[1] && yaw <= kBinHigh[1] ? 1 : 0};
}

/// Layout [b1(2), a1(2), b2(2), a2(2)]: b_i = (1 - c_i, c_i) is the one-hot bin
/// label and a_i = (sin, cos) of the angle relative to the bin center.
inline Orientation8 encode_orientation(double yaw) {
  require(yaw > -kPi && yaw <= kPi, "yaw must lie in (-pi, pi]; normalize first");
  const auto bins = orientation_bins(yaw);
  Orientation8 out{};
  for (int i = 0; i < 2; ++i) {
    out[4 * i + 0] = 1.0 - bins[i];
    out[4 * i + 1] = bins[i];
    out[4 * i + 2] = std::sin(yaw - kBinCenter[i]);
    out[4 * i + 3] = std::cos(yaw - kBinCenter[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoders

namespace detail {

inline void check_annotation(const ObjectAnnotation& ann, std::size_t index, const EncoderConfig& cfg) {
  const std::string where = "annotation " + std::to_string(index) + ": ";
  require(ann.category >= 0 && ann.category < cfg.num_classes, where + "invalid category");
  require(ann.bbox.valid(), where + "box corners out of order");
  require(ann.bbox.x1 >= 0 && ann.bbox.y1 >= 0 && ann.bbox.x2 <= cfg.padded_width() &&
              ann.bbox.y2 <= cfg.padded_height(),
          where + "box outside the image grid");
  if (ann.depth) require(*ann.depth > 0, where + "depth must be positive");
  if (ann.dims3d) {
    for (double d : *ann.dims3d) require(d > 0, where + "3D dimensions must be positive");
  }
}

inline double object_sigma(const Box& box, const EncoderConfig& cfg) {
  const double w = box.width() / cfg.stride;
  const double h = box.height() / cfg.stride;
  return (w > 0 && h > 0) ? gaussian_sigma(w, h, cfg.min_overlap) : kMinGaussianSigma;
}

}  // namespace detail

/// Center heatmap, size, offset and mask targets, plus per-object 3D fields
/// when the annotations carry them.
inline TargetSet encode_detection(std::span<const ObjectAnnotation> annotations, const EncoderConfig& cfg) {
  cfg.validate();
  const int gw = cfg.grid_width();
  const int gh = cfg.grid_height();
  const double stride = cfg.stride;
  TargetSet ts{cfg, Grid(cfg.num_classes, gh, gw), Grid(2, gh, gw), Grid(2, gh, gw), Grid(1, gh, gw), {}, {}, 0, {}};
  std::map<std::tuple<int, int, int>, std::vector<std::size_t>> occupancy;

  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& ann = annotations[i];
    detail::check_annotation(ann, i, cfg);

    ObjectRecord rec;
    rec.category = ann.category;
    const double fx = ann.bbox.center_x() / stride;
    const double fy = ann.bbox.center_y() / stride;
    int cx = static_cast<int>(std::floor(fx));
    int cy = static_cast<int>(std::floor(fy));
    if (cx >= gw || cy >= gh) {
      rec.clamped = true;
      ++ts.clamped;
      cx = std::min(cx, gw - 1);
      cy = std::min(cy, gh - 1);
    }
    rec.cell_x = cx;
    rec.cell_y = cy;
    rec.offset_x = fx - cx;
    rec.offset_y = fy - cy;
    const double unit = cfg.size_units == SizeUnits::kPixels ? 1.0 : stride;
    rec.size_w = ann.bbox.width() / unit;
    rec.size_h = ann.bbox.height() / unit;
    rec.sigma = detail::object_sigma(ann.bbox, cfg);

    render_gaussian(ts.heatmap, Point2{double(cx), double(cy)}, ann.category, rec.sigma);
    ts.size(0, cy, cx) = rec.size_w;
    ts.size(1, cy, cx) = rec.size_h;
    ts.offset(0, cy, cx) = rec.offset_x;
    ts.offset(1, cy, cx) = rec.offset_y;
    ts.center_mask(0, cy, cx) = 1;

    rec.depth = ann.depth;
    rec.dims3d = ann.dims3d;
    if (ann.yaw) {
      rec.yaw = ann.yaw;
      rec.orientation = encode_orientation(*ann.yaw);
    }
    occupancy[{ann.category, cy, cx}].push_back(i);
    ts.objects.push_back(std::move(rec));
  }

  for (const auto& [key, members] : occupancy) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        ts.collisions.push_back({members[a], members[b], std::get<0>(key), std::get<2>(key), std::get<1>(key)});
      }
    }
  }
  std::sort(ts.collisions.begin(), ts.collisions.end(), [](const CenterCollision& a, const CenterCollision& b) {
    return std::tie(a.first, a.second) < std::tie(b.first, b.second);
  });
  return ts;
}

/// Joint targets: per-object joint offsets relative to the center cell with a
/// visibility mask, a joint-type heatmap and a local offset at each visible
/// joint's cell. Joints outside the padded image are treated as invisible.
/// Objects without keypoints get an all-zero mask.
inline PoseTargets encode_pose(std::span<const ObjectAnnotation> annotations, TargetSet& ts) {
  const EncoderConfig& cfg = ts.config;
  require(annotations.size() == ts.objects.size(), "encode_pose: annotations do not match target set");
  const int k = cfg.num_joints;
  require(k >= 1, "encode_pose: num_joints must be >= 1");
  const int gw = cfg.grid_width();
  const int gh = cfg.grid_height();
  const double stride = cfg.stride;
  PoseTargets pose{Grid(k, gh, gw), Grid(2, gh, gw), {}};

  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& ann = annotations[i];
    auto& rec = ts.objects[i];
    rec.joint_offsets.assign(2 * k, 0.0);
    rec.joint_mask.assign(k, 0.0);
    if (ann.keypoints.empty()) continue;
    require(static_cast<int>(ann.keypoints.size()) == k,
            "annotation " + std::to_string(i) + ": expected " + std::to_string(k) + " keypoints");
    for (int j = 0; j < k; ++j) {
      const auto& kp = ann.keypoints[j];
      const double fx = kp.x / stride;
      const double fy = kp.y / stride;
      const int jx = static_cast<int>(std::floor(fx));
      const int jy = static_cast<int>(std::floor(fy));
      if (!kp.visible || jx < 0 || jy < 0 || jx >= gw || jy >= gh) continue;
      rec.joint_offsets[2 * j] = fx - rec.cell_x;
      rec.joint_offsets[2 * j + 1] = fy - rec.cell_y;
      rec.joint_mask[j] = 1.0;
      render_gaussian(pose.joint_heatmap, Point2{double(jx), double(jy)}, j, rec.sigma);
      pose.joint_local_offset(0, jy, jx) = fx - jx;
      pose.joint_local_offset(1, jy, jx) = fy - jy;
      pose.joints.push_back({i, j, jx, jy, fx - jx, fy - jy});
    }
  }
  return pose;
}

/// Detection targets, plus pose targets when any annotation has keypoints.
inline TargetSet encode(std::span<const ObjectAnnotation> annotations, const EncoderConfig& cfg) {
  TargetSet ts = encode_detection(annotations, cfg);
  const bool has_pose = std::any_of(annotations.begin(), annotations.end(),
                                    [](const ObjectAnnotation& a) { return !a.keypoints.empty(); });
  if (has_pose) ts.pose = encode_pose(annotations, ts);
  return ts;
}

/// Dense maps holding each object's regression targets at its center cell,
/// laid out like the corresponding network heads (later objects win shared
/// cells). Depth is stored as the raw head value -ln(d), which decodes back
/// to d. Together with heatmap/offset/size these are a perfect prediction.
struct GroundTruthHeads {
  std::optional<Grid> depth;         // 1 channel
  std::optional<Grid> dims;          // 3 channels
  std::optional<Grid> orientation;   // 8 channels
  std::optional<Grid> joint_offset;  // 2 * num_joints channels
};

inline GroundTruthHeads render_head_maps(const TargetSet& ts) {
  const int gw = ts.config.grid_width();
  const int gh = ts.config.grid_height();
  GroundTruthHeads heads;
  for (const auto& r : ts.objects) {
    if (r.depth) {
      if (!heads.depth) heads.depth = Grid(1, gh, gw);
      (*heads.depth)(0, r.cell_y, r.cell_x) = -std::log(*r.depth);
    }
    if (r.dims3d) {
      if (!heads.dims) heads.dims = Grid(3, gh, gw);
      for (int c = 0; c < 3; ++c) (*heads.dims)(c, r.cell_y, r.cell_x) = (*r.dims3d)[c];
    }
    if (r.orientation) {
      if (!heads.orientation) heads.orientation = Grid(8, gh, gw);
      for (int c = 0; c < 8; ++c) (*heads.orientation)(c, r.cell_y, r.cell_x) = (*r.orientation)[c];
    }
    if (!r.joint_mask.empty()) {
      if (!heads.joint_offset) heads.joint_offset = Grid(2 * ts.config.num_joints, gh, gw);
      for (std::size_t c = 0; c < r.joint_offsets.size(); ++c) {
        (*heads.joint_offset)(static_cast<int>(c), r.cell_y, r.cell_x) = r.joint_offsets[c];
      }
    }
  }
  return heads;
}

}  // namespace cpt
