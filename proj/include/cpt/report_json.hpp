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

#include <string>

#include <nlohmann/json.hpp>

#include "cpt/analysis.hpp"
#include "cpt/detection.hpp"
#include "cpt/error.hpp"
#include "cpt/eval.hpp"
#include "cpt/gradcheck.hpp"
#include "cpt/losses.hpp"
#include "cpt/targets.hpp"

namespace cpt {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Detections as JSON lines

inline json detection_to_json(const Detection& d, const std::string& units) {
  json j = {{"image_id", d.image_id},
            {"category", d.category},
            {"score", d.score},
            {"bbox", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
            {"center", {d.center.x, d.center.y}},
            {"peak", {d.peak_x, d.peak_y}},
            {"units", units}};
  if (d.depth) j["depth"] = *d.depth;
  if (d.dims3d) j["dims"] = *d.dims3d;
  if (d.yaw) j["yaw"] = *d.yaw;
  if (!d.joints.empty()) {
    json joints = json::array();
    for (const auto& k : d.joints) {
      joints.push_back({{"x", k.x}, {"y", k.y}, {"source", k.source == JointSource::kSnapped ? "snapped" : "regressed"}});
    }
    j["joints"] = joints;
  }
  return j;
}

struct UnitsTagged {
  Detection detection;
  std::string units;
};

inline UnitsTagged detection_from_json(const json& j) {
  try {
    UnitsTagged out;
    auto& d = out.detection;
    d.image_id = j.value("image_id", std::int64_t{0});
    d.category = j.at("category").get<int>();
    d.score = j.at("score").get<double>();
    const auto b = j.at("bbox").get<std::vector<double>>();
    require(b.size() == 4, "detection bbox must be [x1, y1, x2, y2]");
    d.box = {b[0], b[1], b[2], b[3]};
    if (j.contains("center")) {
      const auto c = j["center"].get<std::vector<double>>();
      require(c.size() == 2, "detection center must be [x, y]");
      d.center = {c[0], c[1]};
    } else {
      d.center = {d.box.center_x(), d.box.center_y()};
    }
    if (j.contains("peak")) {
      const auto p = j["peak"].get<std::vector<int>>();
      require(p.size() == 2, "detection peak must be [x, y]");
      d.peak_x = p[0];
      d.peak_y = p[1];
    }
    if (j.contains("depth")) d.depth = j["depth"].get<double>();
    if (j.contains("dims")) d.dims3d = j["dims"].get<std::array<double, 3>>();
    if (j.contains("yaw")) d.yaw = j["yaw"].get<double>();
    if (j.contains("joints")) {
      for (const auto& k : j["joints"]) {
        d.joints.push_back({k.at("x").get<double>(), k.at("y").get<double>(),
                            k.value("source", std::string("regressed")) == "snapped" ? JointSource::kSnapped
                                                                                    : JointSource::kRegressed});
      }
    }
    out.units = j.value("units", std::string("cells"));
    require(out.units == "cells" || out.units == "pixels", "detection units must be 'cells' or 'pixels'");
    return out;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed detection: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

inline json pairs_to_json(const std::vector<CollisionPair>& pairs) {
  json out = json::array();
  for (const auto& p : pairs) {
    out.push_back({{"image_id", p.image_id}, {"category", p.category}, {"ids", {p.first, p.second}}});
  }
  return out;
}

inline json buckets_to_json(const BucketCounts& b) {
  return {{"small", b.small}, {"medium", b.medium}, {"large", b.large}};
}

inline json to_json(const CollisionReport& r, bool with_center, bool list_pairs = true) {
  json j = {{"objects", r.objects}, {"buckets", buckets_to_json(r.buckets)}, {"excluded", r.excluded}};
  if (with_center) {
    j["stride"] = r.stride;
    j["n_center"] = r.n_center;
    if (list_pairs) j["center_pairs"] = pairs_to_json(r.center_pairs);
  }
  if (!r.iou.empty()) {
    json levels = json::array();
    for (const auto& level : r.iou) {
      json l = {{"threshold", level.threshold}, {"count", level.count}};
      if (list_pairs) l["pairs"] = pairs_to_json(level.pairs);
      levels.push_back(std::move(l));
    }
    j["n_iou"] = levels;
  }
  return j;
}

inline json to_json(const AnchorReport& r) {
  return {{"n_anchor", r.n_anchor},
          {"objects", r.objects},
          {"iou_thresh", r.iou_thresh},
          {"forced", buckets_to_json(r.forced)},
          {"totals", buckets_to_json(r.totals)},
          {"fractions",
           {{"small", AnchorReport::fraction(r.forced.small, r.totals.small)},
            {"medium", AnchorReport::fraction(r.forced.medium, r.totals.medium)},
            {"large", AnchorReport::fraction(r.forced.large, r.totals.large)},
            {"all", AnchorReport::fraction(r.n_anchor, r.objects)}}}};
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const EvalReport& r) {
  json ap = json::object();
  for (const auto& [c, v] : r.ap) ap[std::to_string(c)] = optional_json(v);
  return {{"ap", ap},
          {"map", optional_json(r.mean_ap)},
          {"ground_truth", r.ground_truth},
          {"detections", r.detections},
          {"true_positives", r.true_positives},
          {"false_positives", r.false_positives},
          {"missed", r.missed}};
}

inline json to_json(const GradcheckReport& r) {
  return {{"max_rel_error", r.max_rel_error},
          {"checked", r.checked},
          {"excluded", r.excluded},
          {"tolerance", r.tolerance},
          {"passed", r.passed()}};
}

inline json to_json(const LossReport<double>& r) {
  json terms = json::object();
  for (const auto& [k, v] : r.terms) terms[k] = v;
  return {{"terms", terms}, {"total", r.total}, {"positives", r.positives}, {"objects", r.objects}};
}

inline json to_json(const ObjectRecord& r) {
  json j = {{"category", r.category},
            {"cell", {r.cell_x, r.cell_y}},
            {"offset", {r.offset_x, r.offset_y}},
            {"size", {r.size_w, r.size_h}},
            {"sigma", r.sigma},
            {"clamped", r.clamped}};
  if (r.depth) j["depth"] = *r.depth;
  if (r.dims3d) j["dims"] = *r.dims3d;
  if (r.yaw) j["yaw"] = *r.yaw;
  if (r.orientation) j["orientation"] = *r.orientation;
  if (!r.joint_mask.empty()) {
    j["joint_offsets"] = r.joint_offsets;
    j["joint_mask"] = r.joint_mask;
  }
  return j;
}

/// Inverse of to_json(ObjectRecord), used to rebuild targets from a manifest.
inline ObjectRecord record_from_json(const json& j) {
  try {
    ObjectRecord r;
    r.category = j.at("category").get<int>();
    r.cell_x = j.at("cell").at(0).get<int>();
    r.cell_y = j.at("cell").at(1).get<int>();
    r.offset_x = j.at("offset").at(0).get<double>();
    r.offset_y = j.at("offset").at(1).get<double>();
    r.size_w = j.at("size").at(0).get<double>();
    r.size_h = j.at("size").at(1).get<double>();
    r.sigma = j.value("sigma", 0.0);
    r.clamped = j.value("clamped", false);
    if (j.contains("depth")) r.depth = j["depth"].get<double>();
    if (j.contains("dims")) r.dims3d = j["dims"].get<std::array<double, 3>>();
    if (j.contains("yaw")) r.yaw = j["yaw"].get<double>();
    if (j.contains("orientation")) r.orientation = j["orientation"].get<Orientation8>();
    if (j.contains("joint_mask")) {
      r.joint_offsets = j.at("joint_offsets").get<std::vector<double>>();
      r.joint_mask = j["joint_mask"].get<std::vector<double>>();
    }
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed object record: ") + e.what());
  }
}

}  // namespace cpt
