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
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "cpt/detection.hpp"
#include "cpt/error.hpp"
#include "cpt/geometry.hpp"

namespace cpt {

struct GroundTruth {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  int category = 0;
  Box box;
};

struct DetectionMatch {
  std::size_t detection = 0;  // index into the input detections
  double score = 0;
  bool true_positive = false;
  std::optional<std::size_t> ground_truth;  // index into the input ground truth
  double iou = 0;
};

struct MatchResult {
  std::vector<DetectionMatch> detections;  // score descending, input order on ties
  std::vector<bool> gt_matched;

  std::size_t true_positives() const {
    return std::count_if(detections.begin(), detections.end(), [](const DetectionMatch& m) { return m.true_positive; });
  }
  std::size_t missed() const { return std::count(gt_matched.begin(), gt_matched.end(), false); }
};

/// Greedy matching: detections in descending score order each take the
/// unmatched ground truth of the same image and class with the highest IoU,
/// provided it reaches iou_thresh.
inline MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                    double iou_thresh = 0.5) {
  MatchResult result;
  result.gt_matched.assign(gts.size(), false);
  std::map<std::pair<std::int64_t, int>, std::vector<std::size_t>> pool;
  for (std::size_t g = 0; g < gts.size(); ++g) pool[{gts[g].image_id, gts[g].category}].push_back(g);

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  for (std::size_t d : order) {
    DetectionMatch m{d, dets[d].score, false, std::nullopt, 0};
    const auto it = pool.find({dets[d].image_id, dets[d].category});
    if (it != pool.end()) {
      double best = -1;
      std::optional<std::size_t> pick;
      for (std::size_t g : it->second) {
        if (result.gt_matched[g]) continue;
        const double v = iou(dets[d].box, gts[g].box);
        if (v >= iou_thresh && v > best) {
          best = v;
          pick = g;
        }
      }
      if (pick) {
        result.gt_matched[*pick] = true;
        m = {d, dets[d].score, true, pick, best};
      }
    }
    result.detections.push_back(m);
  }
  return result;
}

/// Interpolated AP over `recall_points` evenly spaced recall levels in
/// [0, 1] (11 gives 0.0, 0.1, ..., 1.0). Precision at level r is the best
/// precision reached at any recall >= r, or 0. Undefined without ground
/// truth.
inline std::optional<double> average_precision(std::span<const DetectionMatch> ranked, std::size_t num_gt,
                                               int recall_points = 11) {
  require(recall_points >= 2, "average_precision: need at least 2 recall points");
  if (num_gt == 0) return std::nullopt;
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    tp += ranked[k].true_positive ? 1 : 0;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }
  // running max from the tail gives the interpolated envelope
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double sum = 0;
  std::size_t k = 0;
  for (int i = 0; i < recall_points; ++i) {
    const double level = static_cast<double>(i) / (recall_points - 1);
    while (k < recall.size() && recall[k] < level) ++k;
    sum += k < recall.size() ? precision[k] : 0.0;
  }
  return sum / recall_points;
}

struct EvalReport {
  std::map<int, std::optional<double>> ap;  // per category
  std::optional<double> mean_ap;
  std::size_t ground_truth = 0;
  std::size_t detections = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t missed = 0;
};

/// Per-class AP and their mean over classes that have ground truth.
inline EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruth> gts, int num_classes,
                           double iou_thresh = 0.5, int recall_points = 11) {
  EvalReport report;
  report.ground_truth = gts.size();
  report.detections = dets.size();
  double sum = 0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<Detection> class_dets;
    std::vector<GroundTruth> class_gts;
    for (const auto& d : dets) {
      if (d.category == c) class_dets.push_back(d);
    }
    for (const auto& g : gts) {
      if (g.category == c) class_gts.push_back(g);
    }
    const auto matches = match_detections(class_dets, class_gts, iou_thresh);
    report.true_positives += matches.true_positives();
    report.false_positives += matches.detections.size() - matches.true_positives();
    report.missed += matches.missed();
    const auto ap = average_precision(matches.detections, class_gts.size(), recall_points);
    report.ap[c] = ap;
    if (ap) {
      sum += *ap;
      ++counted;
    }
  }
  if (counted > 0) report.mean_ap = sum / counted;
  return report;
}

}  // namespace cpt
