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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cpt/decode.hpp"
#include "cpt/error.hpp"
#include "cpt/grid.hpp"
#include "cpt/targets.hpp"

namespace cpt {

struct FocalParams {
  double alpha = 2;
  double beta = 4;
  double eps = 1e-4;  // predictions are clamped to [eps, 1 - eps]

  void validate() const {
    require(alpha > 0, "focal alpha must be > 0");
    require(beta >= 0, "focal beta must be >= 0");
    require(eps > 0 && eps < 0.5, "focal eps must be in (0, 0.5)");
  }
};

struct LossWeights {
  double size = 0.1;
  double offset = 1;
  double depth = 1;
  double dims = 1;
  double orientation = 1;
  double joint_offset = 1;
  double joint_heatmap = 1;
  double joint_local_offset = 1;
};

/// A scalar loss and its gradient with respect to the prediction grid.
template <typename T>
struct LossValue {
  T value;
  DenseGrid<T> grad;
};

namespace detail {

template <typename T>
T sign(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

// x^e, by repeated multiplication when e is a small non-negative integer
template <typename T>
T power(T x, double e) {
  using std::pow;
  if (e >= 0 && e <= 16 && e == std::floor(e)) {
    T r(1);
    for (int i = 0; i < static_cast<int>(e); ++i) r *= x;
    return r;
  }
  return pow(x, T(e));
}

}  // namespace detail

/// Penalty-reduced pixel-wise focal loss on a heatmap, normalized by the
/// number of cells where the target is exactly 1 (taken as 1 when there are
/// none). Predictions outside [eps, 1 - eps] are clamped and get a zero
/// gradient.
template <typename T>
LossValue<T> focal_loss(const DenseGrid<T>& pred, const DenseGrid<T>& target, const FocalParams& params = {}) {
  using std::log;
  params.validate();
  require(pred.same_shape(target), "focal_loss: prediction and target shapes differ");
  const double alpha = params.alpha;
  const double beta = params.beta;
  const T lo(params.eps);
  const T hi = T(1) - lo;

  std::size_t positives = 0;
  for (const T& y : target.values()) positives += (y == T(1)) ? 1 : 0;
  const T n = static_cast<T>(positives == 0 ? 1 : positives);

  LossValue<T> out{T(0), DenseGrid<T>(pred.channels(), pred.height(), pred.width())};
  auto p = pred.values();
  auto y = target.values();
  auto g = out.grad.values();
  T sum(0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool flat = p[i] < lo || p[i] > hi;
    const T q = p[i] < lo ? lo : (p[i] > hi ? hi : p[i]);
    T term;
    T dterm;
    if (y[i] == T(1)) {
      const T focus = detail::power(T(1) - q, alpha);
      term = focus * log(q);
      dterm = -T(alpha) * detail::power(T(1) - q, alpha - 1) * log(q) + focus / q;
    } else {
      const T penalty = detail::power(T(1) - y[i], beta);
      const T focus = detail::power(q, alpha);
      const T log_neg = log(T(1) - q);
      term = penalty * focus * log_neg;
      dterm = penalty * (T(alpha) * detail::power(q, alpha - 1) * log_neg - focus / (T(1) - q));
    }
    sum += term;
    g[i] = flat ? T(0) : -dterm / n;
  }
  out.value = -sum / n;
  return out;
}

/// One supervised cell for an L1 head: target values for channels
/// [channel_offset, channel_offset + target.size()), optionally weighted.
struct L1Site {
  int x = 0;
  int y = 0;
  std::vector<double> target;
  std::vector<double> weight;  // empty means all ones
  int channel_offset = 0;
};

/// (1/N) * sum over sites of weighted |pred - target|, N = number of sites.
/// The gradient uses sign(0) = 0. No sites gives zero loss and gradient.
template <typename T>
LossValue<T> masked_l1(const DenseGrid<T>& pred, std::span<const L1Site> sites) {
  using std::abs;
  LossValue<T> out{T(0), DenseGrid<T>(pred.channels(), pred.height(), pred.width())};
  if (sites.empty()) return out;
  const T n = static_cast<T>(sites.size());
  T sum(0);
  for (const auto& s : sites) {
    require(pred.contains(s.x, s.y), "masked_l1: site outside grid");
    require(s.channel_offset >= 0 && s.channel_offset + static_cast<int>(s.target.size()) <= pred.channels(),
            "masked_l1: site channels exceed prediction channels");
    require(s.weight.empty() || s.weight.size() == s.target.size(), "masked_l1: weight length mismatch");
    for (std::size_t c = 0; c < s.target.size(); ++c) {
      const T w = s.weight.empty() ? T(1) : T(s.weight[c]);
      if (w == T(0)) continue;
      const int ch = s.channel_offset + static_cast<int>(c);
      const T diff = pred(ch, s.y, s.x) - T(s.target[c]);
      sum += w * abs(diff);
      out.grad(ch, s.y, s.x) += w * detail::sign(diff) / n;
    }
  }
  out.value = sum / n;
  return out;
}

struct DepthSite {
  int x = 0;
  int y = 0;
  double depth = 0;  // meters
};

/// (1/N) * sum |1/sigmoid(raw) - 1 - depth| over object cells, gradient with
/// respect to the raw (pre-transform) head output.
template <typename T>
LossValue<T> depth_loss(const DenseGrid<T>& pred, std::span<const DepthSite> sites) {
  using std::abs;
  require(pred.channels() == 1, "depth_loss: depth head needs 1 channel");
  LossValue<T> out{T(0), DenseGrid<T>(1, pred.height(), pred.width())};
  if (sites.empty()) return out;
  const T n = static_cast<T>(sites.size());
  T sum(0);
  for (const auto& s : sites) {
    require(pred.contains(s.x, s.y), "depth_loss: site outside grid");
    const T d = decode_depth(pred(0, s.y, s.x));
    const T diff = d - T(s.depth);
    sum += abs(diff);
    out.grad(0, s.y, s.x) += detail::sign(diff) * (-d) / n;  // d/draw exp(-raw) = -exp(-raw)
  }
  out.value = sum / n;
  return out;
}

struct OrientationSite {
  int x = 0;
  int y = 0;
  double yaw = 0;
};

/// Per object and bin: 2-way softmax cross-entropy on the bin logits plus an
/// L1 on (sin, cos) gated by the bin label; averaged over objects.
template <typename T>
LossValue<T> orientation_loss(const DenseGrid<T>& pred, std::span<const OrientationSite> sites) {
  using std::abs;
  using std::exp;
  using std::log;
  require(pred.channels() == 8, "orientation_loss: orientation head needs 8 channels");
  LossValue<T> out{T(0), DenseGrid<T>(8, pred.height(), pred.width())};
  if (sites.empty()) return out;
  const T n = static_cast<T>(sites.size());
  T sum(0);
  for (const auto& s : sites) {
    require(pred.contains(s.x, s.y), "orientation_loss: site outside grid");
    const Orientation8 target = encode_orientation(s.yaw);
    for (int bin = 0; bin < 2; ++bin) {
      const int base = 4 * bin;
      const int label = target[base + 1] > 0.5 ? 1 : 0;
      const T l0 = pred(base, s.y, s.x);
      const T l1 = pred(base + 1, s.y, s.x);
      const T m = l0 > l1 ? l0 : l1;
      const T e0 = exp(l0 - m);
      const T e1 = exp(l1 - m);
      const T lse = m + log(e0 + e1);
      sum += lse - (label == 1 ? l1 : l0);
      out.grad(base, s.y, s.x) += (e0 / (e0 + e1) - T(label == 0 ? 1 : 0)) / n;
      out.grad(base + 1, s.y, s.x) += (e1 / (e0 + e1) - T(label == 1 ? 1 : 0)) / n;
      if (label == 1) {
        for (int k = 2; k < 4; ++k) {
          const T diff = pred(base + k, s.y, s.x) - T(target[base + k]);
          sum += abs(diff);
          out.grad(base + k, s.y, s.x) += detail::sign(diff) / n;
        }
      }
    }
  }
  out.value = sum / n;
  return out;
}

// ---------------------------------------------------------------------------
// Supervision sites from encoded targets

inline std::vector<L1Site> offset_sites(const TargetSet& ts) {
  std::vector<L1Site> sites;
  for (const auto& r : ts.objects) sites.push_back({r.cell_x, r.cell_y, {r.offset_x, r.offset_y}, {}, 0});
  return sites;
}

inline std::vector<L1Site> size_sites(const TargetSet& ts) {
  std::vector<L1Site> sites;
  for (const auto& r : ts.objects) sites.push_back({r.cell_x, r.cell_y, {r.size_w, r.size_h}, {}, 0});
  return sites;
}

inline std::vector<L1Site> dims_sites(const TargetSet& ts) {
  std::vector<L1Site> sites;
  for (const auto& r : ts.objects) {
    if (r.dims3d) sites.push_back({r.cell_x, r.cell_y, {(*r.dims3d)[0], (*r.dims3d)[1], (*r.dims3d)[2]}, {}, 0});
  }
  return sites;
}

inline std::vector<DepthSite> depth_sites(const TargetSet& ts) {
  std::vector<DepthSite> sites;
  for (const auto& r : ts.objects) {
    if (r.depth) sites.push_back({r.cell_x, r.cell_y, *r.depth});
  }
  return sites;
}

inline std::vector<OrientationSite> orientation_sites(const TargetSet& ts) {
  std::vector<OrientationSite> sites;
  for (const auto& r : ts.objects) {
    if (r.yaw) sites.push_back({r.cell_x, r.cell_y, *r.yaw});
  }
  return sites;
}

/// One site per object with keypoints; the visibility mask weights both
/// coordinates of each joint.
inline std::vector<L1Site> joint_offset_sites(const TargetSet& ts) {
  std::vector<L1Site> sites;
  for (const auto& r : ts.objects) {
    if (r.joint_mask.empty()) continue;
    L1Site s{r.cell_x, r.cell_y, r.joint_offsets, {}, 0};
    for (double m : r.joint_mask) {
      s.weight.push_back(m);
      s.weight.push_back(m);
    }
    sites.push_back(std::move(s));
  }
  return sites;
}

inline std::vector<L1Site> joint_local_offset_sites(const TargetSet& ts) {
  std::vector<L1Site> sites;
  if (!ts.pose) return sites;
  for (const auto& j : ts.pose->joints) sites.push_back({j.cell_x, j.cell_y, {j.offset_x, j.offset_y}, {}, 0});
  return sites;
}

// ---------------------------------------------------------------------------
// Combined objective

/// Network outputs for one image. Null heads are skipped; the heatmap,
/// offset and size heads are mandatory.
template <typename T>
struct HeadOutputs {
  const DenseGrid<T>* heatmap = nullptr;
  const DenseGrid<T>* offset = nullptr;
  const DenseGrid<T>* size = nullptr;
  const DenseGrid<T>* depth = nullptr;
  const DenseGrid<T>* dims = nullptr;
  const DenseGrid<T>* orientation = nullptr;
  const DenseGrid<T>* joint_offset = nullptr;
  const DenseGrid<T>* joint_heatmap = nullptr;
  const DenseGrid<T>* joint_local_offset = nullptr;
};

template <typename T>
struct LossReport {
  std::map<std::string, T> terms;  // unweighted component losses by head name
  T total = T(0);
  std::size_t positives = 0;  // heatmap normalizer before the N = 0 fallback
  std::size_t objects = 0;
  std::map<std::string, DenseGrid<T>> gradients;  // d total / d head
};

inline double head_weight(const std::string& head, const LossWeights& w) {
  if (head == "heatmap") return 1.0;
  if (head == "size") return w.size;
  if (head == "offset") return w.offset;
  if (head == "depth") return w.depth;
  if (head == "dims") return w.dims;
  if (head == "orientation") return w.orientation;
  if (head == "joint_offset") return w.joint_offset;
  if (head == "joint_heatmap") return w.joint_heatmap;
  if (head == "joint_local_offset") return w.joint_local_offset;
  throw InputError("unknown loss head: " + head);
}

/// heatmap + w.size * size + w.offset * offset + (3D and pose terms when present).
template <typename T>
T weighted_total(const std::map<std::string, T>& terms, const LossWeights& weights) {
  T total(0);
  for (const auto& [head, value] : terms) total += T(head_weight(head, weights)) * value;
  return total;
}

template <typename T>
LossReport<T> total_loss(const HeadOutputs<T>& heads, const TargetSet& ts, const LossWeights& weights = {},
                         const FocalParams& focal = {}) {
  require(heads.heatmap && heads.offset && heads.size, "total_loss: heatmap, offset and size heads are required");
  require(heads.heatmap->same_shape(ts.heatmap), "total_loss: heatmap head shape mismatch");
  require(heads.offset->same_shape(ts.offset), "total_loss: offset head shape mismatch");
  require(heads.size->same_shape(ts.size), "total_loss: size head shape mismatch");
  auto check_spatial = [&](const DenseGrid<T>* g, const char* name) {
    if (g) require(g->same_spatial(*heads.heatmap), std::string("total_loss: ") + name + " head spatial mismatch");
  };
  check_spatial(heads.depth, "depth");
  check_spatial(heads.dims, "dims");
  check_spatial(heads.orientation, "orientation");
  check_spatial(heads.joint_offset, "joint_offset");
  check_spatial(heads.joint_heatmap, "joint_heatmap");
  check_spatial(heads.joint_local_offset, "joint_local_offset");

  LossReport<T> report;
  report.objects = ts.objects.size();
  for (double y : ts.heatmap.values()) report.positives += (y == 1.0) ? 1 : 0;

  auto add = [&](const std::string& head, LossValue<T> lv) {
    const T w(head_weight(head, weights));
    for (auto& g : lv.grad.values()) g *= w;
    report.terms[head] = lv.value;
    report.gradients.emplace(head, std::move(lv.grad));
  };

  add("heatmap", focal_loss(*heads.heatmap, ts.heatmap.cast<T>(), focal));
  const auto off = offset_sites(ts);
  add("offset", masked_l1(*heads.offset, std::span<const L1Site>(off)));
  const auto sz = size_sites(ts);
  add("size", masked_l1(*heads.size, std::span<const L1Site>(sz)));
  if (heads.depth) {
    const auto sites = depth_sites(ts);
    add("depth", depth_loss(*heads.depth, std::span<const DepthSite>(sites)));
  }
  if (heads.dims) {
    require(heads.dims->channels() == 3, "total_loss: dims head needs 3 channels");
    const auto sites = dims_sites(ts);
    add("dims", masked_l1(*heads.dims, std::span<const L1Site>(sites)));
  }
  if (heads.orientation) {
    const auto sites = orientation_sites(ts);
    add("orientation", orientation_loss(*heads.orientation, std::span<const OrientationSite>(sites)));
  }
  if (heads.joint_offset || heads.joint_heatmap || heads.joint_local_offset) {
    require(ts.pose.has_value(), "total_loss: pose heads given but targets have no pose");
  }
  if (heads.joint_offset) {
    require(heads.joint_offset->channels() == 2 * ts.config.num_joints, "total_loss: joint offset head channels");
    const auto sites = joint_offset_sites(ts);
    add("joint_offset", masked_l1(*heads.joint_offset, std::span<const L1Site>(sites)));
  }
  if (heads.joint_heatmap) {
    require(heads.joint_heatmap->same_shape(ts.pose->joint_heatmap), "total_loss: joint heatmap shape mismatch");
    add("joint_heatmap", focal_loss(*heads.joint_heatmap, ts.pose->joint_heatmap.cast<T>(), focal));
  }
  if (heads.joint_local_offset) {
    require(heads.joint_local_offset->channels() == 2, "total_loss: joint local offset head needs 2 channels");
    const auto sites = joint_local_offset_sites(ts);
    add("joint_local_offset", masked_l1(*heads.joint_local_offset, std::span<const L1Site>(sites)));
  }
  report.total = weighted_total(report.terms, weights);
  return report;
}

}  // namespace cpt
