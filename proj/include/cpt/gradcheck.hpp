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
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <span>
#include <vector>

#include <boost/multiprecision/float128.hpp>

#include "cpt/grid.hpp"
#include "cpt/losses.hpp"
#include "cpt/random.hpp"

namespace cpt {

/// Finite differences run in binary128.
using Quad = boost::multiprecision::float128;

struct GradcheckOptions {
  double step = 1e-8;
  double tolerance = 1e-5;
};

struct GradcheckReport {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  double tolerance = 1e-5;

  bool passed() const { return max_rel_error < tolerance; }
};

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Central differences of `value_at` around `x`, compared coordinate-wise
/// against `analytic`. Coordinates for which `excluded(i)` holds are skipped.
template <typename ValueFn>
GradcheckReport gradcheck(ValueFn&& value_at, std::span<const double> x, std::span<const double> analytic,
                          const std::function<bool(std::size_t)>& excluded, const GradcheckOptions& opts = {}) {
  require(x.size() == analytic.size(), "gradcheck: gradient length mismatch");
  require(opts.step > 0, "gradcheck: step must be positive");
  GradcheckReport report;
  report.tolerance = opts.tolerance;
  std::vector<Quad> point(x.begin(), x.end());
  const Quad h(opts.step);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (excluded && excluded(i)) {
      ++report.excluded;
      continue;
    }
    auto at = [&](int k) {
      point[i] = Quad(x[i]) + k * h;
      return value_at(std::span<const Quad>(point));
    };
    const Quad d = at(1) - at(-1);
    point[i] = Quad(x[i]);
    const double numeric = static_cast<double>(d / (2 * h));
    const double err = relative_error(analytic[i], numeric);
    ++report.checked;
    if (err > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = err;
      report.worst_index = i;
      report.worst_analytic = analytic[i];
      report.worst_numeric = numeric;
    }
  }
  return report;
}

namespace detail {

inline DenseGrid<Quad> as_quad(const Grid& like, std::span<const Quad> values) {
  return DenseGrid<Quad>(like.channels(), like.height(), like.width(), std::vector<Quad>(values.begin(), values.end()));
}

}  // namespace detail

// Per-loss checks. Each excludes the coordinates whose +/-h stencil could
// straddle a non-differentiable point: the focal clamp boundaries and the L1
// kinks (|pred - target| < 10h). The softmax cross-entropy is smooth and
// needs no exclusion.

inline GradcheckReport gradcheck_focal(const Grid& pred, const Grid& target, const FocalParams& params = {},
                                       const GradcheckOptions& opts = {}) {
  const auto analytic = focal_loss(pred, target, params).grad;
  const auto target_q = target.cast<Quad>();
  const double band = 10 * opts.step;
  auto near_clamp = [&](std::size_t i) {
    const double p = pred.values()[i];
    return std::abs(p - params.eps) < band || std::abs(p - (1 - params.eps)) < band;
  };
  return gradcheck(
      [&](std::span<const Quad> v) { return focal_loss(detail::as_quad(pred, v), target_q, params).value; },
      pred.values(), analytic.values(), near_clamp, opts);
}

inline GradcheckReport gradcheck_masked_l1(const Grid& pred, std::span<const L1Site> sites,
                                           const GradcheckOptions& opts = {}) {
  const auto analytic = masked_l1(pred, sites).grad;
  std::vector<bool> kink(pred.size(), false);
  for (const auto& s : sites) {
    for (std::size_t c = 0; c < s.target.size(); ++c) {
      const auto idx = pred.index(s.channel_offset + static_cast<int>(c), s.y, s.x);
      if (std::abs(pred.values()[idx] - s.target[c]) < 10 * opts.step) kink[idx] = true;
    }
  }
  return gradcheck([&](std::span<const Quad> v) { return masked_l1(detail::as_quad(pred, v), sites).value; },
                   pred.values(), analytic.values(), [&](std::size_t i) { return bool(kink[i]); }, opts);
}

inline GradcheckReport gradcheck_depth(const Grid& pred, std::span<const DepthSite> sites,
                                       const GradcheckOptions& opts = {}) {
  const auto analytic = depth_loss(pred, sites).grad;
  std::vector<bool> kink(pred.size(), false);
  for (const auto& s : sites) {
    const double d = decode_depth(pred(0, s.y, s.x));
    if (std::abs(d - s.depth) < 10 * opts.step * std::max(1.0, d)) kink[pred.index(0, s.y, s.x)] = true;
  }
  return gradcheck([&](std::span<const Quad> v) { return depth_loss(detail::as_quad(pred, v), sites).value; },
                   pred.values(), analytic.values(), [&](std::size_t i) { return bool(kink[i]); }, opts);
}

inline GradcheckReport gradcheck_orientation(const Grid& pred, std::span<const OrientationSite> sites,
                                             const GradcheckOptions& opts = {}) {
  const auto analytic = orientation_loss(pred, sites).grad;
  std::vector<bool> kink(pred.size(), false);
  for (const auto& s : sites) {
    const auto target = encode_orientation(s.yaw);
    for (int bin = 0; bin < 2; ++bin) {
      if (target[4 * bin + 1] < 0.5) continue;
      for (int k = 2; k < 4; ++k) {
        const auto idx = pred.index(4 * bin + k, s.y, s.x);
        if (std::abs(pred.values()[idx] - target[4 * bin + k]) < 10 * opts.step) kink[idx] = true;
      }
    }
  }
  return gradcheck(
      [&](std::span<const Quad> v) { return orientation_loss(detail::as_quad(pred, v), sites).value; },
      pred.values(), analytic.values(), [&](std::size_t i) { return bool(kink[i]); }, opts);
}

// ---------------------------------------------------------------------------
// Randomized instances, one per loss, drawn from a seed.

namespace detail {

inline std::vector<std::pair<int, int>> distinct_cells(CounterRng& rng, int w, int h, int n) {
  std::set<std::pair<int, int>> seen;
  std::vector<std::pair<int, int>> out;
  while (static_cast<int>(out.size()) < n) {
    const std::pair<int, int> c{static_cast<int>(rng.below(w)), static_cast<int>(rng.below(h))};
    if (seen.insert(c).second) out.push_back(c);
  }
  return out;
}

inline Grid random_grid(CounterRng& rng, int c, int h, int w, double lo, double hi) {
  Grid g(c, h, w);
  for (auto& v : g.values()) v = rng.uniform(lo, hi);
  return g;
}

}  // namespace detail

/// Max relative error per loss ("focal", "offset", "size", "depth", "dims",
/// "orientation") on random 64-bit instances generated from `seed`.
inline std::map<std::string, GradcheckReport> gradcheck_suite(std::uint64_t seed, const GradcheckOptions& opts = {},
                                                              const FocalParams& focal = {}) {
  CounterRng rng(seed);
  std::map<std::string, GradcheckReport> out;

  {
    // Gaussian-splat target (exact ones, tails, zeros) against random scores
    Grid target(2, 8, 8);
    for (int i = 0; i < 3; ++i) {
      render_gaussian(target, Point2{double(rng.below(8)), double(rng.below(8))}, static_cast<int>(rng.below(2)),
                      rng.uniform(0.5, 2.0));
    }
    const Grid pred = detail::random_grid(rng, 2, 8, 8, focal.eps, 1 - focal.eps);
    out["focal"] = gradcheck_focal(pred, target, focal, opts);
  }
  auto l1_case = [&](int channels, double lo, double hi, double noise) {
    const int w = 6, h = 5;
    std::vector<L1Site> sites;
    for (auto [x, y] : detail::distinct_cells(rng, w, h, 6)) {
      L1Site s{x, y, {}, {}, 0};
      for (int c = 0; c < channels; ++c) s.target.push_back(rng.uniform(lo, hi));
      sites.push_back(std::move(s));
    }
    Grid pred = detail::random_grid(rng, channels, h, w, lo, hi);
    for (const auto& s : sites) {
      for (int c = 0; c < channels; ++c) pred(c, s.y, s.x) = s.target[c] + rng.uniform(-noise, noise);
    }
    return gradcheck_masked_l1(pred, sites, opts);
  };
  out["offset"] = l1_case(2, 0.0, 1.0, 0.5);
  out["size"] = l1_case(2, 1.0, 40.0, 5.0);
  out["dims"] = l1_case(3, 1.0, 6.0, 1.0);
  {
    std::vector<DepthSite> sites;
    for (auto [x, y] : detail::distinct_cells(rng, 6, 5, 6)) sites.push_back({x, y, rng.uniform(0.5, 80.0)});
    const Grid pred = detail::random_grid(rng, 1, 5, 6, -4.5, 2.0);
    out["depth"] = gradcheck_depth(pred, sites, opts);
  }
  {
    std::vector<OrientationSite> sites;
    for (auto [x, y] : detail::distinct_cells(rng, 6, 5, 6)) {
      sites.push_back({x, y, normalize_angle(rng.uniform(-kPi, kPi))});
    }
    Grid pred = detail::random_grid(rng, 8, 5, 6, -3.0, 3.0);
    for (const auto& s : sites) {
      for (int bin = 0; bin < 2; ++bin) {
        for (int k = 2; k < 4; ++k) pred(4 * bin + k, s.y, s.x) = rng.uniform(-1.0, 1.0);
      }
    }
    out["orientation"] = gradcheck_orientation(pred, sites, opts);
  }
  return out;
}

}  // namespace cpt
