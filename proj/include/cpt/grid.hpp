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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpt/error.hpp"

namespace cpt {

/// Row-major multi-channel 2D grid, channel-major outermost: element (c, y, x)
/// lives at (c * height + y) * width + x. Holds heatmaps, regression maps and
/// their gradients alike.
template <typename T>
class DenseGrid {
 public:
  using value_type = T;

  DenseGrid() : DenseGrid(1, 1, 1) {}

  DenseGrid(int channels, int height, int width, T fill = T(0))
      : channels_(channels), height_(height), width_(width) {
    check_dims();
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  DenseGrid(int channels, int height, int width, std::vector<T> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    check_dims();
    require(data_.size() == static_cast<std::size_t>(channels) * height * width,
            "grid data length does not match dims");
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
  const T& operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }

  T& at(int c, int y, int x) {
    check_index(c, y, x);
    return data_[index(c, y, x)];
  }
  const T& at(int c, int y, int x) const {
    check_index(c, y, x);
    return data_[index(c, y, x)];
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  std::span<T> channel(int c) { return std::span<T>(data_).subspan(c * plane_size(), plane_size()); }
  std::span<const T> channel(int c) const {
    return std::span<const T>(data_).subspan(c * plane_size(), plane_size());
  }

  bool same_spatial(const DenseGrid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  template <typename U>
  bool same_shape(const DenseGrid<U>& other) const {
    return channels_ == other.channels() && height_ == other.height() && width_ == other.width();
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  DenseGrid<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](const T& v) { return static_cast<U>(v); });
    return DenseGrid<U>(channels_, height_, width_, std::move(out));
  }

  friend bool operator==(const DenseGrid& a, const DenseGrid& b) {
    return a.channels_ == b.channels_ && a.height_ == b.height_ && a.width_ == b.width_ &&
           a.data_ == b.data_;
  }

 private:
  void check_dims() const {
    require(channels_ >= 1 && height_ >= 1 && width_ >= 1, "grid dims must be >= 1");
  }
  void check_index(int c, int y, int x) const {
    require(c >= 0 && c < channels_ && contains(x, y), "grid index out of range");
  }

  int channels_;
  int height_;
  int width_;
  std::vector<T> data_;
};

using Grid = DenseGrid<double>;

struct Point2 {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Peak {
  int x = 0;
  int y = 0;
  int channel = 0;
  double score = 0;
  friend bool operator==(const Peak&, const Peak&) = default;
};

// ---------------------------------------------------------------------------
// Gaussian targets

/// Sigma floor for degenerate boxes: radius clamp 1e-6, divided by three.
inline constexpr double kMinGaussianSigma = 1e-6 / 3.0;

/// Largest corner displacement r (in the box's units) such that a box whose
/// corners move by r keeps IoU >= min_overlap with the original. Minimum over
/// the three displacement cases: shrink (both corners inward), grow (both
/// outward) and translate (one inward, one outward).
inline double gaussian_radius(double box_w, double box_h, double min_overlap) {
  require(box_w > 0 && box_h > 0, "gaussian_radius: box dimensions must be positive");
  require(min_overlap > 0 && min_overlap < 1, "gaussian_radius: min_overlap must be in (0, 1)");
  const double sum = box_w + box_h;
  const double area = box_w * box_h;
  const double o = min_overlap;

  // translate: (w-r)(h-r)(1+o) >= 2o*wh, smaller root
  const double c1 = area * (1 - o) / (1 + o);
  const double r_translate = (sum - std::sqrt(sum * sum - 4 * c1)) / 2;
  // shrink: (w-2r)(h-2r) >= o*wh, smaller root
  const double r_shrink = (sum - std::sqrt(sum * sum - 4 * (1 - o) * area)) / 4;
  // grow: wh >= o(w+2r)(h+2r), positive root
  const double r_grow = (-o * sum + std::sqrt(o * o * sum * sum + 4 * o * (1 - o) * area)) / (4 * o);

  return std::max(0.0, std::min({r_translate, r_shrink, r_grow}));
}

inline double gaussian_sigma(double box_w, double box_h, double min_overlap = 0.7) {
  return std::max(gaussian_radius(box_w, box_h, min_overlap), 1e-6) / 3.0;
}

/// Splats exp(-d^2 / (2 sigma^2)) around `center` into one channel, keeping
/// the element-wise maximum with what is already there. The kernel is
/// truncated to a square window of half-width ceil(3 sigma); the center may
/// lie off-grid.
template <typename T>
void render_gaussian(DenseGrid<T>& grid, Point2 center, int channel, double sigma) {
  require(channel >= 0 && channel < grid.channels(), "render_gaussian: invalid channel");
  require(sigma > 0, "render_gaussian: sigma must be positive");
  const double reach = std::ceil(3 * sigma);
  const int x0 = std::max(0, static_cast<int>(std::ceil(center.x - reach)));
  const int x1 = std::min(grid.width() - 1, static_cast<int>(std::floor(center.x + reach)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(center.y - reach)));
  const int y1 = std::min(grid.height() - 1, static_cast<int>(std::floor(center.y + reach)));
  const double denom = 2 * sigma * sigma;
  for (int y = y0; y <= y1; ++y) {
    const double dy = y - center.y;
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - center.x;
      const T value = static_cast<T>(std::exp(-(dx * dx + dy * dy) / denom));
      T& cell = grid(channel, y, x);
      if (value > cell) cell = value;
    }
  }
}

// ---------------------------------------------------------------------------
// Pooling and peaks

/// 3x3 max pooling per channel, stride 1, neighborhood clipped at borders.
template <typename T>
DenseGrid<T> max_pool_3x3(const DenseGrid<T>& grid) {
  const int w = grid.width();
  const int h = grid.height();
  DenseGrid<T> rows(grid.channels(), h, w);
  DenseGrid<T> out(grid.channels(), h, w);
  for (int c = 0; c < grid.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T m = grid(c, y, x);
        if (x > 0) m = std::max(m, grid(c, y, x - 1));
        if (x + 1 < w) m = std::max(m, grid(c, y, x + 1));
        rows(c, y, x) = m;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T m = rows(c, y, x);
        if (y > 0) m = std::max(m, rows(c, y - 1, x));
        if (y + 1 < h) m = std::max(m, rows(c, y + 1, x));
        out(c, y, x) = m;
      }
    }
  }
  return out;
}

/// True when the cell is >= each of its in-grid 8-connected neighbors.
template <typename T>
bool is_peak(const DenseGrid<T>& grid, int c, int y, int x) {
  const T v = grid(c, y, x);
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if ((dx == 0 && dy == 0) || !grid.contains(x + dx, y + dy)) continue;
      if (!(v >= grid(c, y + dy, x + dx))) return false;
    }
  }
  return true;
}

enum class PeakScope {
  kGlobal,      // top_k across all channels jointly
  kPerChannel,  // top_k within each channel
};

/// Sort order for peaks: score descending, then (channel, y, x) ascending.
inline bool peak_before(const Peak& a, const Peak& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.channel != b.channel) return a.channel < b.channel;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

template <typename T>
std::vector<Peak> extract_peaks(const DenseGrid<T>& grid, std::size_t top_k,
                                PeakScope scope = PeakScope::kGlobal) {
  require(top_k >= 1, "extract_peaks: top_k must be >= 1");
  std::vector<Peak> peaks;
  for (int c = 0; c < grid.channels(); ++c) {
    std::vector<Peak> channel_peaks;
    for (int y = 0; y < grid.height(); ++y) {
      for (int x = 0; x < grid.width(); ++x) {
        if (is_peak(grid, c, y, x)) {
          channel_peaks.push_back({x, y, c, static_cast<double>(grid(c, y, x))});
        }
      }
    }
    if (scope == PeakScope::kPerChannel && channel_peaks.size() > top_k) {
      std::partial_sort(channel_peaks.begin(), channel_peaks.begin() + top_k, channel_peaks.end(),
                        peak_before);
      channel_peaks.resize(top_k);
    }
    peaks.insert(peaks.end(), channel_peaks.begin(), channel_peaks.end());
  }
  std::sort(peaks.begin(), peaks.end(), peak_before);
  if (scope == PeakScope::kGlobal && peaks.size() > top_k) peaks.resize(top_k);
  return peaks;
}

}  // namespace cpt
