// Copyright 2026 The samhead Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "samhead/error.hpp"
#include "samhead/featuremap.hpp"
#include "samhead/geometry.hpp"

namespace samhead {

// m vertical cells by n horizontal cells.
struct PoolGrid {
  std::size_t m = 12;
  std::size_t n = 5;

  std::size_t cells() const { return m * n; }
  void validate() const {
    if (m < 1 || n < 1) throw Error(ErrorCode::kInvalidArgument, "pool grid must be at least 1x1");
  }
  bool operator==(const PoolGrid&) const = default;
};

// Half-open feature-cell rectangle.
struct FeatureRect {
  std::int64_t col_start = 0;
  std::int64_t col_end = 1;
  std::int64_t row_start = 0;
  std::int64_t row_end = 1;

  std::int64_t rows() const { return row_end - row_start; }
  std::int64_t cols() const { return col_end - col_start; }
  bool operator==(const FeatureRect&) const = default;
};

// Image box -> feature cells: floor on the start edge, ceil on the end edge,
// clamped to the map with at least one cell per axis.
inline FeatureRect map_to_feature_coords(const Box& box, double stride, std::int64_t map_h,
                                         std::int64_t map_w) {
  if (!(stride >= 1.0)) throw Error(ErrorCode::kInvalidArgument, "stride must be >= 1");
  if (map_h <= 0 || map_w <= 0)
    throw Error(ErrorCode::kInvalidArgument, "map dimensions must be positive");
  auto axis = [&](double start, double extent, std::int64_t limit, std::int64_t& lo,
                  std::int64_t& hi) {
    lo = static_cast<std::int64_t>(std::floor(start / stride));
    hi = static_cast<std::int64_t>(std::ceil((start + extent) / stride));
    if (hi <= lo) hi = lo + 1;
    if (hi <= 0 || lo >= limit)
      throw Error(ErrorCode::kDegenerateRoi, "box lies outside the feature map");
    lo = std::max<std::int64_t>(lo, 0);
    hi = std::min<std::int64_t>(hi, limit);
  };
  FeatureRect r;
  axis(box.x(), box.w(), map_w, r.col_start, r.col_end);
  axis(box.y(), box.h(), map_h, r.row_start, r.row_end);
  return r;
}

namespace detail {

inline void check_rect(const FeatureRect& rect, std::int64_t map_h, std::int64_t map_w) {
  if (rect.rows() <= 0 || rect.cols() <= 0 || rect.row_start < 0 || rect.col_start < 0 ||
      rect.row_end > map_h || rect.col_end > map_w)
    throw Error(ErrorCode::kDegenerateRoi, "rect is empty or exceeds the map");
}

// Bounds of grid slot `i` out of `parts` over `extent` cells starting at
// `origin`: [origin + floor(i*extent/parts), origin + floor((i+1)*extent/parts)),
// widened to one cell when empty.
inline std::pair<std::int64_t, std::int64_t> slot_bounds(std::int64_t origin, std::int64_t extent,
                                                         std::size_t i, std::size_t parts) {
  const auto p = static_cast<std::int64_t>(parts);
  const auto k = static_cast<std::int64_t>(i);
  const std::int64_t lo = origin + (k * extent) / p;
  std::int64_t hi = origin + ((k + 1) * extent) / p;
  if (hi <= lo) hi = lo + 1;
  return {lo, hi};
}

// Calls visit(cell_index, y, x) for every source position of every grid cell.
template <typename Visit>
void for_each_cell_source(const FeatureRect& rect, const PoolGrid& grid, Visit&& visit) {
  for (std::size_t i = 0; i < grid.m; ++i) {
    const auto [r0, r1] = slot_bounds(rect.row_start, rect.rows(), i, grid.m);
    for (std::size_t j = 0; j < grid.n; ++j) {
      const auto [c0, c1] = slot_bounds(rect.col_start, rect.cols(), j, grid.n);
      const std::size_t cell = i * grid.n + j;
      for (std::int64_t y = r0; y < r1; ++y)
        for (std::int64_t x = c0; x < c1; ++x)
          visit(cell, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    }
  }
}

}  // namespace detail

// Output[c, i, j] = max of channel c over grid cell (i, j); channel-major.
inline std::vector<float> roi_max_pool(const FeatureMap& map, const FeatureRect& rect,
                                       const PoolGrid& grid) {
  grid.validate();
  detail::check_rect(rect, map.height(), map.width());
  const std::size_t cells = grid.cells();
  std::vector<float> out(map.channels() * cells, -std::numeric_limits<float>::infinity());
  const auto data = map.data();
  const std::size_t plane = std::size_t{map.height()} * map.width();
  for (std::size_t i = 0; i < grid.m; ++i) {
    const auto [r0, r1] = detail::slot_bounds(rect.row_start, rect.rows(), i, grid.m);
    for (std::size_t j = 0; j < grid.n; ++j) {
      const auto [c0, c1] = detail::slot_bounds(rect.col_start, rect.cols(), j, grid.n);
      const std::size_t cell = i * grid.n + j;
      for (std::size_t c = 0; c < map.channels(); ++c) {
        const float* base = data.data() + c * plane;
        float best = -std::numeric_limits<float>::infinity();
        for (std::int64_t y = r0; y < r1; ++y) {
          const float* row = base + static_cast<std::size_t>(y) * map.width();
          for (std::int64_t x = c0; x < c1; ++x) best = std::max(best, row[x]);
        }
        out[c * cells + cell] = best;
      }
    }
  }
  return out;
}

enum class HistogramNormalization {
  kCellMass,    // divide by the cell's pixel count; every cell sums to 1
  kGridCells,   // divide by m*n
};

// Per-cell class histograms, concatenated cell-major: out[cell*classes + c].
inline std::vector<double> roi_histogram_pool(
    const LabelMap& map, const FeatureRect& rect, const PoolGrid& grid,
    std::size_t num_classes = kNumLabelClasses,
    HistogramNormalization norm = HistogramNormalization::kCellMass) {
  grid.validate();
  detail::check_rect(rect, map.height(), map.width());
  if (num_classes == 0) throw Error(ErrorCode::kInvalidArgument, "num_classes must be positive");
  std::vector<double> counts(grid.cells() * num_classes, 0.0);
  std::vector<double> mass(grid.cells(), 0.0);
  detail::for_each_cell_source(rect, grid, [&](std::size_t cell, std::size_t y, std::size_t x) {
    const std::size_t label = map.at(y, x);
    if (label >= num_classes)
      throw Error(ErrorCode::kValueOutOfRange, "label exceeds class count", y * map.width() + x);
    counts[cell * num_classes + label] += 1.0;
    mass[cell] += 1.0;
  });
  const double grid_norm = static_cast<double>(grid.cells());
  for (std::size_t cell = 0; cell < grid.cells(); ++cell) {
    const double denom = norm == HistogramNormalization::kCellMass ? mass[cell] : grid_norm;
    for (std::size_t c = 0; c < num_classes; ++c) counts[cell * num_classes + c] /= denom;
  }
  return counts;
}

// Per-cell maximum label index (labels treated as values), row-major cells.
inline std::vector<double> roi_label_max_pool(const LabelMap& map, const FeatureRect& rect,
                                              const PoolGrid& grid) {
  grid.validate();
  detail::check_rect(rect, map.height(), map.width());
  std::vector<double> out(grid.cells(), 0.0);
  detail::for_each_cell_source(rect, grid, [&](std::size_t cell, std::size_t y, std::size_t x) {
    out[cell] = std::max(out[cell], static_cast<double>(map.at(y, x)));
  });
  return out;
}

enum class EdgePoolMode { kMax, kHistogram };

inline std::size_t edge_bin(float v, std::size_t bins) {
  const auto b = static_cast<std::size_t>(static_cast<double>(v) * static_cast<double>(bins));
  return std::min(b, bins - 1);
}

// kMax: per-cell maximum intensity (m*n values).
// kHistogram: intensities quantised into `bins` uniform bins over [0,1], then
// pooled per cell with cell-mass normalisation (bins*m*n values, cell-major).
inline std::vector<double> roi_edge_pool(const EdgeMap& map, const FeatureRect& rect,
                                         const PoolGrid& grid, EdgePoolMode mode,
                                         std::size_t bins = 16) {
  grid.validate();
  detail::check_rect(rect, map.height(), map.width());
  if (mode == EdgePoolMode::kMax) {
    std::vector<double> out(grid.cells(), 0.0);
    detail::for_each_cell_source(rect, grid, [&](std::size_t cell, std::size_t y, std::size_t x) {
      out[cell] = std::max(out[cell], static_cast<double>(map.at(y, x)));
    });
    return out;
  }
  if (bins < 2) throw Error(ErrorCode::kInvalidArgument, "edge histogram needs at least 2 bins");
  std::vector<double> counts(grid.cells() * bins, 0.0);
  std::vector<double> mass(grid.cells(), 0.0);
  detail::for_each_cell_source(rect, grid, [&](std::size_t cell, std::size_t y, std::size_t x) {
    counts[cell * bins + edge_bin(map.at(y, x), bins)] += 1.0;
    mass[cell] += 1.0;
  });
  for (std::size_t cell = 0; cell < grid.cells(); ++cell)
    for (std::size_t b = 0; b < bins; ++b) counts[cell * bins + b] /= mass[cell];
  return counts;
}

}  // namespace samhead
