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
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "samhead/error.hpp"

namespace samhead {

// Axis-aligned box in image pixels, stored as top-left corner plus extent.
class Box {
 public:
  Box() = default;
  Box(double x, double y, double w, double h) : x_(x), y_(y), w_(w), h_(h) {
    if (!(std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h)))
      throw Error(ErrorCode::kInvalidArgument, "box coordinates must be finite");
    if (!(w > 0.0 && h > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "box extent must be positive");
  }

  static Box from_corners(double x1, double y1, double x2, double y2) {
    return Box(x1, y1, x2 - x1, y2 - y1);
  }

  double x() const { return x_; }
  double y() const { return y_; }
  double w() const { return w_; }
  double h() const { return h_; }
  double x2() const { return x_ + w_; }
  double y2() const { return y_ + h_; }
  double cx() const { return x_ + 0.5 * w_; }
  double cy() const { return y_ + 0.5 * h_; }
  double area() const { return w_ * h_; }

  bool operator==(const Box&) const = default;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double w_ = 1.0;
  double h_ = 1.0;
};

// Region proposal with its confidence in [0,1].
struct Candidate {
  Box box;
  double score = 0.0;

  Candidate() = default;
  Candidate(const Box& b, double s) : box(b), score(s) {
    if (!(s >= 0.0 && s <= 1.0))
      throw Error(ErrorCode::kInvalidArgument, "candidate score must lie in [0,1]");
  }
};

struct GroundTruthBox {
  Box box;
  double occlusion = 0.0;
  double truncation = 0.0;
  bool ignore = false;

  GroundTruthBox() = default;
  GroundTruthBox(const Box& b, double occl, double trunc, bool ign = false)
      : box(b), occlusion(occl), truncation(trunc), ignore(ign) {
    if (!(occl >= 0.0 && occl <= 1.0) || !(trunc >= 0.0 && trunc <= 1.0))
      throw Error(ErrorCode::kInvalidArgument,
                  "occlusion and truncation must lie in [0,1]");
  }
};

// Classifier output; `score` is an unbounded forest margin.
struct Detection {
  Box box;
  double score = 0.0;

  Detection() = default;
  Detection(const Box& b, double s) : box(b), score(s) {
    if (!std::isfinite(s))
      throw Error(ErrorCode::kInvalidArgument, "detection score must be finite");
  }
};

inline double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x(), b.x());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y(), b.y());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

// Indices of `items` in descending key order; equal keys keep input order.
template <typename Range, typename Key>
std::vector<std::size_t> order_by_descending(const Range& items, Key key) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return key(items[a]) > key(items[b]);
  });
  return order;
}

// Greedy non-maximum suppression. A box is suppressed when its IoU with an
// already kept, higher-ranked box exceeds `threshold`.
inline std::vector<Detection> nms(std::span<const Detection> dets, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "nms threshold must lie in [0,1]");
  const auto order =
      order_by_descending(dets, [](const Detection& d) { return d.score; });
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    bool keep = true;
    for (const Detection& k : kept) {
      if (iou(d.box, k.box) > threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(d);
  }
  return kept;
}

struct AnchorConfig {
  double ratio = 0.41;  // width / height
  std::vector<double> scales = default_scales();
  double stride = 16.0;

  // Heights base * factor^k for k in [0, count).
  static std::vector<double> default_scales(std::size_t count = 9, double base = 40.0,
                                            double factor = 1.3) {
    std::vector<double> out(count);
    double h = base;
    for (std::size_t k = 0; k < count; ++k, h *= factor) out[k] = h;
    return out;
  }

  void validate() const {
    detail::require(ratio > 0.0, ErrorCode::kInvalidConfig, "anchor ratio must be positive");
    detail::require(stride > 0.0, ErrorCode::kInvalidConfig, "anchor stride must be positive");
    detail::require(!scales.empty(), ErrorCode::kInvalidConfig, "anchor scales must be non-empty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
      detail::require(scales[i] > 0.0, ErrorCode::kInvalidConfig, "anchor scales must be positive");
      if (i > 0)
        detail::require(scales[i] > scales[i - 1], ErrorCode::kInvalidConfig,
                        "anchor scales must be strictly increasing");
    }
  }
};

// One anchor per (grid row, grid column, scale), centred on the stride grid.
// Anchors are not clipped to the image.
inline std::vector<Box> generate_anchors(const AnchorConfig& cfg, double image_w,
                                         double image_h) {
  cfg.validate();
  if (!(image_w > 0.0 && image_h > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  const auto grid_w = static_cast<std::size_t>(std::ceil(image_w / cfg.stride));
  const auto grid_h = static_cast<std::size_t>(std::ceil(image_h / cfg.stride));
  std::vector<Box> anchors;
  anchors.reserve(grid_w * grid_h * cfg.scales.size());
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      const double cx = (static_cast<double>(gx) + 0.5) * cfg.stride;
      const double cy = (static_cast<double>(gy) + 0.5) * cfg.stride;
      for (double h : cfg.scales) {
        const double w = cfg.ratio * h;
        anchors.emplace_back(cx - 0.5 * w, cy - 0.5 * h, w, h);
      }
    }
  }
  return anchors;
}

struct RegionBounds {
  double xmin = 5.0;
  double xmax = 635.0;
  double ymin = 5.0;
  double ymax = 475.0;
};

// Keep iff the box centre lies inside the closed bounds rectangle.
inline bool clip_to_eval_region(const Box& box, const RegionBounds& bounds) {
  if (!(bounds.xmin <= bounds.xmax && bounds.ymin <= bounds.ymax))
    throw Error(ErrorCode::kInvalidArgument, "region bounds must be well ordered");
  const double cx = box.cx();
  const double cy = box.cy();
  return cx >= bounds.xmin && cx <= bounds.xmax && cy >= bounds.ymin && cy <= bounds.ymax;
}

}  // namespace samhead
