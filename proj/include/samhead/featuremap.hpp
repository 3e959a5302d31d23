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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "samhead/error.hpp"

namespace samhead {

// Label index 0 is void; 1..20 are the semantic classes.
inline constexpr std::uint8_t kMaxLabel = 20;
inline constexpr std::size_t kNumLabelClasses = 21;

inline bool is_supported_stride(std::uint32_t stride) {
  return stride == 1 || stride == 2 || stride == 4 || stride == 8 || stride == 16;
}

// One CNN layer's activations for one image: C x H x W floats, channel-major,
// row-major within a channel. `stride` is image pixels per feature cell.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::string layer_name, std::uint32_t stride, std::uint32_t channels,
             std::uint32_t height, std::uint32_t width, std::vector<float> data)
      : layer_name_(std::move(layer_name)),
        stride_(stride),
        channels_(channels),
        height_(height),
        width_(width),
        data_(std::move(data)) {
    validate();
  }

  // Zero-filled map.
  static FeatureMap zeros(std::string layer_name, std::uint32_t stride, std::uint32_t channels,
                          std::uint32_t height, std::uint32_t width) {
    return FeatureMap(std::move(layer_name), stride, channels, height, width,
                      std::vector<float>(std::size_t{channels} * height * width, 0.0f));
  }

  const std::string& layer_name() const { return layer_name_; }
  std::uint32_t stride() const { return stride_; }
  std::uint32_t channels() const { return channels_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }

  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }
  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }

  void validate() const {
    if (layer_name_.empty())
      throw Error(ErrorCode::kInvalidArgument, "feature map needs a layer name");
    if (!is_supported_stride(stride_))
      throw Error(ErrorCode::kBadDimensions,
                  "stride " + std::to_string(stride_) + " not in {1,2,4,8,16}");
    if (channels_ == 0 || height_ == 0 || width_ == 0)
      throw Error(ErrorCode::kBadDimensions, "feature map dimensions must be positive");
    if (data_.size() != std::size_t{channels_} * height_ * width_)
      throw Error(ErrorCode::kBadDimensions, "feature map data length != C*H*W");
    for (std::size_t i = 0; i < data_.size(); ++i)
      if (!std::isfinite(data_[i]))
        throw Error(ErrorCode::kValueOutOfRange, "non-finite feature value", i);
  }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::string layer_name_;
  std::uint32_t stride_ = 1;
  std::uint32_t channels_ = 0;
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::vector<float> data_;
};

// Per-pixel semantic class indices at image resolution.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::uint32_t height, std::uint32_t width, std::vector<std::uint8_t> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (height_ == 0 || width_ == 0)
      throw Error(ErrorCode::kBadDimensions, "label map dimensions must be positive");
    if (data_.size() != std::size_t{height_} * width_)
      throw Error(ErrorCode::kBadDimensions, "label map data length != H*W");
    for (std::size_t i = 0; i < data_.size(); ++i)
      if (data_[i] > kMaxLabel)
        throw Error(ErrorCode::kValueOutOfRange,
                    "label value " + std::to_string(data_[i]) + " exceeds 20", i);
  }

  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

  bool operator==(const LabelMap&) const = default;

 private:
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::vector<std::uint8_t> data_;
};

// Per-pixel edge intensities in [0,1] at image resolution.
class EdgeMap {
 public:
  EdgeMap() = default;
  EdgeMap(std::uint32_t height, std::uint32_t width, std::vector<float> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (height_ == 0 || width_ == 0)
      throw Error(ErrorCode::kBadDimensions, "edge map dimensions must be positive");
    if (data_.size() != std::size_t{height_} * width_)
      throw Error(ErrorCode::kBadDimensions, "edge map data length != H*W");
    for (std::size_t i = 0; i < data_.size(); ++i)
      if (!(data_[i] >= 0.0f && data_[i] <= 1.0f))
        throw Error(ErrorCode::kValueOutOfRange, "edge value outside [0,1]", i);
  }

  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::span<const float> data() const { return data_; }
  float at(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

  bool operator==(const EdgeMap&) const = default;

 private:
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::vector<float> data_;
};

// A map of the given stride covers the image when stride*dim >= image - stride.
inline bool map_covers_image(std::uint32_t stride, std::uint32_t map_w, std::uint32_t map_h,
                             std::uint32_t image_w, std::uint32_t image_h) {
  const auto s = static_cast<std::int64_t>(stride);
  return s * map_w >= static_cast<std::int64_t>(image_w) - s &&
         s * map_h >= static_cast<std::int64_t>(image_h) - s;
}

struct ImageRecord {
  std::string image_id;
  std::uint32_t image_w = 0;
  std::uint32_t image_h = 0;
  std::map<std::string, FeatureMap> layers;
  std::optional<LabelMap> labels;
  std::optional<EdgeMap> edges;

  const FeatureMap& layer(const std::string& name) const {
    auto it = layers.find(name);
    if (it == layers.end())
      throw Error(ErrorCode::kMissingLayer,
                  "image '" + image_id + "' has no layer '" + name + "'");
    return it->second;
  }

  void validate() const {
    if (image_w == 0 || image_h == 0)
      throw Error(ErrorCode::kBadDimensions, "image dimensions must be positive");
    for (const auto& [name, map] : layers) {
      if (name != map.layer_name())
        throw Error(ErrorCode::kInvalidArgument, "layer key/name mismatch for " + name);
      if (!map_covers_image(map.stride(), map.width(), map.height(), image_w, image_h))
        throw Error(ErrorCode::kBadDimensions, "layer " + name + " does not cover the image");
    }
    if (labels && !map_covers_image(1, labels->width(), labels->height(), image_w, image_h))
      throw Error(ErrorCode::kBadDimensions, "label map does not cover the image");
    if (edges && !map_covers_image(1, edges->width(), edges->height(), image_w, image_h))
      throw Error(ErrorCode::kBadDimensions, "edge map does not cover the image");
  }
};

}  // namespace samhead
