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

// Scale-aware feature routing. A candidate's box height selects a scale bin;
// the bin names the CNN layers whose RoI-max-pooled features are
// concatenated per grid cell and projected by the bin's PCA projector to a
// common per-cell dimension. Descriptors therefore have one length for every
// bin:
//
//   [ cell 0: d values | cell 1: d values | ... | cell m*n-1 ]   CNN block
//   [ semantic block ] [ edge block ]                           optional
//
// Semantic/edge blocks are appended unprojected.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "samhead/error.hpp"
#include "samhead/featuremap.hpp"
#include "samhead/geometry.hpp"
#include "samhead/pca.hpp"
#include "samhead/pooling.hpp"

namespace samhead {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct ScaleBin {
  double min_height = 0.0;
  double max_height = kUnbounded;  // exclusive
  std::vector<std::string> layers;

  bool operator==(const ScaleBin&) const = default;
};

struct RoutingTable {
  std::vector<ScaleBin> bins;
  PoolGrid grid;
  std::size_t target_dim = 0;  // per-cell dimension after projection

  void validate() const {
    grid.validate();
    if (bins.empty()) throw Error(ErrorCode::kInvalidConfig, "routing table needs a bin");
    if (target_dim == 0) throw Error(ErrorCode::kInvalidConfig, "target_dim must be positive");
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const ScaleBin& s = bins[b];
      if (!(s.min_height < s.max_height))
        throw Error(ErrorCode::kInvalidConfig, "bin " + std::to_string(b) + ": min >= max");
      if (s.layers.empty())
        throw Error(ErrorCode::kInvalidConfig, "bin " + std::to_string(b) + " has no layers");
      if (b > 0 && bins[b - 1].max_height != s.min_height)
        throw Error(ErrorCode::kInvalidConfig, "bins must be contiguous and ordered");
    }
    if (bins.back().max_height != kUnbounded)
      throw Error(ErrorCode::kInvalidConfig, "last bin must be unbounded above");
  }

  bool operator==(const RoutingTable&) const = default;
};

// Small [50,80) -> conv3+conv4a, large [80,inf) -> conv4a+conv5a, 12x5 grid,
// per-cell dimension of the small bin's concatenation (256 + 512).
inline RoutingTable default_routing_table() {
  RoutingTable t;
  t.bins = {ScaleBin{50.0, 80.0, {"conv3", "conv4a"}},
            ScaleBin{80.0, kUnbounded, {"conv4a", "conv5a"}}};
  t.grid = PoolGrid{12, 5};
  t.target_dim = 768;
  return t;
}

// Single bin covering every height; the plain fixed-combination head.
inline RoutingTable single_bin_table(std::vector<std::string> layers, PoolGrid grid,
                                     std::size_t target_dim) {
  RoutingTable t;
  t.bins = {ScaleBin{0.0, kUnbounded, std::move(layers)}};
  t.grid = grid;
  t.target_dim = target_dim;
  return t;
}

// Bin whose [min, max) holds the candidate height. Heights below the first
// bin route to the first bin.
inline std::size_t route(const RoutingTable& table, const Candidate& cand) {
  const double h = cand.box.h();
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "candidate height must be positive");
  if (table.bins.empty()) throw Error(ErrorCode::kInvalidConfig, "routing table has no bins");
  for (std::size_t b = 0; b < table.bins.size(); ++b)
    if (h < table.bins[b].max_height) return b;
  return table.bins.size() - 1;
}

enum class ChannelPooling { kNone, kMax, kHistogram };

struct ChannelConfig {
  ChannelPooling semantic = ChannelPooling::kNone;
  ChannelPooling edge = ChannelPooling::kNone;
  std::size_t edge_bins = 16;
  HistogramNormalization normalization = HistogramNormalization::kCellMass;

  bool enabled() const {
    return semantic != ChannelPooling::kNone || edge != ChannelPooling::kNone;
  }
  std::size_t semantic_length(const PoolGrid& g) const {
    switch (semantic) {
      case ChannelPooling::kNone: return 0;
      case ChannelPooling::kMax: return g.cells();
      case ChannelPooling::kHistogram: return kNumLabelClasses * g.cells();
    }
    return 0;
  }
  std::size_t edge_length(const PoolGrid& g) const {
    switch (edge) {
      case ChannelPooling::kNone: return 0;
      case ChannelPooling::kMax: return g.cells();
      case ChannelPooling::kHistogram: return edge_bins * g.cells();
    }
    return 0;
  }

  bool operator==(const ChannelConfig&) const = default;
};

inline std::size_t descriptor_length(const RoutingTable& table, const ChannelConfig& channels) {
  return table.target_dim * table.grid.cells() + channels.semantic_length(table.grid) +
         channels.edge_length(table.grid);
}

struct Descriptor {
  std::vector<float> values;
  std::size_t bin_index = 0;
  Candidate candidate;
};

// Per-cell channel vectors of a bin's layers: cells x D, row-major, where D
// is the sum of the layers' channel counts in table order.
inline std::vector<float> pooled_cell_vectors(const ImageRecord& record, const Box& box,
                                              const std::vector<std::string>& layers,
                                              const PoolGrid& grid, std::size_t* dim_out = nullptr) {
  std::size_t dim = 0;
  for (const auto& name : layers) dim += record.layer(name).channels();
  const std::size_t cells = grid.cells();
  std::vector<float> out(cells * dim);
  std::size_t offset = 0;
  for (const auto& name : layers) {
    const FeatureMap& map = record.layer(name);
    const FeatureRect rect = map_to_feature_coords(box, map.stride(), map.height(), map.width());
    const std::vector<float> pooled = roi_max_pool(map, rect, grid);
    for (std::size_t c = 0; c < map.channels(); ++c)
      for (std::size_t cell = 0; cell < cells; ++cell)
        out[cell * dim + offset + c] = pooled[c * cells + cell];
    offset += map.channels();
  }
  if (dim_out) *dim_out = dim;
  return out;
}

// Semantic and edge blocks for one box, in that order.
inline void append_channel_blocks(const ImageRecord& record, const Box& box,
                                  const PoolGrid& grid, const ChannelConfig& channels,
                                  std::vector<float>& out) {
  if (channels.semantic != ChannelPooling::kNone) {
    if (!record.labels)
      throw Error(ErrorCode::kMissingLayer, "image '" + record.image_id + "' has no label map");
    const LabelMap& lm = *record.labels;
    const FeatureRect rect = map_to_feature_coords(box, 1.0, lm.height(), lm.width());
    const std::vector<double> block =
        channels.semantic == ChannelPooling::kHistogram
            ? roi_histogram_pool(lm, rect, grid, kNumLabelClasses, channels.normalization)
            : roi_label_max_pool(lm, rect, grid);
    for (double v : block) out.push_back(static_cast<float>(v));
  }
  if (channels.edge != ChannelPooling::kNone) {
    if (!record.edges)
      throw Error(ErrorCode::kMissingLayer, "image '" + record.image_id + "' has no edge map");
    const EdgeMap& em = *record.edges;
    const FeatureRect rect = map_to_feature_coords(box, 1.0, em.height(), em.width());
    const auto mode =
        channels.edge == ChannelPooling::kHistogram ? EdgePoolMode::kHistogram : EdgePoolMode::kMax;
    for (double v : roi_edge_pool(em, rect, grid, mode, channels.edge_bins))
      out.push_back(static_cast<float>(v));
  }
}

inline Descriptor assemble_descriptor(const ImageRecord& record, const Candidate& cand,
                                      const RoutingTable& table,
                                      std::span<const PcaProjector> projectors,
                                      const ChannelConfig& channels) {
  if (projectors.size() != table.bins.size())
    throw Error(ErrorCode::kDimensionMismatch, "need one projector per scale bin");
  Descriptor desc;
  desc.candidate = cand;
  desc.bin_index = route(table, cand);
  const ScaleBin& bin = table.bins[desc.bin_index];
  const PcaProjector& proj = projectors[desc.bin_index];

  std::size_t dim = 0;
  const std::vector<float> cells = pooled_cell_vectors(record, cand.box, bin.layers, table.grid, &dim);
  if (proj.input_dim != dim)
    throw Error(ErrorCode::kDimensionMismatch,
                "bin " + std::to_string(desc.bin_index) + " pools " + std::to_string(dim) +
                    " channels but its projector expects " + std::to_string(proj.input_dim));
  if (proj.output_dim != table.target_dim)
    throw Error(ErrorCode::kDimensionMismatch, "projector output differs from target_dim");

  const std::size_t n_cells = table.grid.cells();
  desc.values.reserve(descriptor_length(table, channels));
  std::vector<double> projected(n_cells * proj.output_dim);
  pca_project_rows<float>(proj, cells, projected);
  for (double v : projected) desc.values.push_back(static_cast<float>(v));
  append_channel_blocks(record, cand.box, table.grid, channels, desc.values);
  return desc;
}

}  // namespace samhead
