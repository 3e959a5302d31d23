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

// Detector model JSON:
//
//   {"format": "samhead-model", "version": 1,
//    "routing":    {"grid": {"m", "n"}, "target_dim",
//                   "bins": [{"min_height", "max_height" (null = unbounded), "layers"}]},
//    "projectors": [{"input_dim", "output_dim", "requested_dim", "energy",
//                    "mean", "basis" (output_dim x input_dim, row-major), "eigenvalues"}],
//    "channels":   {"semantic", "edge": "none" | "max" | "hist", "edge_bins",
//                   "normalization": "cell_mass" | "grid_cells"},
//    "forest":     {"prior_weight", "descriptor_length",
//                   "trees": [{"feature", "threshold", "left", "right", "value"}],
//                   "stage_history": [...]},
//    "detect":     {"top_k", "nms_threshold"}}
//
// Tree arrays are parallel and in preorder; feature -1 marks a leaf.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "samhead/error.hpp"
#include "samhead/forest.hpp"
#include "samhead/io.hpp"
#include "samhead/pca.hpp"
#include "samhead/routing.hpp"

namespace samhead {

struct DetectorModel {
  RoutingTable routing;
  std::vector<PcaProjector> projectors;
  ChannelConfig channels;
  Forest forest;
  std::size_t top_k = 100;
  double nms_threshold = 0.5;

  std::size_t descriptor_length() const { return samhead::descriptor_length(routing, channels); }

  void validate() const {
    routing.validate();
    if (projectors.size() != routing.bins.size())
      throw Error(ErrorCode::kDimensionMismatch, "need one projector per scale bin");
    for (const auto& p : projectors) {
      p.validate();
      if (p.output_dim != routing.target_dim)
        throw Error(ErrorCode::kDimensionMismatch, "projector output differs from target_dim");
    }
    if (!forest.trees.empty() && forest.descriptor_length != descriptor_length())
      throw Error(ErrorCode::kDimensionMismatch, "forest length differs from descriptor length");
    if (top_k == 0) throw Error(ErrorCode::kInvalidConfig, "top_k must be positive");
    if (!(nms_threshold >= 0.0 && nms_threshold <= 1.0))
      throw Error(ErrorCode::kInvalidConfig, "nms_threshold must lie in [0,1]");
  }
};

inline std::string channel_pooling_name(ChannelPooling p) {
  switch (p) {
    case ChannelPooling::kNone: return "none";
    case ChannelPooling::kMax: return "max";
    case ChannelPooling::kHistogram: return "hist";
  }
  return "none";
}

inline ChannelPooling parse_channel_pooling(const std::string& s) {
  if (s == "none") return ChannelPooling::kNone;
  if (s == "max") return ChannelPooling::kMax;
  if (s == "hist") return ChannelPooling::kHistogram;
  throw Error(ErrorCode::kInvalidConfig, "unknown channel pooling '" + s + "'");
}

inline nlohmann::ordered_json routing_to_json(const RoutingTable& t) {
  nlohmann::ordered_json j;
  j["grid"] = {{"m", t.grid.m}, {"n", t.grid.n}};
  j["target_dim"] = t.target_dim;
  j["bins"] = nlohmann::ordered_json::array();
  for (const auto& b : t.bins) {
    nlohmann::ordered_json bj;
    bj["min_height"] = b.min_height;
    bj["max_height"] = std::isinf(b.max_height) ? nlohmann::ordered_json(nullptr)
                                                : nlohmann::ordered_json(b.max_height);
    bj["layers"] = b.layers;
    j["bins"].push_back(bj);
  }
  return j;
}

template <typename Json>
RoutingTable routing_from_json(const Json& j) {
  RoutingTable t;
  t.grid.m = j.at("grid").at("m").template get<std::size_t>();
  t.grid.n = j.at("grid").at("n").template get<std::size_t>();
  t.target_dim = j.at("target_dim").template get<std::size_t>();
  for (const auto& bj : j.at("bins")) {
    ScaleBin b;
    b.min_height = bj.at("min_height").template get<double>();
    b.max_height = bj.contains("max_height") && !bj.at("max_height").is_null()
                       ? bj.at("max_height").template get<double>()
                       : kUnbounded;
    b.layers = bj.at("layers").template get<std::vector<std::string>>();
    t.bins.push_back(std::move(b));
  }
  return t;
}

inline nlohmann::ordered_json channels_to_json(const ChannelConfig& c) {
  return {{"semantic", channel_pooling_name(c.semantic)},
          {"edge", channel_pooling_name(c.edge)},
          {"edge_bins", c.edge_bins},
          {"normalization",
           c.normalization == HistogramNormalization::kCellMass ? "cell_mass" : "grid_cells"}};
}

template <typename Json>
ChannelConfig channels_from_json(const Json& j) {
  ChannelConfig c;
  c.semantic = parse_channel_pooling(j.value("semantic", std::string("none")));
  c.edge = parse_channel_pooling(j.value("edge", std::string("none")));
  c.edge_bins = j.value("edge_bins", std::size_t{16});
  const std::string norm = j.value("normalization", std::string("cell_mass"));
  if (norm == "cell_mass")
    c.normalization = HistogramNormalization::kCellMass;
  else if (norm == "grid_cells")
    c.normalization = HistogramNormalization::kGridCells;
  else
    throw Error(ErrorCode::kInvalidConfig, "unknown histogram normalization '" + norm + "'");
  if (c.edge == ChannelPooling::kHistogram && c.edge_bins < 2)
    throw Error(ErrorCode::kInvalidConfig, "edge histogram needs at least 2 bins");
  return c;
}

inline nlohmann::ordered_json stage_to_json(const StageRecord& s) {
  return {{"stage", s.stage},       {"trees", s.trees},
          {"positives", s.positives}, {"negatives", s.negatives},
          {"mined", s.mined},       {"margin_clamps", s.margin_clamps},
          {"final_loss", s.final_loss}};
}

template <typename Json>
StageRecord stage_from_json(const Json& j) {
  StageRecord s;
  s.stage = j.at("stage").template get<std::size_t>();
  s.trees = j.at("trees").template get<std::size_t>();
  s.positives = j.at("positives").template get<std::size_t>();
  s.negatives = j.at("negatives").template get<std::size_t>();
  s.mined = j.at("mined").template get<std::size_t>();
  s.margin_clamps = j.value("margin_clamps", std::size_t{0});
  s.final_loss = j.value("final_loss", 0.0);
  return s;
}

inline std::string model_to_json(const DetectorModel& m) {
  nlohmann::ordered_json j;
  j["format"] = "samhead-model";
  j["version"] = 1;
  j["routing"] = routing_to_json(m.routing);
  j["projectors"] = nlohmann::ordered_json::array();
  for (const auto& p : m.projectors)
    j["projectors"].push_back({{"input_dim", p.input_dim},
                               {"output_dim", p.output_dim},
                               {"requested_dim", p.requested_dim},
                               {"energy", p.energy},
                               {"mean", p.mean},
                               {"basis", p.basis},
                               {"eigenvalues", p.eigenvalues}});
  j["channels"] = channels_to_json(m.channels);
  nlohmann::ordered_json f;
  f["prior_weight"] = m.forest.prior_weight;
  f["descriptor_length"] = m.forest.descriptor_length;
  f["trees"] = nlohmann::ordered_json::array();
  for (const Tree& t : m.forest.trees) {
    std::vector<std::int32_t> feature, left, right;
    std::vector<float> threshold;
    std::vector<double> value;
    for (const TreeNode& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    f["trees"].push_back({{"feature", feature},
                          {"threshold", threshold},
                          {"left", left},
                          {"right", right},
                          {"value", value}});
  }
  f["stage_history"] = nlohmann::ordered_json::array();
  for (const auto& s : m.forest.stage_history) f["stage_history"].push_back(stage_to_json(s));
  j["forest"] = std::move(f);
  j["detect"] = {{"top_k", m.top_k}, {"nms_threshold", m.nms_threshold}};
  return j.dump() + "\n";
}

inline DetectorModel model_from_json(const std::string& text) {
  DetectorModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", std::string()) != "samhead-model")
      throw Error(ErrorCode::kBadMagic, "not a samhead model");
    if (j.value("version", 0) != 1)
      throw Error(ErrorCode::kUnsupportedVersion, "unsupported model version");
    m.routing = routing_from_json(j.at("routing"));
    for (const auto& pj : j.at("projectors")) {
      PcaProjector p;
      p.input_dim = pj.at("input_dim").get<std::size_t>();
      p.output_dim = pj.at("output_dim").get<std::size_t>();
      p.requested_dim = pj.value("requested_dim", p.output_dim);
      p.energy = pj.at("energy").get<double>();
      p.mean = pj.at("mean").get<std::vector<double>>();
      p.basis = pj.at("basis").get<std::vector<double>>();
      p.eigenvalues = pj.at("eigenvalues").get<std::vector<double>>();
      p.validate();
      p.identity = is_identity_projector(p);
      m.projectors.push_back(std::move(p));
    }
    m.channels = channels_from_json(j.at("channels"));
    const auto& f = j.at("forest");
    m.forest.prior_weight = f.at("prior_weight").get<double>();
    m.forest.descriptor_length = f.at("descriptor_length").get<std::size_t>();
    for (const auto& tj : f.at("trees")) {
      const auto feature = tj.at("feature").get<std::vector<std::int32_t>>();
      const auto threshold = tj.at("threshold").get<std::vector<float>>();
      const auto left = tj.at("left").get<std::vector<std::int32_t>>();
      const auto right = tj.at("right").get<std::vector<std::int32_t>>();
      const auto value = tj.at("value").get<std::vector<double>>();
      const std::size_t n = feature.size();
      if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n ||
          value.size() != n)
        throw Error(ErrorCode::kParse, "tree arrays differ in length");
      Tree t;
      for (std::size_t i = 0; i < n; ++i) {
        TreeNode node{feature[i], threshold[i], left[i], right[i], value[i]};
        if (!node.is_leaf()) {
          const auto in_range = [&](std::int32_t c) {
            return c > static_cast<std::int32_t>(i) && c < static_cast<std::int32_t>(n);
          };
          if (!in_range(node.left) || !in_range(node.right) ||
              static_cast<std::size_t>(node.feature) >= m.forest.descriptor_length)
            throw Error(ErrorCode::kParse, "tree node references are out of range");
        }
        t.nodes.push_back(node);
      }
      m.forest.trees.push_back(std::move(t));
    }
    if (f.contains("stage_history"))
      for (const auto& s : f.at("stage_history")) m.forest.stage_history.push_back(stage_from_json(s));
    if (j.contains("detect")) {
      m.top_k = j.at("detect").value("top_k", std::size_t{100});
      m.nms_threshold = j.at("detect").value("nms_threshold", 0.5);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model: ") + e.what());
  }
  m.validate();
  return m;
}

inline void write_model(const std::filesystem::path& path, const DetectorModel& m) {
  detail::write_text(path, model_to_json(m));
}

inline DetectorModel read_model(const std::filesystem::path& path) {
  return model_from_json(detail::read_text(path));
}

}  // namespace samhead
