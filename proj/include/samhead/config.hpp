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

// Run configuration: one JSON document with a section per subcommand.
//
//   {"seed": 7,
//    "synth":  {"image_count", "image_w", ..., "layers": [{"name", "stride", "channels", "strength"}]},
//    "train":  {"dataset", "schedule": "basic" | "full", <schedule overrides>,
//               "routing", "channels", "pca": {"identity", "max_samples"},
//               "heights": {"min", "max"}, "detect": {"top_k", "nms_threshold"}},
//    "detect": {"model", "dataset"},
//    "eval":   {"detections", "annotations", "protocol", "ap_points": 11 | 40},
//    "sweep":  {"train_dataset", "test_dataset", "combinations", "subsets",
//               "grid", "train": <schedule keys>, "channels", "protocol", "pca"},
//    "plot":   {"curves": [{"path", "label"}], "title"}}
//
// Unknown keys are rejected so that typos do not silently fall back to
// defaults. Relative paths resolve against the config file's directory.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "samhead/bootstrap.hpp"
#include "samhead/error.hpp"
#include "samhead/evaluation.hpp"
#include "samhead/io.hpp"
#include "samhead/model_io.hpp"
#include "samhead/pipeline.hpp"
#include "samhead/routing.hpp"
#include "samhead/synth.hpp"

namespace samhead {

using Json = nlohmann::json;

namespace detail {

inline void check_keys(const Json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw Error(ErrorCode::kInvalidConfig, "unknown key '" + key + "' in " + where);
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

// null or absent means unbounded.
inline void read_bound(const Json& j, const char* key, double& out) {
  if (!j.contains(key)) return;
  out = j.at(key).is_null() ? std::numeric_limits<double>::infinity() : j.at(key).get<double>();
}

}  // namespace detail

inline SynthConfig synth_config_from_json(const Json& j) {
  detail::check_keys(j,
                     {"image_count", "image_w", "image_h", "layers", "template_channels",
                      "pedestrians_min", "pedestrians_max", "small_fraction", "small_min",
                      "small_max", "large_min", "large_max", "aspect", "distractor_density",
                      "clutter_per_distractor", "proposals_per_object", "near_per_object",
                      "jitter", "max_object_iou", "noise_sigma", "objectness", "template_width",
                      "resolution_q0", "resolution_q1", "resolution_power", "score_gain",
                      "score_noise", "occluded_fraction", "ignore_fraction", "emit_labels",
                      "background_regions", "label_noise", "distractor_label_confusion",
                      "emit_edges", "edge_segments", "edge_noise"},
                     "synth");
  SynthConfig c;
  using detail::read_opt;
  read_opt(j, "image_count", c.image_count);
  read_opt(j, "image_w", c.image_w);
  read_opt(j, "image_h", c.image_h);
  if (j.contains("layers")) {
    c.layers.clear();
    for (const auto& lj : j.at("layers")) {
      detail::check_keys(lj, {"name", "stride", "channels", "strength"}, "synth.layers");
      SynthLayer l;
      l.name = lj.at("name").get<std::string>();
      read_opt(lj, "stride", l.stride);
      read_opt(lj, "channels", l.channels);
      read_opt(lj, "strength", l.strength);
      c.layers.push_back(std::move(l));
    }
  }
  read_opt(j, "template_channels", c.template_channels);
  read_opt(j, "pedestrians_min", c.pedestrians_min);
  read_opt(j, "pedestrians_max", c.pedestrians_max);
  read_opt(j, "small_fraction", c.small_fraction);
  read_opt(j, "small_min", c.small_min);
  read_opt(j, "small_max", c.small_max);
  read_opt(j, "large_min", c.large_min);
  read_opt(j, "large_max", c.large_max);
  read_opt(j, "aspect", c.aspect);
  read_opt(j, "distractor_density", c.distractor_density);
  read_opt(j, "clutter_per_distractor", c.clutter_per_distractor);
  read_opt(j, "proposals_per_object", c.proposals_per_object);
  read_opt(j, "near_per_object", c.near_per_object);
  read_opt(j, "jitter", c.jitter);
  read_opt(j, "max_object_iou", c.max_object_iou);
  read_opt(j, "noise_sigma", c.noise_sigma);
  read_opt(j, "objectness", c.objectness);
  read_opt(j, "template_width", c.template_width);
  read_opt(j, "resolution_q0", c.resolution_q0);
  read_opt(j, "resolution_q1", c.resolution_q1);
  read_opt(j, "resolution_power", c.resolution_power);
  read_opt(j, "score_gain", c.score_gain);
  read_opt(j, "score_noise", c.score_noise);
  read_opt(j, "occluded_fraction", c.occluded_fraction);
  read_opt(j, "ignore_fraction", c.ignore_fraction);
  read_opt(j, "emit_labels", c.emit_labels);
  read_opt(j, "background_regions", c.background_regions);
  read_opt(j, "label_noise", c.label_noise);
  read_opt(j, "distractor_label_confusion", c.distractor_label_confusion);
  read_opt(j, "emit_edges", c.emit_edges);
  read_opt(j, "edge_segments", c.edge_segments);
  read_opt(j, "edge_noise", c.edge_noise);
  c.validate();
  return c;
}

inline const std::set<std::string>& train_schedule_keys() {
  static const std::set<std::string> keys{
      "schedule",     "stage_tree_counts", "initial_negatives", "hard_negatives_per_stage",
      "max_depth",    "leaf_epsilon",      "positive_iou",      "negative_iou",
      "prior_weight", "max_thresholds",    "train_top_k"};
  return keys;
}

// Schedule keys only; "schedule" picks the base before overrides apply.
inline TrainConfig train_schedule_from_json(const Json& j) {
  const std::string schedule = j.value("schedule", std::string("basic"));
  TrainConfig c;
  if (schedule == "basic")
    c = TrainConfig::sam_basic();
  else if (schedule == "full")
    c = TrainConfig::sam_full();
  else
    throw Error(ErrorCode::kInvalidConfig, "schedule must be 'basic' or 'full'");
  using detail::read_opt;
  read_opt(j, "stage_tree_counts", c.stage_tree_counts);
  read_opt(j, "initial_negatives", c.initial_negatives);
  read_opt(j, "hard_negatives_per_stage", c.hard_negatives_per_stage);
  read_opt(j, "max_depth", c.max_depth);
  read_opt(j, "leaf_epsilon", c.leaf_epsilon);
  read_opt(j, "positive_iou", c.positive_iou);
  read_opt(j, "negative_iou", c.negative_iou);
  read_opt(j, "prior_weight", c.prior_weight);
  read_opt(j, "max_thresholds", c.max_thresholds);
  read_opt(j, "train_top_k", c.train_top_k);
  c.validate();
  return c;
}

inline PcaOptions pca_options_from_json(const Json& j) {
  detail::check_keys(j, {"identity", "max_samples"}, "pca");
  PcaOptions p;
  detail::read_opt(j, "identity", p.identity);
  detail::read_opt(j, "max_samples", p.max_samples);
  if (p.max_samples == 0) throw Error(ErrorCode::kInvalidConfig, "pca.max_samples must be positive");
  return p;
}

inline HeightRange height_range_from_json(const Json& j) {
  detail::check_keys(j, {"min", "max"}, "heights");
  HeightRange h;
  detail::read_opt(j, "min", h.min);
  detail::read_bound(j, "max", h.max);
  if (!(h.min >= 0.0 && h.min < h.max)) throw Error(ErrorCode::kInvalidConfig, "empty height range");
  return h;
}

inline PoolGrid grid_from_json(const Json& j) {
  detail::check_keys(j, {"m", "n"}, "grid");
  PoolGrid g;
  detail::read_opt(j, "m", g.m);
  detail::read_opt(j, "n", g.n);
  g.validate();
  return g;
}

inline EvalProtocol protocol_from_json(const Json& j) {
  detail::check_keys(j,
                     {"iou_threshold", "height_min", "height_max", "occlusion_max", "use_region",
                      "region", "num_points"},
                     "protocol");
  EvalProtocol p;
  using detail::read_opt;
  read_opt(j, "iou_threshold", p.iou_threshold);
  read_opt(j, "height_min", p.height_min);
  detail::read_bound(j, "height_max", p.height_max);
  read_opt(j, "occlusion_max", p.occlusion_max);
  read_opt(j, "use_region", p.use_region);
  if (j.contains("region")) {
    const Json& r = j.at("region");
    detail::check_keys(r, {"xmin", "xmax", "ymin", "ymax"}, "protocol.region");
    read_opt(r, "xmin", p.region.xmin);
    read_opt(r, "xmax", p.region.xmax);
    read_opt(r, "ymin", p.region.ymin);
    read_opt(r, "ymax", p.region.ymax);
  }
  read_opt(j, "num_points", p.num_points);
  p.validate();
  return p;
}

inline ApInterpolation ap_mode_from_json(const Json& j) {
  const int points = j.value("ap_points", 11);
  if (points == 11) return ApInterpolation::kElevenPoint;
  if (points == 40) return ApInterpolation::kFortyPoint;
  throw Error(ErrorCode::kInvalidConfig, "ap_points must be 11 or 40");
}

struct TrainSection {
  std::filesystem::path dataset;
  TrainConfig train;
  RoutingTable routing = default_routing_table();
  ChannelConfig channels;
  PcaOptions pca;
  HeightRange heights;
  std::size_t top_k = 100;
  double nms_threshold = 0.5;
};

struct DetectSection {
  std::filesystem::path model;
  std::filesystem::path dataset;
};

struct EvalSection {
  std::filesystem::path detections;
  std::filesystem::path annotations;
  EvalProtocol protocol;
  ApInterpolation ap_mode = ApInterpolation::kElevenPoint;
};

struct SweepSection {
  std::filesystem::path train_dataset;
  std::filesystem::path test_dataset;
  SweepConfig sweep;
};

struct PlotCurve {
  std::filesystem::path path;
  std::string label;
};

struct PlotSection {
  std::vector<PlotCurve> curves;
  std::string title;
};

struct RunConfig {
  std::filesystem::path base_dir;  // directory of the config file
  std::string text;                // raw bytes, hashed into manifests
  std::optional<std::uint64_t> seed;
  Json root;

  bool has(const std::string& section) const { return root.contains(section); }
  const Json& section(const std::string& name) const {
    if (!root.contains(name))
      throw Error(ErrorCode::kInvalidConfig, "config has no '" + name + "' section");
    return root.at(name);
  }
  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
  std::filesystem::path path_at(const Json& j, const char* key, const std::string& where) const {
    if (!j.contains(key))
      throw Error(ErrorCode::kInvalidConfig, where + "." + key + " is required");
    return resolve(j.at(key).get<std::string>());
  }

  TrainSection train() const {
    const Json& j = section("train");
    auto allowed = train_schedule_keys();
    allowed.insert({"dataset", "routing", "channels", "pca", "heights", "detect"});
    detail::check_keys(j, allowed, "train");
    TrainSection t;
    t.dataset = path_at(j, "dataset", "train");
    t.train = train_schedule_from_json(j);
    if (j.contains("routing")) t.routing = routing_from_json(j.at("routing"));
    t.routing.validate();
    if (j.contains("channels")) t.channels = channels_from_json(j.at("channels"));
    if (j.contains("pca")) t.pca = pca_options_from_json(j.at("pca"));
    if (j.contains("heights")) t.heights = height_range_from_json(j.at("heights"));
    if (j.contains("detect")) {
      const Json& d = j.at("detect");
      detail::check_keys(d, {"top_k", "nms_threshold"}, "train.detect");
      detail::read_opt(d, "top_k", t.top_k);
      detail::read_opt(d, "nms_threshold", t.nms_threshold);
    }
    return t;
  }

  DetectSection detect() const {
    const Json& j = section("detect");
    detail::check_keys(j, {"model", "dataset"}, "detect");
    return {path_at(j, "model", "detect"), path_at(j, "dataset", "detect")};
  }

  EvalSection eval() const {
    const Json& j = section("eval");
    detail::check_keys(j, {"detections", "annotations", "protocol", "ap_points"}, "eval");
    EvalSection e;
    e.detections = path_at(j, "detections", "eval");
    e.annotations = path_at(j, "annotations", "eval");
    if (j.contains("protocol")) e.protocol = protocol_from_json(j.at("protocol"));
    e.ap_mode = ap_mode_from_json(j);
    return e;
  }

  SweepSection sweep() const {
    const Json& j = section("sweep");
    detail::check_keys(j,
                       {"train_dataset", "test_dataset", "combinations", "subsets", "grid",
                        "train", "channels", "protocol", "pca"},
                       "sweep");
    SweepSection s;
    s.train_dataset = path_at(j, "train_dataset", "sweep");
    s.test_dataset = path_at(j, "test_dataset", "sweep");
    if (!j.contains("combinations"))
      throw Error(ErrorCode::kInvalidConfig, "sweep.combinations is required");
    s.sweep.combinations = j.at("combinations").get<std::vector<std::vector<std::string>>>();
    if (j.contains("subsets")) {
      s.sweep.subsets.clear();
      for (const auto& sj : j.at("subsets")) {
        detail::check_keys(sj, {"name", "min", "max"}, "sweep.subsets");
        ScaleSubset sub;
        sub.name = sj.at("name").get<std::string>();
        detail::read_opt(sj, "min", sub.heights.min);
        detail::read_bound(sj, "max", sub.heights.max);
        s.sweep.subsets.push_back(std::move(sub));
      }
    }
    if (j.contains("grid")) s.sweep.grid = grid_from_json(j.at("grid"));
    if (j.contains("train")) {
      detail::check_keys(j.at("train"), train_schedule_keys(), "sweep.train");
      s.sweep.train = train_schedule_from_json(j.at("train"));
    }
    if (j.contains("channels")) s.sweep.channels = channels_from_json(j.at("channels"));
    if (j.contains("protocol")) s.sweep.protocol = protocol_from_json(j.at("protocol"));
    if (j.contains("pca")) s.sweep.pca = pca_options_from_json(j.at("pca"));
    return s;
  }

  PlotSection plot() const {
    const Json& j = section("plot");
    detail::check_keys(j, {"curves", "title"}, "plot");
    PlotSection p;
    p.title = j.value("title", std::string());
    if (j.contains("curves"))
      for (const auto& cj : j.at("curves")) {
        detail::check_keys(cj, {"path", "label"}, "plot.curves");
        PlotCurve c;
        c.path = path_at(cj, "path", "plot.curves");
        c.label = cj.value("label", c.path.stem().string());
        p.curves.push_back(std::move(c));
      }
    return p;
  }
};

inline RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  c.text = text;
  try {
    c.root = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
  detail::check_keys(c.root, {"seed", "synth", "train", "detect", "eval", "sweep", "plot"},
                     "config");
  if (c.root.contains("seed")) c.seed = c.root.at("seed").get<std::uint64_t>();
  return c;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
  const std::string text = detail::read_text(path);
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return parse_run_config(text, base);
}

}  // namespace samhead
