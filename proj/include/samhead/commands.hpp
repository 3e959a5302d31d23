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

// Subcommand bodies behind the samhead CLI. Each reads its config section
// and writes fixed file names into the output directory:
//
//   synth   dataset.json, annotations.jsonl, proposals.jsonl, maps/
//   train   model.json, manifest.json
//   detect  detections.csv
//   eval    metrics.json, curve_fppi.csv, curve_pr.csv
//   sweep   sweep.csv
//   plot    plot.svg

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "samhead/config.hpp"
#include "samhead/dataset.hpp"
#include "samhead/error.hpp"
#include "samhead/evaluation.hpp"
#include "samhead/io.hpp"
#include "samhead/model_io.hpp"
#include "samhead/parallel.hpp"
#include "samhead/pipeline.hpp"
#include "samhead/plot.hpp"
#include "samhead/synth.hpp"

namespace samhead {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidConfig:
      return kExitUsage;
    case ErrorCode::kInternal:
      return kExitInternal;
    default:
      return kExitData;
  }
}

// One-line machine-readable failure report.
inline std::string error_line(std::string_view code, const std::string& message, int exit_code) {
  nlohmann::ordered_json j;
  j["error"] = code;
  j["message"] = message;
  j["exit_code"] = exit_code;
  return j.dump();
}

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  int verbosity = 1;  // 0 quiet, 1 normal, 2 verbose
  std::ostream* log = &std::cerr;
};

namespace detail {

inline void say(const CommandOptions& opt, int level, const std::string& msg) {
  if (opt.log && opt.verbosity >= level) *opt.log << "samhead: " << msg << "\n";
}

inline std::uint64_t pick_seed(const RunConfig& cfg, const CommandOptions& opt) {
  if (opt.seed) return *opt.seed;
  return cfg.seed.value_or(0);
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace detail

inline void cmd_synth(const RunConfig& cfg, const CommandOptions& opt) {
  const SynthConfig sc = synth_config_from_json(cfg.section("synth"));
  const std::uint64_t seed = detail::pick_seed(cfg, opt);
  detail::say(opt, 1, "synth: " + std::to_string(sc.image_count) + " images, seed " +
                          std::to_string(seed));
  const Dataset ds = synth_generate(sc, seed);
  detail::ensure_dir(opt.out_dir);
  write_dataset(opt.out_dir, ds);
}

inline TrainResult cmd_train(const RunConfig& cfg, const CommandOptions& opt) {
  TrainSection t = cfg.train();
  t.train.seed = detail::pick_seed(cfg, opt);
  t.train.threads = opt.threads;
  detail::say(opt, 1, "train: reading " + t.dataset.string());
  const Dataset ds = read_dataset(t.dataset);
  detail::say(opt, 1, "train: " + std::to_string(ds.images.size()) + " images, " +
                          std::to_string(t.train.stage_tree_counts.size()) + " stages");
  TrainResult r = train_detector(ds, t.train, t.routing, t.channels, t.pca, t.heights);
  r.model.top_k = t.top_k;
  r.model.nms_threshold = t.nms_threshold;
  r.model.validate();
  r.manifest.detect_top_k = t.top_k;
  r.manifest.config_hash = fnv1a_hex(cfg.text);
  r.manifest.datasets = {cfg.section("train").at("dataset").get<std::string>()};
  for (const auto& s : r.manifest.stages)
    detail::say(opt, 2, "train: stage " + std::to_string(s.stage) + " trees " +
                            std::to_string(s.trees) + " negatives " +
                            std::to_string(s.negatives) + " loss " + format_double(s.final_loss));
  detail::ensure_dir(opt.out_dir);
  write_model(opt.out_dir / "model.json", r.model);
  detail::write_text(opt.out_dir / "manifest.json", manifest_json(r.manifest));
  return r;
}

inline PerImage<Detection> cmd_detect(const RunConfig& cfg, const CommandOptions& opt) {
  const DetectSection d = cfg.detect();
  const DetectorModel model = read_model(d.model);
  const Dataset ds = read_dataset(d.dataset);
  detail::say(opt, 1, "detect: " + std::to_string(ds.images.size()) + " images");
  const PerImage<Detection> dets = detect_dataset(model, ds, opt.threads);
  detail::ensure_dir(opt.out_dir);
  write_detections(opt.out_dir / "detections.csv", dets);
  return dets;
}

inline EvalSummary cmd_eval(const RunConfig& cfg, const CommandOptions& opt) {
  const EvalSection e = cfg.eval();
  const PerImage<Detection> dets = read_detections(e.detections);
  const PerImage<GroundTruthBox> gts = read_annotations(e.annotations);
  const EvalSummary s = evaluate(dets, gts, e.protocol, e.ap_mode);
  detail::say(opt, 1, "eval: MR-2 " + format_double(s.mr2) + ", MR-4 " + format_double(s.mr4));
  detail::ensure_dir(opt.out_dir);
  detail::write_text(opt.out_dir / "metrics.json", metrics_json(s));
  detail::write_text(opt.out_dir / "curve_fppi.csv", fppi_curve_to_csv(s.curve));
  detail::write_text(opt.out_dir / "curve_pr.csv", pr_curve_to_csv(s.pr_moderate));
  return s;
}

inline std::vector<SweepCell> cmd_sweep(const RunConfig& cfg, const CommandOptions& opt) {
  SweepSection s = cfg.sweep();
  s.sweep.train.seed = detail::pick_seed(cfg, opt);
  s.sweep.train.threads = opt.threads;
  const Dataset train = read_dataset(s.train_dataset);
  const Dataset test = read_dataset(s.test_dataset);
  detail::say(opt, 1, "sweep: " + std::to_string(s.sweep.combinations.size()) +
                          " combinations x " + std::to_string(s.sweep.subsets.size()) +
                          " subsets");
  const auto cells = ablation_sweep(train, test, s.sweep);
  for (const auto& c : cells)
    detail::say(opt, 2, "sweep: " + c.combination + " / " + c.subset + " MR-4 " +
                            format_double(c.mr4));
  detail::ensure_dir(opt.out_dir);
  detail::write_text(opt.out_dir / "sweep.csv", sweep_to_csv(cells, s.sweep.subsets));
  return cells;
}

// Curve kind from a CSV header line.
inline PlotKind curve_kind(const std::string& text) {
  const std::string header = text.substr(0, text.find('\n'));
  if (header.rfind("threshold,fppi,miss_rate", 0) == 0) return PlotKind::kFppi;
  if (header.rfind("recall,precision", 0) == 0) return PlotKind::kPrecisionRecall;
  throw Error(ErrorCode::kParse, "unrecognised curve header '" + header + "'");
}

inline std::string cmd_plot(const RunConfig& cfg, const CommandOptions& opt) {
  const PlotSection p = cfg.plot();
  std::vector<PlotSeries> series;
  std::optional<PlotKind> kind;
  for (const auto& c : p.curves) {
    const std::string text = detail::read_text(c.path);
    const PlotKind k = curve_kind(text);
    if (kind && *kind != k)
      throw Error(ErrorCode::kInvalidConfig, "plot mixes FPPI and precision/recall curves");
    kind = k;
    PlotSeries s;
    s.label = c.label;
    if (k == PlotKind::kFppi)
      s.fppi = fppi_curve_from_csv(text);
    else
      s.pr = pr_curve_from_csv(text);
    series.push_back(std::move(s));
  }
  const std::string svg = render_svg(kind.value_or(PlotKind::kFppi), series, p.title);
  detail::ensure_dir(opt.out_dir);
  detail::write_text(opt.out_dir / "plot.svg", svg);
  detail::say(opt, 1, "plot: " + std::to_string(series.size()) + " curves");
  return svg;
}

}  // namespace samhead
