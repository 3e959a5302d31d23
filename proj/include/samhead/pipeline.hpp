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
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "samhead/bootstrap.hpp"
#include "samhead/dataset.hpp"
#include "samhead/error.hpp"
#include "samhead/evaluation.hpp"
#include "samhead/forest.hpp"
#include "samhead/geometry.hpp"
#include "samhead/model_io.hpp"
#include "samhead/parallel.hpp"
#include "samhead/pca.hpp"
#include "samhead/random.hpp"
#include "samhead/routing.hpp"

namespace samhead {

// --- Detection --------------------------------------------------------------

// Indices of the `k` highest-scoring candidates, best first.
inline std::vector<std::size_t> top_candidates(const std::vector<Candidate>& cands, std::size_t k) {
  auto order = order_by_descending(cands, [](const Candidate& c) { return c.score; });
  if (order.size() > k) order.resize(k);
  return order;
}

// Forest margin of one candidate.
inline double score_candidate(const DetectorModel& model, const ImageRecord& record,
                              const Candidate& cand) {
  const Descriptor d =
      assemble_descriptor(record, cand, model.routing, model.projectors, model.channels);
  return forest_score(model.forest, d.values, score_to_prior(cand.score));
}

inline std::vector<Detection> detect_image(const DetectorModel& model, const ImageRecord& record,
                                           const std::vector<Candidate>& proposals) {
  std::vector<Detection> scored;
  for (std::size_t idx : top_candidates(proposals, model.top_k))
    scored.emplace_back(proposals[idx].box, score_candidate(model, record, proposals[idx]));
  return nms(scored, model.nms_threshold);
}

inline PerImage<Detection> detect_dataset(const DetectorModel& model, const Dataset& ds,
                                          unsigned threads = 1) {
  std::vector<std::vector<Detection>> out(ds.images.size());
  parallel_for(ds.images.size(), threads, [&](std::size_t i) {
    const ImageRecord& rec = ds.images[i];
    out[i] = detect_image(model, rec, ds.candidates(rec.image_id));
  });
  PerImage<Detection> dets;
  for (std::size_t i = 0; i < ds.images.size(); ++i)
    dets[ds.images[i].image_id] = std::move(out[i]);
  return dets;
}

// --- Training samples -------------------------------------------------------

// Heights of ground truth that count as positives.
struct HeightRange {
  double min = 0.0;
  double max = std::numeric_limits<double>::infinity();
  bool contains(double h) const { return h >= min && h < max; }
};

struct LabeledCandidate {
  std::size_t image = 0;
  std::size_t index = 0;  // into the image's proposal list
  int label = 0;          // +1 / -1
};

struct CandidateLabels {
  std::vector<LabeledCandidate> positives;
  std::vector<LabeledCandidate> negatives;
  std::size_t considered = 0;
  std::size_t ignored = 0;
};

// Top-k proposals per image: IoU >= positive_iou with a non-ignored ground
// truth inside `heights` is positive; IoU < negative_iou with every ground
// truth is negative; anything else is left out.
inline CandidateLabels label_candidates(const Dataset& ds, const TrainConfig& cfg,
                                        const HeightRange& heights = {}) {
  CandidateLabels out;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const std::string& id = ds.images[i].image_id;
    const auto& cands = ds.candidates(id);
    const auto& gts = ds.gts(id);
    for (std::size_t idx : top_candidates(cands, cfg.train_top_k)) {
      ++out.considered;
      double any = 0.0, pos = 0.0;
      for (const auto& g : gts) {
        const double o = iou(cands[idx].box, g.box);
        any = std::max(any, o);
        if (!g.ignore && heights.contains(g.box.h())) pos = std::max(pos, o);
      }
      if (pos >= cfg.positive_iou)
        out.positives.push_back({i, idx, 1});
      else if (any < cfg.negative_iou)
        out.negatives.push_back({i, idx, -1});
      else
        ++out.ignored;
    }
  }
  return out;
}

// --- PCA fitting ------------------------------------------------------------

struct PcaOptions {
  bool identity = false;              // skip fitting; requires D == target_dim
  std::size_t max_samples = 100000;   // cell vectors per bin
};

// Per-bin projectors fitted on cell vectors of positive and background
// candidates routed to the bin, mixed 50/50.
inline std::vector<PcaProjector> fit_projectors(const Dataset& ds, const CandidateLabels& labels,
                                                const RoutingTable& table, const PcaOptions& opt,
                                                std::uint64_t seed) {
  table.validate();
  const std::size_t cells = table.grid.cells();
  std::vector<PcaProjector> out;
  for (std::size_t b = 0; b < table.bins.size(); ++b) {
    const ScaleBin& bin = table.bins[b];
    const ImageRecord& first = ds.images.at(0);
    std::size_t dim = 0;
    for (const auto& name : bin.layers) dim += first.layer(name).channels();
    if (dim < table.target_dim)
      throw Error(ErrorCode::kDimensionMismatch,
                  "bin " + std::to_string(b) + " has " + std::to_string(dim) +
                      " channels per cell, fewer than target_dim " +
                      std::to_string(table.target_dim));
    if (opt.identity) {
      out.push_back(identity_projector(dim, table.target_dim));
      continue;
    }
    auto in_bin = [&](const std::vector<LabeledCandidate>& src) {
      std::vector<LabeledCandidate> r;
      for (const auto& lc : src) {
        const auto& c = ds.candidates(ds.images[lc.image].image_id)[lc.index];
        if (route(table, c) == b) r.push_back(lc);
      }
      return r;
    };
    std::vector<LabeledCandidate> pos = in_bin(labels.positives);
    std::vector<LabeledCandidate> neg = in_bin(labels.negatives);
    Rng rng(derive_seed(seed, 0x706361 + b));
    rng.shuffle(pos);
    rng.shuffle(neg);
    const std::size_t half = std::max<std::size_t>(1, opt.max_samples / 2 / cells);
    std::size_t take_pos = std::min(pos.size(), half);
    std::size_t take_neg = std::min(neg.size(), half);
    if (take_pos > 0 && take_neg > 0) take_pos = take_neg = std::min(take_pos, take_neg);
    else if (take_pos == 0) take_neg = std::min(neg.size(), 2 * half);
    else take_pos = std::min(pos.size(), 2 * half);
    pos.resize(take_pos);
    neg.resize(take_neg);
    std::vector<LabeledCandidate> chosen = pos;
    chosen.insert(chosen.end(), neg.begin(), neg.end());
    if (chosen.empty())
      throw Error(ErrorCode::kInsufficientSamples,
                  "no training candidates routed to bin " + std::to_string(b));
    std::vector<double> samples;
    samples.reserve(chosen.size() * cells * dim);
    for (const auto& lc : chosen) {
      const ImageRecord& rec = ds.images[lc.image];
      const auto& c = ds.candidates(rec.image_id)[lc.index];
      const auto v = pooled_cell_vectors(rec, c.box, bin.layers, table.grid);
      samples.insert(samples.end(), v.begin(), v.end());
    }
    PcaProjector p = pca_fit(samples, dim, PcaTarget::dimension(table.target_dim));
    if (p.output_dim != table.target_dim)
      throw Error(ErrorCode::kInsufficientSamples,
                  "bin " + std::to_string(b) + " samples have rank " +
                      std::to_string(p.output_dim) + " < target_dim");
    out.push_back(std::move(p));
  }
  return out;
}

// --- Descriptor pools -------------------------------------------------------

struct SamplePool {
  TrainingSet positives;
  NegativePool negatives;
};

inline SamplePool build_sample_pool(const Dataset& ds, const CandidateLabels& labels,
                                    const DetectorModel& model, unsigned threads = 1) {
  const std::size_t len = model.descriptor_length();
  auto describe = [&](const std::vector<LabeledCandidate>& src) {
    std::vector<float> feats(src.size() * len);
    parallel_for(src.size(), threads, [&](std::size_t k) {
      const ImageRecord& rec = ds.images[src[k].image];
      const auto& c = ds.candidates(rec.image_id)[src[k].index];
      const Descriptor d =
          assemble_descriptor(rec, c, model.routing, model.projectors, model.channels);
      std::copy(d.values.begin(), d.values.end(), feats.begin() + static_cast<std::ptrdiff_t>(k * len));
    });
    return feats;
  };
  SamplePool pool;
  pool.positives.dim = len;
  pool.negatives.dim = len;
  const auto pf = describe(labels.positives);
  for (std::size_t k = 0; k < labels.positives.size(); ++k) {
    const auto& lc = labels.positives[k];
    const auto& c = ds.candidates(ds.images[lc.image].image_id)[lc.index];
    pool.positives.add(std::span<const float>(pf).subspan(k * len, len), 1,
                       score_to_prior(c.score));
  }
  const auto nf = describe(labels.negatives);
  for (std::size_t k = 0; k < labels.negatives.size(); ++k) {
    const auto& lc = labels.negatives[k];
    const std::string& id = ds.images[lc.image].image_id;
    const auto& c = ds.candidates(id)[lc.index];
    pool.negatives.add(std::span<const float>(nf).subspan(k * len, len), score_to_prior(c.score),
                       SampleKey::of(id, c.box));
  }
  return pool;
}

// Dataset-level mining: background proposals (IoU < negative_iou with all
// ground truth among each image's top-k) ranked by the model; global top-K.
inline std::vector<std::pair<std::string, Detection>> mine_hard_negatives(
    const DetectorModel& model, const Dataset& ds, std::size_t k, double negative_iou,
    std::size_t top_k = 1000, unsigned threads = 1) {
  if (!(negative_iou >= 0.0 && negative_iou < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "negative_iou must lie in [0,1)");
  TrainConfig cfg;
  cfg.negative_iou = negative_iou;
  cfg.positive_iou = 1.0;
  cfg.train_top_k = top_k;
  CandidateLabels labels = label_candidates(ds, cfg);
  labels.positives.clear();
  const SamplePool pool = build_sample_pool(ds, labels, model, threads);
  std::set<SampleKey> taken;
  std::vector<std::pair<std::string, Detection>> out;
  for (std::size_t i : mine_hard_negatives(model.forest, pool.negatives, k, taken, threads)) {
    const auto& lc = labels.negatives[i];
    const std::string& id = ds.images[lc.image].image_id;
    const auto& c = ds.candidates(id)[lc.index];
    out.emplace_back(id, Detection(c.box, forest_score(model.forest, pool.negatives.row(i),
                                                       pool.negatives.priors[i])));
  }
  return out;
}

// --- Training run -----------------------------------------------------------

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> datasets;
  std::size_t train_top_k = 0;
  std::size_t detect_top_k = 0;
  std::size_t considered = 0;
  std::size_t positives = 0;
  std::size_t negative_pool = 0;
  std::vector<std::size_t> positives_per_bin;
  std::vector<double> projector_energy;
  std::vector<StageRecord> stages;
  nlohmann::ordered_json metrics;  // null until evaluated
};

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["datasets"] = m.datasets;
  j["caps"] = {{"train_top_k", m.train_top_k}, {"detect_top_k", m.detect_top_k}};
  j["samples"] = {{"considered", m.considered},
                  {"positives", m.positives},
                  {"negative_pool", m.negative_pool},
                  {"positives_per_bin", m.positives_per_bin}};
  j["projector_energy"] = m.projector_energy;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : m.stages) j["stages"].push_back(stage_to_json(s));
  j["metrics"] = m.metrics;
  return j.dump(2) + "\n";
}

struct TrainResult {
  DetectorModel model;
  RunManifest manifest;
  BootstrapLog log;
};

inline TrainResult train_detector(const Dataset& ds, const TrainConfig& cfg,
                                  const RoutingTable& routing, const ChannelConfig& channels,
                                  const PcaOptions& pca = {}, const HeightRange& heights = {}) {
  cfg.validate();
  routing.validate();
  if (ds.images.empty()) throw Error(ErrorCode::kInsufficientSamples, "dataset has no images");
  TrainResult r;
  const CandidateLabels labels = label_candidates(ds, cfg, heights);
  if (labels.positives.empty())
    throw Error(ErrorCode::kNoPositives, "no proposal reaches the positive IoU threshold");

  r.model.routing = routing;
  r.model.channels = channels;
  r.model.projectors = fit_projectors(ds, labels, routing, pca, cfg.seed);
  const SamplePool pool = build_sample_pool(ds, labels, r.model, cfg.threads);
  r.model.forest = bootstrap_train(pool.positives, pool.negatives, cfg, &r.log);
  r.model.validate();

  RunManifest& m = r.manifest;
  m.seed = cfg.seed;
  m.train_top_k = cfg.train_top_k;
  m.detect_top_k = r.model.top_k;
  m.considered = labels.considered;
  m.positives = labels.positives.size();
  m.negative_pool = labels.negatives.size();
  m.positives_per_bin.assign(routing.bins.size(), 0);
  for (const auto& lc : labels.positives)
    ++m.positives_per_bin[route(routing, ds.candidates(ds.images[lc.image].image_id)[lc.index])];
  for (const auto& p : r.model.projectors) m.projector_energy.push_back(p.energy);
  m.stages = r.model.forest.stage_history;
  return r;
}

// --- Ablation sweep ---------------------------------------------------------

struct ScaleSubset {
  std::string name;
  HeightRange heights;
};

inline std::vector<ScaleSubset> default_scale_subsets() {
  return {{"small", {50.0, 80.0}}, {"large", {80.0, std::numeric_limits<double>::infinity()}}};
}

struct SweepCell {
  std::string combination;
  std::string subset;
  double mr2 = 1.0;
  double mr4 = 1.0;
};

inline std::string combination_name(const std::vector<std::string>& layers) {
  std::string s;
  for (const auto& l : layers) s += (s.empty() ? "" : "+") + l;
  return s;
}

struct SweepConfig {
  std::vector<std::vector<std::string>> combinations;
  std::vector<ScaleSubset> subsets = default_scale_subsets();
  TrainConfig train = TrainConfig::sam_basic();
  PoolGrid grid;
  ChannelConfig channels;
  EvalProtocol protocol;
  PcaOptions pca;
};

// Evaluation protocol restricted to one scale subset.
inline EvalProtocol subset_protocol(EvalProtocol p, const ScaleSubset& s) {
  p.height_min = std::max(p.height_min, s.heights.min);
  p.height_max = std::min(p.height_max, s.heights.max);
  return p;
}

// One train + evaluate per (combination, subset). Every cell is a single-bin
// detector whose PCA keeps the full per-cell dimension.
inline std::vector<SweepCell> ablation_sweep(const Dataset& train, const Dataset& test,
                                             const SweepConfig& cfg) {
  if (train.images.empty()) throw Error(ErrorCode::kInsufficientSamples, "empty training set");
  std::vector<SweepCell> out;
  std::size_t cell_index = 0;
  for (const auto& combo : cfg.combinations) {
    if (combo.empty()) throw Error(ErrorCode::kInvalidConfig, "empty layer combination");
    std::size_t dim = 0;
    for (const auto& name : combo) dim += train.images.front().layer(name).channels();
    for (const auto& subset : cfg.subsets) {
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(cfg.train.seed, cell_index++);
      const RoutingTable table = single_bin_table(combo, cfg.grid, dim);
      const TrainResult r = train_detector(train, tc, table, cfg.channels, cfg.pca, subset.heights);
      const auto dets = detect_dataset(r.model, test, tc.threads);
      const EvalSummary s = evaluate(dets, test.annotations, subset_protocol(cfg.protocol, subset));
      out.push_back({combination_name(combo), subset.name, s.mr2, s.mr4});
    }
  }
  return out;
}

// Rows are combinations, columns subsets; values MR-4.
inline std::string sweep_to_csv(const std::vector<SweepCell>& cells,
                                const std::vector<ScaleSubset>& subsets) {
  std::string out = "combination";
  for (const auto& s : subsets) out += "," + s.name;
  out += "\n";
  for (std::size_t i = 0; i < cells.size(); i += subsets.size()) {
    out += cells[i].combination;
    for (std::size_t k = 0; k < subsets.size() && i + k < cells.size(); ++k)
      out += "," + format_double(cells[i + k].mr4);
    out += "\n";
  }
  return out;
}

}  // namespace samhead
