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

// Multi-stage training with hard negative mining. Stage 0 trains on every
// positive plus a seeded random draw of background samples; each later stage
// adds the previous forest's highest-scoring unused negatives and retrains
// the whole forest from scratch with that stage's tree count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "samhead/error.hpp"
#include "samhead/forest.hpp"
#include "samhead/geometry.hpp"
#include "samhead/parallel.hpp"
#include "samhead/random.hpp"

namespace samhead {

inline constexpr double kPriorClamp = 10.0;

// Proposal confidence as a clamped log-odds.
inline double score_to_prior(double score) {
  const double s = std::clamp(score, 0.0, 1.0);
  if (s <= 0.0) return -kPriorClamp;
  if (s >= 1.0) return kPriorClamp;
  return std::clamp(std::log(s / (1.0 - s)), -kPriorClamp, kPriorClamp);
}

struct TrainConfig {
  std::vector<std::size_t> stage_tree_counts{64, 128, 256, 512, 1024, 2048};
  std::size_t initial_negatives = 30000;
  std::size_t hard_negatives_per_stage = 5000;
  std::size_t max_depth = 5;
  double leaf_epsilon = 0.0;  // <= 0 selects 1 / (2 N)
  double positive_iou = 0.5;
  double negative_iou = 0.3;
  double prior_weight = 1.0;
  std::size_t max_thresholds = kMaxThresholds;
  std::size_t train_top_k = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  static TrainConfig sam_full() { return TrainConfig{}; }

  static TrainConfig sam_basic() {
    TrainConfig c;
    c.stage_tree_counts = {32, 64, 128, 256, 512};
    c.initial_negatives = 10000;
    c.hard_negatives_per_stage = 1000;
    return c;
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
    if (stage_tree_counts.empty()) bad("stage_tree_counts must be non-empty");
    for (std::size_t i = 0; i < stage_tree_counts.size(); ++i) {
      if (stage_tree_counts[i] == 0) bad("stage tree counts must be positive");
      if (i > 0 && stage_tree_counts[i] < stage_tree_counts[i - 1])
        bad("stage tree counts must be non-decreasing");
    }
    if (initial_negatives == 0) bad("initial_negatives must be positive");
    if (max_depth == 0) bad("max_depth must be positive");
    if (!(negative_iou >= 0.0 && negative_iou < positive_iou && positive_iou <= 1.0))
      bad("need 0 <= negative_iou < positive_iou <= 1");
    if (!(prior_weight >= 0.0)) bad("prior_weight must be >= 0");
    if (max_thresholds == 0 || max_thresholds > kMaxThresholds)
      bad("max_thresholds must lie in [1, 255]");
    if (train_top_k == 0) bad("train_top_k must be positive");
  }

  BoostParams boost_params() const {
    return BoostParams{max_depth, leaf_epsilon, prior_weight, max_thresholds, threads};
  }
};

// Identity of a background window for de-duplication.
struct SampleKey {
  std::string image_id;
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;

  static SampleKey of(const std::string& id, const Box& b) { return {id, b.x(), b.y(), b.w(), b.h()}; }
  auto tie() const { return std::tie(image_id, x, y, w, h); }
  bool operator<(const SampleKey& o) const { return tie() < o.tie(); }
  bool operator==(const SampleKey& o) const { return tie() == o.tie(); }
};

// Candidate negatives with cached descriptors.
struct NegativePool {
  std::size_t dim = 0;
  std::vector<float> features;
  std::vector<double> priors;
  std::vector<SampleKey> keys;

  std::size_t size() const { return keys.size(); }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(features).subspan(i * dim, dim);
  }
  void add(std::span<const float> x, double prior, SampleKey key) {
    if (dim == 0 && keys.empty()) dim = x.size();
    if (x.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "negative length mismatch");
    features.insert(features.end(), x.begin(), x.end());
    priors.push_back(prior);
    keys.push_back(std::move(key));
  }
};

// Global top-K pool entries by forest score whose key is not in `taken`,
// one entry per key. Ties keep pool order. Adds the chosen keys to `taken`.
inline std::vector<std::size_t> mine_hard_negatives(const Forest& forest, const NegativePool& pool,
                                                    std::size_t k, std::set<SampleKey>& taken,
                                                    unsigned threads = 1) {
  if (k == 0 || pool.size() == 0) return {};
  std::vector<double> scores(pool.size());
  parallel_for(pool.size(), threads,
               [&](std::size_t i) { scores[i] = forest_score(forest, pool.row(i), pool.priors[i]); });
  const auto order = order_by_descending(scores, [](double s) { return s; });
  std::vector<std::size_t> picked;
  for (std::size_t i : order) {
    if (picked.size() == k) break;
    if (taken.insert(pool.keys[i]).second) picked.push_back(i);
  }
  return picked;
}

// Seeded random draw of up to `k` pool entries with distinct keys not in `taken`.
inline std::vector<std::size_t> sample_negatives(const NegativePool& pool, std::size_t k,
                                                 std::set<SampleKey>& taken, Rng& rng) {
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::size_t> picked;
  for (std::size_t i : order) {
    if (picked.size() == k) break;
    if (taken.insert(pool.keys[i]).second) picked.push_back(i);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

struct BootstrapLog {
  std::vector<BoostTrace> traces;  // one per stage
};

inline Forest bootstrap_train(const TrainingSet& positives, const NegativePool& pool,
                              const TrainConfig& cfg, BootstrapLog* log = nullptr) {
  cfg.validate();
  if (positives.size() == 0) throw Error(ErrorCode::kNoPositives, "no positive samples");
  for (int y : positives.labels)
    if (y != 1) throw Error(ErrorCode::kInvalidArgument, "positive set contains a negative label");
  if (pool.size() == 0) throw Error(ErrorCode::kInsufficientSamples, "no negative samples");
  if (pool.dim != positives.dim)
    throw Error(ErrorCode::kDimensionMismatch, "positive and negative descriptors differ in length");

  Rng rng(derive_seed(cfg.seed, 0x6e6567));
  std::set<SampleKey> taken;
  TrainingSet set = positives;
  const auto add_negatives = [&](const std::vector<std::size_t>& idx) {
    for (std::size_t i : idx) set.add(pool.row(i), -1, pool.priors[i]);
  };
  add_negatives(sample_negatives(pool, cfg.initial_negatives, taken, rng));

  const BoostParams bp = cfg.boost_params();
  Forest forest;
  std::vector<StageRecord> history;
  for (std::size_t stage = 0; stage < cfg.stage_tree_counts.size(); ++stage) {
    std::size_t mined = 0;
    if (stage > 0) {
      const auto hard =
          mine_hard_negatives(forest, pool, cfg.hard_negatives_per_stage, taken, cfg.threads);
      mined = hard.size();
      add_negatives(hard);
    }
    BoostTrace trace;
    forest = realboost_fit(set, cfg.stage_tree_counts[stage], bp, &trace);
    StageRecord rec;
    rec.stage = stage;
    rec.trees = forest.trees.size();
    rec.positives = positives.size();
    rec.negatives = set.size() - positives.size();
    rec.mined = mined;
    rec.margin_clamps = trace.margin_clamps;
    rec.final_loss = trace.loss.back();
    history.push_back(rec);
    if (log) log->traces.push_back(std::move(trace));
  }
  forest.stage_history = std::move(history);
  return forest;
}

}  // namespace samhead
