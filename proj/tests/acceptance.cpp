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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "samhead/commands.hpp"
#include "samhead/pipeline.hpp"
#include "samhead/pooling.hpp"
#include "samhead/random.hpp"
#include "samhead/synth.hpp"

namespace fs = std::filesystem;
using namespace samhead;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct Context {
  fs::path cli;
  fs::path scratch;
  unsigned threads = 1;
};

// --- 1: pooling oracles ------------------------------------------------------

// Cells [lo, hi) of part k out of `parts` over `extent` cells starting at `start`.
std::pair<std::int64_t, std::int64_t> oracle_slot(std::int64_t start, std::int64_t extent,
                                                  std::int64_t k, std::int64_t parts) {
  std::int64_t lo = start + (k * extent) / parts;
  std::int64_t hi = start + ((k + 1) * extent) / parts;
  if (hi == lo) ++hi;
  return {lo, hi};
}

// Feature-cell span covered by [start, start + extent) pixels.
std::pair<std::int64_t, std::int64_t> oracle_span(double start, double extent, double stride,
                                                  std::int64_t limit) {
  std::int64_t lo = 0;
  while (double(lo + 1) * stride <= start) ++lo;
  while (double(lo) * stride > start) --lo;
  std::int64_t hi = lo;
  while (double(hi) * stride < start + extent) ++hi;
  if (hi == lo) ++hi;
  return {std::max<std::int64_t>(lo, 0), std::min(hi, limit)};
}

Outcome criterion_pooling(const Context&) {
  Outcome out;
  Rng rng(1001);
  std::size_t max_checked = 0, hist_checked = 0, bad_max = 0, bad_hist = 0, bad_sum = 0;
  double worst_hist = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int stride = 1 << rng.integer(0, 4);
    const auto h = static_cast<std::uint32_t>(rng.integer(1, 40));
    const auto w = static_cast<std::uint32_t>(rng.integer(1, 40));
    const auto c = static_cast<std::uint32_t>(rng.integer(1, 6));
    FeatureMap fm = FeatureMap::zeros("f", static_cast<std::uint32_t>(stride), c, h, w);
    for (float& v : fm.mutable_data()) v = static_cast<float>(rng.normal());
    const double img_w = double(w) * stride, img_h = double(h) * stride;
    const double bw = rng.uniform(1.0, img_w), bh = rng.uniform(1.0, img_h);
    const Box box(rng.uniform(0.0, img_w - bw), rng.uniform(0.0, img_h - bh), bw, bh);
    const PoolGrid grid{static_cast<std::size_t>(rng.integer(1, 12)),
                        static_cast<std::size_t>(rng.integer(1, 5))};

    const auto [c0, c1] = oracle_span(box.x(), box.w(), stride, w);
    const auto [r0, r1] = oracle_span(box.y(), box.h(), stride, h);
    const FeatureRect rect = map_to_feature_coords(box, stride, h, w);
    if (rect != FeatureRect{c0, c1, r0, r1}) {
      out.require(false, "feature rectangle of trial " + std::to_string(trial));
      continue;
    }
    const auto got = roi_max_pool(fm, rect, grid);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < grid.m; ++i)
        for (std::size_t j = 0; j < grid.n; ++j) {
          const auto [y0, y1] = oracle_slot(r0, r1 - r0, std::int64_t(i), std::int64_t(grid.m));
          const auto [x0, x1] = oracle_slot(c0, c1 - c0, std::int64_t(j), std::int64_t(grid.n));
          float want = -std::numeric_limits<float>::infinity();
          for (auto y = y0; y < y1; ++y)
            for (auto x = x0; x < x1; ++x) want = std::max(want, fm.at(ch, y, x));
          const float v = got[ch * grid.cells() + i * grid.n + j];
          if (std::memcmp(&v, &want, sizeof(float)) != 0) ++bad_max;
          ++max_checked;
        }

    std::vector<std::uint8_t> labels(std::size_t{h} * w);
    const auto classes = rng.integer(1, 21);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.integer(0, classes - 1));
    const LabelMap lm(h, w, labels);
    const auto hist = roi_histogram_pool(lm, rect, grid);
    for (std::size_t i = 0; i < grid.m; ++i)
      for (std::size_t j = 0; j < grid.n; ++j) {
        const auto [y0, y1] = oracle_slot(r0, r1 - r0, std::int64_t(i), std::int64_t(grid.m));
        const auto [x0, x1] = oracle_slot(c0, c1 - c0, std::int64_t(j), std::int64_t(grid.n));
        std::vector<double> count(kNumLabelClasses, 0.0);
        for (auto y = y0; y < y1; ++y)
          for (auto x = x0; x < x1; ++x) count[labels[std::size_t(y) * w + std::size_t(x)]] += 1.0;
        const double n = double((y1 - y0) * (x1 - x0));
        double sum = 0.0;
        for (std::size_t k = 0; k < kNumLabelClasses; ++k) {
          const double v = hist[(i * grid.n + j) * kNumLabelClasses + k];
          const double err = std::abs(v - count[k] / n);
          worst_hist = std::max(worst_hist, err);
          if (!(err <= 1e-12)) ++bad_hist;
          sum += v;
        }
        if (!(std::abs(sum - 1.0) <= 1e-12)) ++bad_sum;
        ++hist_checked;
      }
  }
  out.require(bad_max == 0, std::to_string(bad_max) + " max-pool values differ");
  out.require(bad_hist == 0, std::to_string(bad_hist) + " histogram bins off by > 1e-12");
  out.require(bad_sum == 0, std::to_string(bad_sum) + " histogram cells do not sum to 1");
  out.note(std::to_string(max_checked) + " max values, " + std::to_string(hist_checked) +
           " histogram cells, worst bin error " + fmt("%.1e", worst_hist));
  return out;
}

// --- shared synthetic setups -------------------------------------------------

SynthConfig mixed_scale_synth(std::size_t images) {
  SynthConfig c;
  c.image_count = images;
  c.image_w = 320;
  c.image_h = 240;
  c.layers = {{"conv3", 4, 8, 0.55},
              {"conv4", 8, 16, 0.625},
              {"conv4a", 4, 16, 0.625},
              {"conv5", 16, 16, 1.0},
              {"conv5a", 8, 16, 1.0}};
  c.template_channels = 8;
  c.clutter_per_distractor = 20;
  c.noise_sigma = 0.5;
  return c;
}

TrainConfig short_schedule(unsigned threads) {
  TrainConfig t;
  t.stage_tree_counts = {16, 32, 64};
  t.initial_negatives = 2000;
  t.hard_negatives_per_stage = 500;
  t.max_depth = 3;
  t.threads = threads;
  return t;
}

RoutingTable small_router() {
  RoutingTable t;
  t.bins = {ScaleBin{50, 80, {"conv3", "conv4a"}}, ScaleBin{80, kUnbounded, {"conv4a", "conv5a"}}};
  t.grid = PoolGrid{4, 2};
  t.target_dim = 24;
  return t;
}

EvalProtocol frame_protocol(double w, double h) {
  EvalProtocol p;
  p.region = RegionBounds{5, w - 5, 5, h - 5};
  return p;
}

// --- 2: histogram vs max semantic pooling -----------------------------------

Outcome criterion_semantic(const Context& ctx) {
  Outcome out;
  const SynthConfig sc = mixed_scale_synth(200);
  SynthConfig tc = sc;
  tc.image_count = 400;
  const Dataset train = synth_generate(sc, 31);
  const Dataset test = synth_generate(tc, 32);
  std::map<ChannelPooling, double> mr4;
  for (auto mode : {ChannelPooling::kNone, ChannelPooling::kMax, ChannelPooling::kHistogram}) {
    ChannelConfig ch;
    ch.semantic = mode;
    const TrainResult r = train_detector(train, short_schedule(ctx.threads), small_router(), ch);
    const auto dets = detect_dataset(r.model, test, ctx.threads);
    mr4[mode] = evaluate(dets, test.annotations, frame_protocol(320, 240)).mr4;
    out.note(channel_pooling_name(mode) + " MR-4 " + fmt("%.4f", mr4[mode]));
  }
  out.require(mr4[ChannelPooling::kHistogram] <= mr4[ChannelPooling::kMax],
              "histogram MR-4 exceeds max MR-4");
  return out;
}

// --- 3: PCA properties and 1024 -> 768 reduction ------------------------------

Outcome criterion_pca(const Context& ctx) {
  Outcome out;
  Rng rng(3003);

  // Orthonormality and energy on random correlated data.
  const std::size_t n = 400, dim = 40;
  std::vector<double> x(n * dim);
  std::vector<double> mix(dim * dim);
  for (double& m : mix) m = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z(dim);
    for (std::size_t k = 0; k < dim; ++k) z[k] = rng.normal() / double(k + 1);
    for (std::size_t a = 0; a < dim; ++a) {
      double v = 0.0;
      for (std::size_t b = 0; b < dim; ++b) v += mix[a * dim + b] * z[b];
      x[i * dim + a] = v;
    }
  }
  double worst_orth = 0.0;
  double prev_energy = 0.0;
  bool monotone = true;
  for (std::size_t d = 1; d <= dim; ++d) {
    const PcaProjector p = pca_fit(x, dim, PcaTarget::dimension(d));
    worst_orth = std::max(worst_orth, orthonormality_error(p));
    if (p.energy < prev_energy) monotone = false;
    prev_energy = p.energy;
  }
  out.require(worst_orth < 1e-6, "orthonormality error " + fmt("%.2e", worst_orth));
  out.require(monotone, "energy decreases with d");
  out.require(std::abs(prev_energy - 1.0) < 1e-12, "full-dimension energy is not 1");

  // Rank-1 data: every sample is mean + t * u.
  std::vector<double> u(dim), mean(dim);
  double norm = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    u[k] = rng.normal();
    mean[k] = rng.normal();
    norm += u[k] * u[k];
  }
  for (double& v : u) v /= std::sqrt(norm);
  std::vector<double> line(n * dim);
  std::vector<double> ts(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = rng.normal(0.0, 3.0);
    for (std::size_t k = 0; k < dim; ++k) line[i * dim + k] = mean[k] + ts[i] * u[k];
  }
  const PcaProjector p1 = pca_fit(line, dim, PcaTarget::dimension(1));
  double align = 0.0, recon = 0.0;
  for (std::size_t k = 0; k < dim; ++k) align += p1.basis[k] * u[k];
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = pca_project(p1, std::span<const double>(line).subspan(i * dim, dim));
    for (std::size_t k = 0; k < dim; ++k)
      recon = std::max(recon, std::abs(p1.mean[k] + y[0] * p1.basis[k] - line[i * dim + k]));
  }
  out.require(std::abs(std::abs(align) - 1.0) < 1e-9, "rank-1 direction not recovered");
  out.require(recon < 1e-9, "rank-1 reconstruction error " + fmt("%.2e", recon));
  out.require(std::abs(p1.energy - 1.0) < 1e-9, "rank-1 energy is not 1");

  // Large-bin detectors with and without reduction.
  SynthConfig sc;
  sc.image_count = 150;
  sc.image_w = 160;
  sc.image_h = 240;
  sc.layers = {{"conv4a", 4, 512, 0.625}, {"conv5a", 8, 512, 1.0}};
  sc.small_fraction = 0.0;
  sc.large_max = 200;
  sc.template_channels = 64;
  sc.clutter_per_distractor = 20;
  sc.noise_sigma = 0.2;
  sc.emit_labels = false;
  sc.emit_edges = false;
  TrainConfig tc;
  tc.stage_tree_counts = {8, 16, 32};
  tc.initial_negatives = 1500;
  tc.hard_negatives_per_stage = 300;
  tc.max_depth = 3;
  tc.threads = ctx.threads;
  std::vector<DetectorModel> models;
  {
    const Dataset train = synth_generate(sc, 41);
    for (std::size_t dim_out : {std::size_t{1024}, std::size_t{768}}) {
      RoutingTable rt = single_bin_table({"conv4a", "conv5a"}, PoolGrid{4, 2}, dim_out);
      rt.bins[0].min_height = 80;
      PcaOptions po;
      po.identity = dim_out == 1024;
      models.push_back(
          train_detector(train, tc, rt, {}, po, HeightRange{80, kUnbounded}).model);
    }
  }
  EvalProtocol protocol = frame_protocol(160, 240);
  protocol.height_min = 80;
  std::vector<PerImage<Detection>> dets(models.size());
  PerImage<GroundTruthBox> gts;
  for (std::size_t first = 0; first < 300; first += 50) {
    const Dataset chunk = synth_generate_range(sc, 42, first, 50);
    for (std::size_t m = 0; m < models.size(); ++m)
      for (auto& [id, d] : detect_dataset(models[m], chunk, ctx.threads)) dets[m][id] = std::move(d);
    for (const auto& [id, g] : chunk.annotations) gts[id] = g;
  }
  const double full = evaluate(dets[0], gts, protocol).mr4;
  const double reduced = evaluate(dets[1], gts, protocol).mr4;
  out.note("MR-4 1024 " + fmt("%.4f", full) + ", 768 " + fmt("%.4f", reduced) + ", energy " +
           fmt("%.4f", models[1].projectors[0].energy));
  out.require(std::abs(full - reduced) < 0.01, "1024 -> 768 changes MR-4 by >= 1 point");
  return out;
}

// --- 4: RealBoost on separable 2-D data --------------------------------------

Outcome criterion_boost(const Context&) {
  Outcome out;
  Rng rng(4004);
  TrainingSet set;
  for (std::size_t i = 0; i < 400; ++i) {
    const int y = i % 2 == 0 ? 1 : -1;
    const float v[2] = {static_cast<float>(rng.normal(2.5 * y, 1.0)),
                        static_cast<float>(rng.normal(2.5 * y, 1.0))};
    set.add(v, y, 0.0);
  }
  BoostTrace trace;
  const Forest f = realboost_fit(set, 64, BoostParams{}, &trace);
  out.require(f.trees.size() == 64, "forest does not hold 64 trees");
  bool monotone = true;
  for (std::size_t k = 1; k < trace.loss.size(); ++k)
    if (trace.loss[k] > trace.loss[k - 1]) monotone = false;
  double worst_sum = 0.0;
  for (double w : trace.weight_sums) worst_sum = std::max(worst_sum, std::abs(w - 1.0));
  double loss = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i)
    loss += std::exp(-set.labels[i] * forest_score(f, set.row(i), set.priors[i]));
  loss /= double(set.size());
  out.require(trace.weight_sums.size() >= 64, "weight sum not logged every round");
  out.require(worst_sum < 1e-9, "weight sum off by " + fmt("%.2e", worst_sum));
  out.require(monotone, "loss increased in some round");
  out.require(loss < 0.01, "training loss " + fmt("%.4g", loss));
  out.note("loss after 64 trees " + fmt("%.3e", loss) + ", max |sum w - 1| " +
           fmt("%.1e", worst_sum));
  return out;
}

// --- 5: bootstrapping schedules ---------------------------------------------

Outcome criterion_schedule(const Context& ctx) {
  Outcome out;
  SynthConfig sc;
  sc.image_count = 64;
  sc.image_w = 320;
  sc.image_h = 240;
  sc.layers = {{"conv5", 16, 2, 1.0}};
  sc.template_channels = 2;
  sc.clutter_per_distractor = 700;
  sc.emit_labels = false;
  sc.emit_edges = false;
  const fs::path dir = ctx.scratch / "schedule";
  fs::create_directories(dir);
  write_dataset(dir / "data", synth_generate(sc, 55));

  struct Want {
    const char* name;
    std::vector<std::size_t> trees;
    std::size_t initial, step;
  };
  const Want wants[] = {{"full", {64, 128, 256, 512, 1024, 2048}, 30000, 5000},
                        {"basic", {32, 64, 128, 256, 512}, 10000, 1000}};
  for (const Want& w : wants) {
    nlohmann::json cfg;
    cfg["train"] = {{"dataset", "data"},
                    {"schedule", w.name},
                    {"routing",
                     {{"grid", {{"m", 1}, {"n", 1}}},
                      {"target_dim", 2},
                      {"bins", {{{"min_height", 0}, {"max_height", nullptr}, {"layers", {"conv5"}}}}}}}};
    detail::write_text(dir / "config.json", cfg.dump(2));
    CommandOptions opt;
    opt.out_dir = dir / w.name;
    opt.threads = ctx.threads;
    opt.verbosity = 0;
    cmd_train(read_run_config(dir / "config.json"), opt);
    const auto manifest = nlohmann::json::parse(detail::read_text(opt.out_dir / "manifest.json"));
    std::vector<std::size_t> trees, negatives, mined;
    for (const auto& s : manifest.at("stages")) {
      trees.push_back(s.at("trees").get<std::size_t>());
      negatives.push_back(s.at("negatives").get<std::size_t>());
      mined.push_back(s.at("mined").get<std::size_t>());
    }
    std::vector<std::size_t> want_neg, want_mined;
    for (std::size_t k = 0; k < w.trees.size(); ++k) {
      want_neg.push_back(w.initial + k * w.step);
      want_mined.push_back(k == 0 ? 0 : w.step);
    }
    std::ostringstream log;
    for (std::size_t k = 0; k < trees.size(); ++k)
      log << (k ? " " : "") << trees[k] << "/" << negatives[k];
    out.note(std::string(w.name) + " " + log.str());
    out.require(trees == w.trees, std::string(w.name) + " tree counts");
    out.require(negatives == want_neg, std::string(w.name) + " negative-set sizes");
    out.require(mined == want_mined, std::string(w.name) + " mined per stage");
    const DetectorModel model = read_model(opt.out_dir / "model.json");
    out.require(model.forest.trees.size() == w.trees.back(), std::string(w.name) + " final forest size");
  }
  return out;
}

// --- 6: scale-aware routing --------------------------------------------------

Outcome criterion_scale(const Context& ctx) {
  Outcome out;
  const Dataset train = synth_generate(mixed_scale_synth(200), 11);
  const Dataset test = synth_generate(mixed_scale_synth(400), 22);
  const EvalProtocol base = frame_protocol(320, 240);
  const ScaleSubset small{"small", {50, 80}}, large{"large", {80, kUnbounded}},
      all{"all", {50, kUnbounded}};
  struct Row {
    std::string name;
    double stride;
    double small, large, all;
  };
  auto run = [&](const std::string& name, const RoutingTable& table, double stride) {
    const TrainResult r = train_detector(train, short_schedule(ctx.threads), table, {});
    const auto dets = detect_dataset(r.model, test, ctx.threads);
    Row row{name, stride, 0, 0, 0};
    row.small = evaluate(dets, test.annotations, subset_protocol(base, small)).mr4;
    row.large = evaluate(dets, test.annotations, subset_protocol(base, large)).mr4;
    row.all = evaluate(dets, test.annotations, subset_protocol(base, all)).mr4;
    return row;
  };
  const std::vector<std::vector<std::string>> combos = {
      {"conv3"}, {"conv4"}, {"conv4a"}, {"conv5"}, {"conv5a"}, {"conv3", "conv4a"},
      {"conv4a", "conv5a"}};
  std::vector<Row> rows;
  for (const auto& combo : combos) {
    std::size_t dim = 0;
    for (const auto& l : combo) dim += train.images.front().layer(l).channels();
    const double stride = combo.size() == 1 ? train.images.front().layer(combo[0]).stride() : 0.0;
    rows.push_back(run(combination_name(combo), single_bin_table(combo, PoolGrid{4, 2}, dim), stride));
  }
  const Row router = run("router", small_router(), 0.0);

  const Row* best_small = nullptr;
  const Row* best_large = nullptr;
  double best_fixed_all = 1.0;
  std::string best_fixed_name;
  for (const Row& r : rows) {
    if (r.stride > 0) {
      if (!best_small || r.small < best_small->small) best_small = &r;
      if (!best_large || r.large < best_large->large) best_large = &r;
    }
    if (r.all < best_fixed_all) best_fixed_all = r.all, best_fixed_name = r.name;
  }
  out.note("best single small " + best_small->name + " " + fmt("%.4f", best_small->small) +
           " (stride " + fmt("%.0f", best_small->stride) + ")");
  out.note("best single large " + best_large->name + " " + fmt("%.4f", best_large->large) +
           " (stride " + fmt("%.0f", best_large->stride) + ")");
  out.note("router all " + fmt("%.4f", router.all) + " vs best fixed " + best_fixed_name + " " +
           fmt("%.4f", best_fixed_all));
  out.require(best_small->stride < best_large->stride,
              "best small-subset layer is not finer than best large-subset layer");
  out.require(router.all <= best_fixed_all - 0.02,
              "router does not beat every fixed combination by 2 points");
  return out;
}

// --- 7: evaluation -----------------------------------------------------------

ImageMatch exhaustive_match(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                            const std::vector<bool>& eligible, double thr) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<double> best_key, key;
  std::vector<int> best_assign, assign(dets.size(), -1);
  std::vector<bool> used(gts.size(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == order.size()) {
      if (best_key.empty() || key > best_key) best_key = key, best_assign = assign;
      return;
    }
    const std::size_t d = order[k];
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = iou(dets[d].box, gts[g].box);
      if (!eligible[g] || used[g] || o < thr) continue;
      used[g] = true;
      assign[d] = static_cast<int>(g);
      key.insert(key.end(), {1.0, o, -double(g)});
      rec(k + 1);
      key.resize(key.size() - 3);
      assign[d] = -1;
      used[g] = false;
    }
    key.insert(key.end(), {0.0, 0.0, 0.0});
    rec(k + 1);
    key.resize(key.size() - 3);
  };
  rec(0);
  ImageMatch m;
  m.det_order = order;
  m.gts.assign(gts.size(), GtOutcome::kMissed);
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!eligible[g]) m.gts[g] = GtOutcome::kIgnored;
  for (std::size_t d : order) {
    m.scores.push_back(dets[d].score);
    if (best_assign[d] >= 0) {
      m.detections.push_back(DetOutcome::kTruePositive);
      m.gts[static_cast<std::size_t>(best_assign[d])] = GtOutcome::kMatched;
      continue;
    }
    bool ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (!eligible[g] && iou(dets[d].box, gts[g].box) >= thr) ignored = true;
    m.detections.push_back(ignored ? DetOutcome::kIgnored : DetOutcome::kFalsePositive);
  }
  return m;
}

GroundTruthBox gt_at(double x, double h = 100.0) { return GroundTruthBox(Box(x, 10, 0.41 * h, h), 0, 0); }
Detection det_at(double x, double s, double h = 100.0) { return Detection(Box(x, 10, 0.41 * h, h), s); }

Outcome criterion_evaluation(const Context&) {
  Outcome out;
  Rng rng(7007);
  std::size_t mismatches = 0;
  const int trials = 20000;
  for (int trial = 0; trial < trials; ++trial) {
    const auto total = static_cast<std::size_t>(rng.integer(1, 6));
    const auto nd = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(total)));
    std::vector<Detection> dets;
    std::vector<GroundTruthBox> gts;
    std::vector<bool> eligible;
    auto box = [&] {
      return Box(rng.integer(0, 4) * 4.0, rng.integer(0, 2) * 6.0, 16 + rng.integer(0, 2) * 4.0,
                 40 + rng.integer(0, 2) * 8.0);
    };
    for (std::size_t i = 0; i < nd; ++i) dets.emplace_back(box(), double(rng.integer(0, 3)));
    for (std::size_t i = nd; i < total; ++i) {
      gts.emplace_back(box(), 0, 0);
      eligible.push_back(rng.bernoulli(0.75));
    }
    const ImageMatch got = match_with_mask(dets, gts, eligible, 0.5);
    const ImageMatch want = exhaustive_match(dets, gts, eligible, 0.5);
    if (got.det_order != want.det_order || got.detections != want.detections || got.gts != want.gts)
      ++mismatches;
  }
  out.require(mismatches == 0, std::to_string(mismatches) + " matcher disagreements");

  EvalProtocol open;
  open.use_region = false;
  const PerImage<Detection> dets{{"a", {det_at(0, .9), det_at(300, .5)}},
                                 {"b", {det_at(100, .8), det_at(400, .3)}},
                                 {"c", {det_at(500, .7), det_at(0, .2)}}};
  const PerImage<GroundTruthBox> gts{{"a", {gt_at(0)}}, {"b", {gt_at(100), gt_at(200)}}, {"c", {gt_at(0)}}};
  // Below 1 FPPI the miss rate is 1/2 at eight references; at 1 FPPI it is 1/4.
  const double want_mr = std::pow(0.5, 10.0 / 9.0);
  const EvalSummary s = evaluate(dets, gts, open);
  out.require(std::abs(s.mr2 - want_mr) < 1e-12 && std::abs(s.mr4 - want_mr) < 1e-12,
              "3-image fixture MR " + fmt("%.15f", s.mr2));

  PerImage<Detection> perfect;
  for (const auto& [id, gl] : gts)
    for (const auto& g : gl) perfect[id].emplace_back(g.box, 1.0);
  const auto moderate = kitti_difficulties()[1];
  out.require(evaluate(perfect, gts, open).mr2 < 1e-9, "perfect detector MR");
  out.require(evaluate({}, gts, open).mr2 == 1.0, "empty detector MR");
  out.require(average_precision(perfect, gts, moderate) == 1.0, "perfect detector AP");
  out.require(average_precision({}, gts, moderate) == 0.0, "empty detector AP");

  const PerImage<GroundTruthBox> ap_gts{{"x", {gt_at(0, 50), gt_at(100, 50), gt_at(200, 50)}}};
  const PerImage<Detection> ap_dets{{"x",
                                     {det_at(0, .95, 50), det_at(300, .9, 50), det_at(100, .8, 50),
                                      det_at(400, .6, 50), det_at(200, .5, 50)}}};
  // Recall levels 0..0.3 see precision 1, 0.4..0.6 see 2/3, 0.7..1 see 3/5.
  const double want_ap = (4.0 + 3.0 * 2.0 / 3.0 + 4.0 * 0.6) / 11.0;
  const double ap = average_precision(ap_dets, ap_gts, moderate);
  out.require(std::abs(ap - want_ap) < 1e-9, "11-point AP " + fmt("%.12f", ap));
  out.note(std::to_string(trials) + " matcher instances, fixture MR " + fmt("%.6f", s.mr2) +
           ", AP " + fmt("%.6f", ap));
  return out;
}

// --- 8: CLI determinism ------------------------------------------------------

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_determinism(const Context& ctx) {
  Outcome out;
  const char* config = R"({
  "seed": 5,
  "synth": {"image_count": 30, "image_w": 320, "image_h": 240, "template_channels": 8,
            "clutter_per_distractor": 20,
            "layers": [{"name": "conv3", "stride": 4, "channels": 8, "strength": 0.55},
                       {"name": "conv4a", "stride": 4, "channels": 16, "strength": 0.625},
                       {"name": "conv5a", "stride": 8, "channels": 16, "strength": 1.0}]},
  "train": {"dataset": "data", "stage_tree_counts": [8, 16], "initial_negatives": 500,
            "hard_negatives_per_stage": 100, "max_depth": 3,
            "routing": {"grid": {"m": 4, "n": 2}, "target_dim": 24,
                        "bins": [{"min_height": 50, "max_height": 80, "layers": ["conv3", "conv4a"]},
                                 {"min_height": 80, "max_height": null, "layers": ["conv4a", "conv5a"]}]},
            "channels": {"semantic": "hist", "edge": "hist", "edge_bins": 8}},
  "detect": {"model": "run/model.json", "dataset": "data"},
  "eval": {"detections": "run/detections.csv", "annotations": "data/annotations.jsonl",
           "protocol": {"region": {"xmin": 5, "xmax": 315, "ymin": 5, "ymax": 235}}}
}
)";
  std::vector<fs::path> runs;
  for (const char* name : {"first", "second"}) {
    const fs::path dir = ctx.scratch / "determinism" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    detail::write_text(dir / "config.json", config);
    const std::string base = "\"" + ctx.cli.string() + "\" ";
    const std::string cfg = " -q -c \"" + (dir / "config.json").string() + "\" -o \"";
    for (const auto& [sub, target] : std::vector<std::pair<std::string, std::string>>{
             {"synth", "data"}, {"train", "run"}, {"detect", "run"}, {"eval", "run"}}) {
      const int code = run_command(base + sub + cfg + (dir / target).string() + "\"");
      out.require(code == 0, std::string(name) + " " + sub + " exited " + std::to_string(code));
    }
    runs.push_back(dir / "run");
  }
  if (!out.pass) return out;
  for (const char* file : {"model.json", "metrics.json", "manifest.json", "detections.csv"}) {
    const std::string a = detail::read_text(runs[0] / file);
    const std::string b = detail::read_text(runs[1] / file);
    out.require(!a.empty() && a == b, std::string(file) + " differs between runs");
  }
  out.note("model.json " + fnv1a_hex(detail::read_text(runs[0] / "model.json")) + ", metrics.json " +
           fnv1a_hex(detail::read_text(runs[0] / "metrics.json")));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"samhead acceptance checks"};
  Context ctx;
  std::vector<int> only;
  app.add_option("--cli", ctx.cli, "Path to the samhead executable")->required();
  app.add_option("--scratch", ctx.scratch, "Working directory for generated files")
      ->default_val(fs::temp_directory_path() / "samhead_acceptance");
  app.add_option("--threads", ctx.threads, "Worker threads")->default_val(1);
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(ctx.scratch);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 = no limit
    Outcome (*run)(const Context&);
  };
  const Criterion criteria[] = {
      {1, "pooling oracles", 30, criterion_pooling},
      {2, "histogram semantic pooling", 300, criterion_semantic},
      {3, "pca", 300, criterion_pca},
      {4, "realboost", 10, criterion_boost},
      {5, "bootstrapping schedule", 0, criterion_schedule},
      {6, "scale-aware routing", 900, criterion_scale},
      {7, "evaluation", 10, criterion_evaluation},
      {8, "determinism", 0, criterion_determinism},
  };
  bool all = true;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0) o.require(secs < c.budget_s, "runtime over " + fmt("%.0f s", c.budget_s));
    all = all && o.pass;
    std::printf("criterion %d %s: %s (%.1f s) %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
