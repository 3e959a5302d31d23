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
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "samhead/error.hpp"
#include "samhead/geometry.hpp"
#include "samhead/io.hpp"

namespace samhead {

inline constexpr double kMissRateFloor = 1e-10;

struct EvalProtocol {
  double iou_threshold = 0.5;
  double height_min = 50.0;
  double height_max = std::numeric_limits<double>::infinity();  // exclusive
  double occlusion_max = 0.35;                                   // exclusive
  bool use_region = true;
  RegionBounds region;
  std::size_t num_points = 9;

  void validate() const {
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
      throw Error(ErrorCode::kInvalidConfig, "iou_threshold must lie in [0,1]");
    if (!(occlusion_max >= 0.0 && occlusion_max <= 1.0))
      throw Error(ErrorCode::kInvalidConfig, "occlusion_max must lie in [0,1]");
    if (!(height_min >= 0.0 && height_min < height_max))
      throw Error(ErrorCode::kInvalidConfig, "height range is empty");
    if (num_points < 2) throw Error(ErrorCode::kInvalidConfig, "num_points must be >= 2");
    if (use_region && !(region.xmin <= region.xmax && region.ymin <= region.ymax))
      throw Error(ErrorCode::kInvalidConfig, "region bounds are not ordered");
  }
};

// Reasonable-setting membership.
inline bool is_eligible(const GroundTruthBox& gt, const EvalProtocol& p) {
  if (gt.ignore) return false;
  if (gt.box.h() < p.height_min || gt.box.h() >= p.height_max) return false;
  if (gt.occlusion >= p.occlusion_max) return false;
  if (p.use_region && !clip_to_eval_region(gt.box, p.region)) return false;
  return true;
}

enum class DetOutcome { kTruePositive, kFalsePositive, kIgnored };
enum class GtOutcome { kMatched, kMissed, kIgnored };

struct ImageMatch {
  std::vector<double> scores;           // descending
  std::vector<DetOutcome> detections;   // aligned with `scores`
  std::vector<std::size_t> det_order;   // input index of each sorted detection
  std::vector<GtOutcome> gts;           // input order

  std::size_t count(DetOutcome o) const {
    return static_cast<std::size_t>(std::count(detections.begin(), detections.end(), o));
  }
  std::size_t count(GtOutcome o) const {
    return static_cast<std::size_t>(std::count(gts.begin(), gts.end(), o));
  }
};

// Greedy matching with a precomputed eligibility mask.
inline ImageMatch match_with_mask(const std::vector<Detection>& dets,
                                  const std::vector<GroundTruthBox>& gts,
                                  const std::vector<bool>& eligible, double iou_threshold) {
  ImageMatch m;
  m.det_order = order_by_descending(dets, [](const Detection& d) { return d.score; });
  m.gts.resize(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g)
    m.gts[g] = eligible[g] ? GtOutcome::kMissed : GtOutcome::kIgnored;
  for (std::size_t idx : m.det_order) {
    const Box& box = dets[idx].box;
    double best = -1.0;
    std::size_t best_gt = gts.size();
    bool hits_ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = iou(box, gts[g].box);
      if (o < iou_threshold) continue;
      if (!eligible[g]) {
        hits_ignored = true;
      } else if (m.gts[g] == GtOutcome::kMissed && o > best) {
        best = o;
        best_gt = g;
      }
    }
    DetOutcome out = DetOutcome::kFalsePositive;
    if (best_gt < gts.size()) {
      m.gts[best_gt] = GtOutcome::kMatched;
      out = DetOutcome::kTruePositive;
    } else if (hits_ignored) {
      out = DetOutcome::kIgnored;
    }
    m.scores.push_back(dets[idx].score);
    m.detections.push_back(out);
  }
  return m;
}

inline ImageMatch match_image(const std::vector<Detection>& dets,
                              const std::vector<GroundTruthBox>& gts, const EvalProtocol& p) {
  std::vector<bool> eligible(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g) eligible[g] = is_eligible(gts[g], p);
  return match_with_mask(dets, gts, eligible, p.iou_threshold);
}

struct FppiPoint {
  double threshold = 0.0;
  double fppi = 0.0;
  double miss_rate = 1.0;
  bool operator==(const FppiPoint&) const = default;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 1.0;
  bool operator==(const PrPoint&) const = default;
};

// Detections pooled over a set of images, in descending score order.
struct PooledMatches {
  std::size_t images = 0;
  std::size_t eligible_gts = 0;
  std::vector<double> scores;
  std::vector<DetOutcome> outcomes;

  void add(const ImageMatch& m) {
    ++images;
    eligible_gts += m.count(GtOutcome::kMatched) + m.count(GtOutcome::kMissed);
    scores.insert(scores.end(), m.scores.begin(), m.scores.end());
    outcomes.insert(outcomes.end(), m.detections.begin(), m.detections.end());
  }

  std::size_t count(DetOutcome o) const {
    return static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), o));
  }

  // Cumulative (threshold, tp, fp) after each distinct score, highest first.
  template <typename Visit>
  void sweep(Visit&& visit) const {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const DetOutcome o = outcomes[order[k]];
      if (o == DetOutcome::kTruePositive) ++tp;
      if (o == DetOutcome::kFalsePositive) ++fp;
      const bool last_of_score =
          k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
      if (last_of_score) visit(scores[order[k]], tp, fp);
    }
  }
};

inline std::vector<FppiPoint> fppi_curve(const PooledMatches& pm) {
  if (pm.eligible_gts == 0)
    throw Error(ErrorCode::kUndefinedMetric, "no eligible ground truth");
  if (pm.images == 0) throw Error(ErrorCode::kUndefinedMetric, "no images");
  std::vector<FppiPoint> curve;
  pm.sweep([&](double thr, std::size_t tp, std::size_t fp) {
    curve.push_back({thr, static_cast<double>(fp) / static_cast<double>(pm.images),
                     1.0 - static_cast<double>(tp) / static_cast<double>(pm.eligible_gts)});
  });
  return curve;
}

struct MissRateSummary {
  double value = 1.0;
  std::vector<double> references;
  std::vector<double> miss_rates;
  std::size_t floor_activations = 0;
};

// Log-average miss rate over reference FPPIs 10^lo .. 10^hi (log-uniform).
inline MissRateSummary log_average_miss_rate_detail(const std::vector<FppiPoint>& curve,
                                                    double log10_lo, double log10_hi,
                                                    std::size_t num_points) {
  if (num_points < 2) throw Error(ErrorCode::kInvalidArgument, "num_points must be >= 2");
  MissRateSummary s;
  double worst = 1.0;
  if (!curve.empty()) {
    worst = 0.0;
    for (const auto& p : curve) worst = std::max(worst, p.miss_rate);
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < num_points; ++k) {
    const double e =
        log10_lo + (log10_hi - log10_lo) * static_cast<double>(k) / double(num_points - 1);
    const double ref = std::pow(10.0, e);
    double miss = worst;
    for (const auto& p : curve)
      if (p.fppi <= ref) miss = p.miss_rate;
    if (miss < kMissRateFloor) ++s.floor_activations;
    s.references.push_back(ref);
    s.miss_rates.push_back(miss);
    acc += std::log(std::max(miss, kMissRateFloor));
  }
  s.value = std::exp(acc / static_cast<double>(num_points));
  return s;
}

inline double log_average_miss_rate(const std::vector<FppiPoint>& curve, double log10_lo,
                                    std::size_t num_points = 9) {
  return log_average_miss_rate_detail(curve, log10_lo, 0.0, num_points).value;
}

inline PooledMatches pool_matches(const PerImage<Detection>& dets,
                                  const PerImage<GroundTruthBox>& gts, const EvalProtocol& p) {
  p.validate();
  std::set<std::string> ids;
  for (const auto& [id, _] : gts) ids.insert(id);
  for (const auto& [id, _] : dets) ids.insert(id);
  static const std::vector<Detection> kNoDets;
  static const std::vector<GroundTruthBox> kNoGts;
  PooledMatches pm;
  for (const auto& id : ids) {
    auto d = dets.find(id);
    auto g = gts.find(id);
    pm.add(match_image(d == dets.end() ? kNoDets : d->second, g == gts.end() ? kNoGts : g->second,
                       p));
  }
  return pm;
}

// --- KITTI-style average precision -----------------------------------------

// 0: fully visible, 1: partly occluded, 2: largely occluded.
inline int occlusion_level(double occlusion) {
  if (occlusion < 0.15) return 0;
  if (occlusion < 0.5) return 1;
  return 2;
}

struct KittiDifficulty {
  std::string name;
  double min_height = 25.0;
  int max_occlusion_level = 2;
  double max_truncation = 0.5;

  bool admits(const GroundTruthBox& gt) const {
    return !gt.ignore && gt.box.h() >= min_height &&
           occlusion_level(gt.occlusion) <= max_occlusion_level &&
           gt.truncation <= max_truncation;
  }
};

inline std::vector<KittiDifficulty> kitti_difficulties() {
  return {{"easy", 40.0, 0, 0.15}, {"moderate", 25.0, 1, 0.30}, {"hard", 25.0, 2, 0.50}};
}

enum class ApInterpolation { kElevenPoint, kFortyPoint };

inline PooledMatches pool_matches(const PerImage<Detection>& dets,
                                  const PerImage<GroundTruthBox>& gts,
                                  const KittiDifficulty& difficulty, double iou_threshold) {
  std::set<std::string> ids;
  for (const auto& [id, _] : gts) ids.insert(id);
  for (const auto& [id, _] : dets) ids.insert(id);
  static const std::vector<Detection> kNoDets;
  static const std::vector<GroundTruthBox> kNoGts;
  PooledMatches pm;
  for (const auto& id : ids) {
    auto d = dets.find(id);
    auto g = gts.find(id);
    const auto& gl = g == gts.end() ? kNoGts : g->second;
    std::vector<bool> mask(gl.size());
    for (std::size_t k = 0; k < gl.size(); ++k) mask[k] = difficulty.admits(gl[k]);
    pm.add(match_with_mask(d == dets.end() ? kNoDets : d->second, gl, mask, iou_threshold));
  }
  return pm;
}

inline std::vector<PrPoint> pr_curve(const PooledMatches& pm) {
  if (pm.eligible_gts == 0)
    throw Error(ErrorCode::kUndefinedMetric, "no eligible ground truth");
  std::vector<PrPoint> curve;
  pm.sweep([&](double, std::size_t tp, std::size_t fp) {
    if (tp + fp == 0) return;
    curve.push_back({static_cast<double>(tp) / static_cast<double>(pm.eligible_gts),
                     static_cast<double>(tp) / static_cast<double>(tp + fp)});
  });
  return curve;
}

// Interpolated AP: mean over recall points r of max precision at recall >= r.
inline double average_precision(const std::vector<PrPoint>& curve,
                                ApInterpolation mode = ApInterpolation::kElevenPoint) {
  std::vector<double> points;
  if (mode == ApInterpolation::kElevenPoint)
    for (int k = 0; k <= 10; ++k) points.push_back(k / 10.0);
  else
    for (int k = 1; k <= 40; ++k) points.push_back(k / 40.0);
  double acc = 0.0;
  for (double r : points) {
    double best = 0.0;
    for (const auto& p : curve)
      if (p.recall >= r - 1e-12) best = std::max(best, p.precision);
    acc += best;
  }
  return acc / static_cast<double>(points.size());
}

inline double average_precision(const PerImage<Detection>& dets,
                                const PerImage<GroundTruthBox>& gts,
                                const KittiDifficulty& difficulty, double iou_threshold = 0.5,
                                ApInterpolation mode = ApInterpolation::kElevenPoint) {
  return average_precision(pr_curve(pool_matches(dets, gts, difficulty, iou_threshold)), mode);
}

// --- Curves on disk ---------------------------------------------------------

inline std::string fppi_curve_to_csv(const std::vector<FppiPoint>& curve) {
  std::string out = "threshold,fppi,miss_rate\n";
  for (const auto& p : curve)
    out += format_double(p.threshold) + "," + format_double(p.fppi) + "," +
           format_double(p.miss_rate) + "\n";
  return out;
}

inline std::string pr_curve_to_csv(const std::vector<PrPoint>& curve) {
  std::string out = "recall,precision\n";
  for (const auto& p : curve) out += format_double(p.recall) + "," + format_double(p.precision) + "\n";
  return out;
}

namespace detail {

inline std::vector<std::vector<double>> parse_numeric_csv(const std::string& text,
                                                          const std::string& header,
                                                          std::size_t columns) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "curve CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw Error(ErrorCode::kParse, "unexpected curve header '" + line + "'");
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string f;
    try {
      while (std::getline(ls, f, ',')) row.push_back(std::stod(f));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParse, "curve line " + std::to_string(lineno) + ": bad number");
    }
    if (row.size() != columns)
      throw Error(ErrorCode::kParse, "curve line " + std::to_string(lineno) + ": wrong arity");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline std::vector<FppiPoint> fppi_curve_from_csv(const std::string& text) {
  std::vector<FppiPoint> out;
  for (const auto& r : detail::parse_numeric_csv(text, "threshold,fppi,miss_rate", 3))
    out.push_back({r[0], r[1], r[2]});
  return out;
}

inline std::vector<PrPoint> pr_curve_from_csv(const std::string& text) {
  std::vector<PrPoint> out;
  for (const auto& r : detail::parse_numeric_csv(text, "recall,precision", 2))
    out.push_back({r[0], r[1]});
  return out;
}

// --- Summary ----------------------------------------------------------------

struct EvalSummary {
  double mr2 = 1.0;
  double mr4 = 1.0;
  std::optional<double> ap_easy, ap_moderate, ap_hard;
  std::size_t images = 0;
  std::size_t detections = 0;
  std::size_t eligible_gts = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t ignored = 0;
  std::vector<FppiPoint> curve;
  std::vector<PrPoint> pr_moderate;
};

inline EvalSummary evaluate(const PerImage<Detection>& dets, const PerImage<GroundTruthBox>& gts,
                            const EvalProtocol& protocol,
                            ApInterpolation mode = ApInterpolation::kElevenPoint) {
  const PooledMatches pm = pool_matches(dets, gts, protocol);
  EvalSummary s;
  s.curve = fppi_curve(pm);
  s.mr2 = log_average_miss_rate(s.curve, -2.0, protocol.num_points);
  s.mr4 = log_average_miss_rate(s.curve, -4.0, protocol.num_points);
  s.images = pm.images;
  s.detections = pm.scores.size();
  s.eligible_gts = pm.eligible_gts;
  s.true_positives = pm.count(DetOutcome::kTruePositive);
  s.false_positives = pm.count(DetOutcome::kFalsePositive);
  s.ignored = pm.count(DetOutcome::kIgnored);
  for (const KittiDifficulty& d : kitti_difficulties()) {
    const PooledMatches km = pool_matches(dets, gts, d, protocol.iou_threshold);
    if (km.eligible_gts == 0) continue;
    const auto pr = pr_curve(km);
    const double ap = average_precision(pr, mode);
    if (d.name == "easy") s.ap_easy = ap;
    if (d.name == "moderate") {
      s.ap_moderate = ap;
      s.pr_moderate = pr;
    }
    if (d.name == "hard") s.ap_hard = ap;
  }
  return s;
}

inline std::string metrics_json(const EvalSummary& s) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::ordered_json j;
  j["mr2"] = s.mr2;
  j["mr4"] = s.mr4;
  j["ap_easy"] = opt(s.ap_easy);
  j["ap_moderate"] = opt(s.ap_moderate);
  j["ap_hard"] = opt(s.ap_hard);
  j["counts"] = {{"images", s.images},
                 {"detections", s.detections},
                 {"eligible_gts", s.eligible_gts},
                 {"true_positives", s.true_positives},
                 {"false_positives", s.false_positives},
                 {"ignored", s.ignored}};
  return j.dump(2) + "\n";
}

}  // namespace samhead
