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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "samhead/evaluation.hpp"
#include "samhead/random.hpp"

namespace samhead {
namespace {

EvalProtocol open_protocol() {
  EvalProtocol p;
  p.use_region = false;
  return p;
}

GroundTruthBox gt_at(double x, double h = 100.0) { return GroundTruthBox(Box(x, 10, 0.41 * h, h), 0, 0); }
Detection det_at(double x, double s, double h = 100.0) { return Detection(Box(x, 10, 0.41 * h, h), s); }

TEST(Match, PerfectPair) {
  const auto m = match_image({det_at(0, 1.0)}, {gt_at(0)}, open_protocol());
  EXPECT_EQ(m.count(DetOutcome::kTruePositive), 1u);
  EXPECT_EQ(m.count(DetOutcome::kFalsePositive), 0u);
  EXPECT_EQ(m.count(GtOutcome::kMissed), 0u);
}

TEST(Match, ShortGroundTruthIsIgnored) {
  const auto m = match_image({det_at(0, 1.0, 40)}, {gt_at(0, 40)}, open_protocol());
  EXPECT_EQ(m.count(DetOutcome::kTruePositive), 0u);
  EXPECT_EQ(m.count(DetOutcome::kFalsePositive), 0u);
  EXPECT_EQ(m.count(DetOutcome::kIgnored), 1u);
  EXPECT_EQ(m.count(GtOutcome::kIgnored), 1u);
}

TEST(Match, DuplicateBecomesFalsePositive) {
  const auto m = match_image({det_at(1, 0.4), det_at(0, 0.9)}, {gt_at(0)}, open_protocol());
  ASSERT_EQ(m.detections.size(), 2u);
  EXPECT_EQ(m.det_order[0], 1u);
  EXPECT_EQ(m.detections[0], DetOutcome::kTruePositive);
  EXPECT_EQ(m.detections[1], DetOutcome::kFalsePositive);
}

// Among all injective det->eligible-GT assignments with IoU >= threshold,
// the lexicographically best one in score order, each detection preferring
// a match, then higher IoU, then the lower GT index.
ImageMatch exhaustive_match(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                            const std::vector<bool>& eligible, double thr) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<double> best_key;
  std::vector<int> best_assign, assign(dets.size(), -1);
  std::vector<bool> used(gts.size(), false);
  std::vector<double> key;
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == order.size()) {
      if (best_key.empty() || key > best_key) {
        best_key = key;
        best_assign = assign;
      }
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

TEST(Match, EqualsExhaustiveAssignment) {
  Rng rng(42);
  std::size_t matched_any = 0;
  for (int trial = 0; trial < 3000; ++trial) {
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
    ASSERT_EQ(got.det_order, want.det_order);
    ASSERT_EQ(got.detections, want.detections) << "trial " << trial;
    ASSERT_EQ(got.gts, want.gts) << "trial " << trial;
    matched_any += got.count(DetOutcome::kTruePositive);
  }
  EXPECT_GT(matched_any, 500u);
}

// Three images, four eligible people. Score order: TP TP FP FP FP TP.
PerImage<Detection> fixture_dets() {
  return {{"a", {det_at(0, 0.9), det_at(300, 0.5)}},
          {"b", {det_at(100, 0.8), det_at(400, 0.3)}},
          {"c", {det_at(500, 0.7), det_at(0, 0.2)}}};
}
PerImage<GroundTruthBox> fixture_gts() {
  return {{"a", {gt_at(0)}}, {"b", {gt_at(100), gt_at(200)}}, {"c", {gt_at(0)}}};
}

TEST(MissRate, ThreeImageFixture) {
  const auto pm = pool_matches(fixture_dets(), fixture_gts(), open_protocol());
  const auto curve = fppi_curve(pm);
  ASSERT_EQ(curve.size(), 6u);
  EXPECT_EQ(curve[1].miss_rate, 0.5);
  EXPECT_EQ(curve[1].fppi, 0.0);
  EXPECT_DOUBLE_EQ(curve[4].fppi, 1.0);
  EXPECT_EQ(curve[5].miss_rate, 0.25);
  // Eight references sit below 1 FPPI at miss 1/2; the one at 1 FPPI sees 1/4.
  const double expected = std::pow(0.5, 10.0 / 9.0);
  EXPECT_NEAR(log_average_miss_rate(curve, -2.0), expected, 1e-15);
  EXPECT_NEAR(log_average_miss_rate(curve, -4.0), expected, 1e-15);
  const EvalSummary s = evaluate(fixture_dets(), fixture_gts(), open_protocol());
  EXPECT_NEAR(s.mr2, expected, 1e-15);
  EXPECT_EQ(s.true_positives, 3u);
  EXPECT_EQ(s.false_positives, 3u);
  EXPECT_EQ(s.eligible_gts, 4u);
}

TEST(MissRate, PerfectAndEmpty) {
  PerImage<Detection> perfect;
  for (const auto& [id, gl] : fixture_gts())
    for (const auto& g : gl) perfect[id].emplace_back(g.box, 1.0);
  const EvalSummary p = evaluate(perfect, fixture_gts(), open_protocol());
  EXPECT_LT(p.mr2, 1e-9);
  EXPECT_LT(p.mr4, 1e-9);
  const auto detail = log_average_miss_rate_detail(p.curve, -2.0, 0.0, 9);
  EXPECT_EQ(detail.floor_activations, 9u);

  const EvalSummary e = evaluate({}, fixture_gts(), open_protocol());
  EXPECT_EQ(e.mr2, 1.0);
  EXPECT_EQ(e.mr4, 1.0);
}

TEST(MissRate, NoEligibleTruthIsUndefined) {
  try {
    evaluate(fixture_dets(), {{"a", {gt_at(0, 30)}}}, open_protocol());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefinedMetric);
  }
}

TEST(MissRate, ReasonableFilter) {
  EvalProtocol p;
  GroundTruthBox occluded(Box(100, 100, 41, 100), 0.35, 0.0);
  GroundTruthBox visible(Box(100, 100, 41, 100), 0.34, 0.0);
  GroundTruthBox outside(Box(-30, 100, 41, 100), 0.0, 0.0);
  EXPECT_FALSE(is_eligible(occluded, p));
  EXPECT_TRUE(is_eligible(visible, p));
  EXPECT_FALSE(is_eligible(outside, p));
  EXPECT_TRUE(is_eligible(GroundTruthBox(Box(100, 100, 20, 50), 0, 0), p));
}

TEST(Ap, OcclusionLevels) {
  EXPECT_EQ(occlusion_level(0.0), 0);
  EXPECT_EQ(occlusion_level(0.149), 0);
  EXPECT_EQ(occlusion_level(0.15), 1);
  EXPECT_EQ(occlusion_level(0.49), 1);
  EXPECT_EQ(occlusion_level(0.5), 2);
}

TEST(Ap, PerfectAndEmpty) {
  const auto moderate = kitti_difficulties()[1];
  PerImage<Detection> perfect;
  for (const auto& [id, gl] : fixture_gts())
    for (const auto& g : gl) perfect[id].emplace_back(g.box, 1.0);
  EXPECT_DOUBLE_EQ(average_precision(perfect, fixture_gts(), moderate), 1.0);
  EXPECT_DOUBLE_EQ(average_precision({}, fixture_gts(), moderate), 0.0);
  EXPECT_DOUBLE_EQ(average_precision(perfect, fixture_gts(), moderate, 0.5,
                                     ApInterpolation::kFortyPoint),
                   1.0);
}

TEST(Ap, FiveDetectionsThreeTruths) {
  const PerImage<GroundTruthBox> gts{{"x", {gt_at(0, 50), gt_at(100, 50), gt_at(200, 50)}}};
  const PerImage<Detection> dets{{"x",
                                  {det_at(0, 0.95, 50), det_at(300, 0.9, 50), det_at(100, 0.8, 50),
                                   det_at(400, 0.6, 50), det_at(200, 0.5, 50)}}};
  const auto moderate = kitti_difficulties()[1];
  const auto pr = pr_curve(pool_matches(dets, gts, moderate, 0.5));
  const std::vector<PrPoint> want{{1.0 / 3, 1.0}, {1.0 / 3, 0.5}, {2.0 / 3, 2.0 / 3},
                                  {2.0 / 3, 0.5}, {1.0, 0.6}};
  ASSERT_EQ(pr.size(), want.size());
  for (std::size_t k = 0; k < pr.size(); ++k) {
    EXPECT_NEAR(pr[k].recall, want[k].recall, 1e-15);
    EXPECT_NEAR(pr[k].precision, want[k].precision, 1e-15);
  }
  // Recall levels 0..0.3 see precision 1, 0.4..0.6 see 2/3, 0.7..1 see 0.6.
  EXPECT_NEAR(average_precision(dets, gts, moderate), (4.0 + 3.0 * 2.0 / 3.0 + 4.0 * 0.6) / 11.0,
              1e-9);
}

TEST(Curves, CsvRoundTrip) {
  const EvalSummary s = evaluate(fixture_dets(), fixture_gts(), open_protocol());
  EXPECT_EQ(fppi_curve_from_csv(fppi_curve_to_csv(s.curve)), s.curve);
  EXPECT_EQ(pr_curve_from_csv(pr_curve_to_csv(s.pr_moderate)), s.pr_moderate);
  EXPECT_EQ(fppi_curve_to_csv({}), "threshold,fppi,miss_rate\n");
  EXPECT_TRUE(fppi_curve_from_csv("threshold,fppi,miss_rate\n").empty());
  EXPECT_THROW(fppi_curve_from_csv("recall,precision\n"), Error);
}

TEST(Curves, RecallMonotoneOnRandomInput) {
  Rng rng(77);
  PerImage<Detection> dets;
  PerImage<GroundTruthBox> gts;
  for (int i = 0; i < 20; ++i) {
    const std::string id = "i" + std::to_string(i);
    for (int k = 0; k < 3; ++k) gts[id].push_back(gt_at(rng.uniform(0, 500), rng.uniform(30, 120)));
    for (int k = 0; k < 8; ++k)
      dets[id].push_back(det_at(rng.uniform(0, 500), rng.normal(), rng.uniform(30, 120)));
  }
  const auto pm = pool_matches(dets, gts, kitti_difficulties()[2], 0.5);
  const auto pr = pr_curve(pm);
  ASSERT_FALSE(pr.empty());
  for (std::size_t k = 1; k < pr.size(); ++k) EXPECT_GE(pr[k].recall, pr[k - 1].recall);
  EXPECT_NEAR(pr.back().recall,
              double(pm.count(DetOutcome::kTruePositive)) / double(pm.eligible_gts), 1e-15);
}

TEST(Metrics, JsonFields) {
  const auto j = nlohmann::json::parse(
      metrics_json(evaluate(fixture_dets(), fixture_gts(), open_protocol())));
  EXPECT_NEAR(j.at("mr2").get<double>(), std::pow(0.5, 10.0 / 9.0), 1e-15);
  EXPECT_EQ(j.at("counts").at("images").get<int>(), 3);
  EXPECT_TRUE(j.contains("ap_moderate"));
}

}  // namespace
}  // namespace samhead
