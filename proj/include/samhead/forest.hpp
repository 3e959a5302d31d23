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

// RealBoost over depth-limited decision trees.
//
// Each tree is grown greedily top-down. A node split on (feature, threshold)
// is scored by Z = 2 * sum over the two children of sqrt(W+ * W-), where W+/W-
// are the total boosting weights of positive/negative samples reaching the
// child; the split with the smallest Z wins. A leaf outputs the confidence
// 0.5 * ln((W+ + eps) / (W- + eps)). After each round every sample weight is
// recomputed from its running margin, w_i = exp(-y_i * F(x_i)), and the
// weights are renormalised to sum to one. The proposal confidence enters as
// the round-zero margin alpha * prior_i.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "samhead/error.hpp"
#include "samhead/parallel.hpp"

namespace samhead {

inline constexpr double kMarginClamp = 50.0;
inline constexpr std::size_t kMaxThresholds = 255;

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  float threshold = 0.0f;     // x[feature] < threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;         // leaf confidence

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Nodes in preorder; nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  double evaluate(std::span<const float> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const TreeNode& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                       : n.right);
    }
    return nodes[i].value;
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].is_leaf()) {
        stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
        stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
      }
    }
    return best;
  }

  bool operator==(const Tree&) const = default;
};

struct StageRecord {
  std::size_t stage = 0;
  std::size_t trees = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t mined = 0;
  std::size_t margin_clamps = 0;
  double final_loss = 0.0;

  bool operator==(const StageRecord&) const = default;
};

struct Forest {
  std::vector<Tree> trees;
  double prior_weight = 1.0;
  std::size_t descriptor_length = 0;
  std::vector<StageRecord> stage_history;

  bool operator==(const Forest&) const = default;
};

// alpha * prior + sum of tree outputs.
inline double forest_score(const Forest& f, std::span<const float> x, double prior) {
  if (!f.trees.empty() && x.size() != f.descriptor_length)
    throw Error(ErrorCode::kDimensionMismatch,
                "descriptor length " + std::to_string(x.size()) + " != forest length " +
                    std::to_string(f.descriptor_length));
  double s = f.prior_weight * prior;
  for (const Tree& t : f.trees) s += t.evaluate(x);
  return s;
}

// Row-major sample matrix with labels in {-1,+1} and log-odds priors.
struct TrainingSet {
  std::size_t dim = 0;
  std::vector<float> features;
  std::vector<int> labels;
  std::vector<double> priors;

  std::size_t size() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(features).subspan(i * dim, dim);
  }

  void add(std::span<const float> x, int label, double prior) {
    if (dim == 0 && labels.empty()) dim = x.size();
    if (x.size() != dim)
      throw Error(ErrorCode::kDimensionMismatch, "sample length differs from training set");
    if (label != 1 && label != -1)
      throw Error(ErrorCode::kInvalidArgument, "labels must be +1 or -1");
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
    priors.push_back(prior);
  }

  void append(const TrainingSet& other, std::size_t i) {
    add(other.row(i), other.labels[i], other.priors[i]);
  }
};

// Per-feature candidate thresholds and the bin of every sample under them.
// bin(x) = #{thresholds t : t <= x}, so x < thresholds[j] <=> bin(x) <= j.
struct FeatureBins {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<std::vector<float>> thresholds;
  std::vector<std::uint8_t> bins;  // feature-major: bins[f * rows + i]

  std::span<const std::uint8_t> column(std::size_t f) const {
    return std::span<const std::uint8_t>(bins).subspan(f * rows, rows);
  }
};

namespace detail {

// Midpoints between adjacent distinct values, subsampled to at most
// `max_thresholds` sample quantiles.
inline std::vector<float> candidate_thresholds(std::vector<float> values,
                                               std::size_t max_thresholds) {
  std::sort(values.begin(), values.end());
  std::vector<float> out;
  auto midpoint = [](float a, float b) {
    return static_cast<float>(0.5 * (static_cast<double>(a) + static_cast<double>(b)));
  };
  auto push = [&](float a, float b) {
    float t = midpoint(a, b);
    if (!(t > a)) t = b;  // adjacent floats: the midpoint collapses onto a
    if (out.empty() || t > out.back()) out.push_back(t);
  };
  const std::size_t n = values.size();
  std::size_t distinct = n == 0 ? 0 : 1;
  for (std::size_t i = 1; i < n; ++i)
    if (values[i] != values[i - 1]) ++distinct;
  if (distinct <= max_thresholds + 1) {
    for (std::size_t i = 1; i < n; ++i)
      if (values[i] != values[i - 1]) push(values[i - 1], values[i]);
    return out;
  }
  const std::size_t q = max_thresholds + 1;
  for (std::size_t k = 1; k < q; ++k) {
    std::size_t pos = k * n / q;
    if (pos == 0) pos = 1;
    // Move to the next change point so the threshold separates distinct values.
    while (pos < n && values[pos] == values[pos - 1]) ++pos;
    if (pos >= n) break;
    push(values[pos - 1], values[pos]);
  }
  return out;
}

}  // namespace detail

inline FeatureBins bin_features(const TrainingSet& set, std::size_t max_thresholds = kMaxThresholds,
                                unsigned threads = 1) {
  if (max_thresholds == 0 || max_thresholds > kMaxThresholds)
    throw Error(ErrorCode::kInvalidArgument, "max_thresholds must lie in [1, 255]");
  FeatureBins fb;
  fb.rows = set.size();
  fb.dim = set.dim;
  fb.thresholds.resize(set.dim);
  fb.bins.resize(set.dim * set.size());
  parallel_for(set.dim, threads, [&](std::size_t f) {
    std::vector<float> col(fb.rows);
    for (std::size_t i = 0; i < fb.rows; ++i) col[i] = set.features[i * set.dim + f];
    auto th = detail::candidate_thresholds(col, max_thresholds);
    std::uint8_t* dst = fb.bins.data() + f * fb.rows;
    for (std::size_t i = 0; i < fb.rows; ++i)
      dst[i] = static_cast<std::uint8_t>(std::upper_bound(th.begin(), th.end(), col[i]) -
                                         th.begin());
    fb.thresholds[f] = std::move(th);
  });
  return fb;
}

struct TreeParams {
  std::size_t max_depth = 5;
  double leaf_epsilon = 0.0;  // <= 0 selects 1 / (2 N)
  std::size_t max_thresholds = kMaxThresholds;
  unsigned threads = 1;
};

namespace detail {

inline double leaf_value(double wp, double wn, double eps) {
  return 0.5 * std::log((wp + eps) / (wn + eps));
}

struct Split {
  bool valid = false;
  std::size_t feature = 0;
  std::size_t bin = 0;
  double z = std::numeric_limits<double>::infinity();
};

class TreeGrower {
 public:
  TreeGrower(const FeatureBins& fb, std::span<const int> labels, std::span<const double> weights,
             const TreeParams& params)
      : fb_(fb), params_(params), wpos_(fb.rows, 0.0), wneg_(fb.rows, 0.0) {
    for (std::size_t i = 0; i < fb.rows; ++i) {
      if (labels[i] > 0)
        wpos_[i] = weights[i];
      else
        wneg_[i] = weights[i];
    }
    eps_ = params.leaf_epsilon > 0.0 ? params.leaf_epsilon
                                     : 1.0 / (2.0 * static_cast<double>(std::max<std::size_t>(1, fb.rows)));
  }

  Tree grow(std::vector<double>* sample_scores) {
    Tree tree;
    std::vector<std::uint32_t> all(fb_.rows);
    for (std::size_t i = 0; i < fb_.rows; ++i) all[i] = static_cast<std::uint32_t>(i);
    scores_ = sample_scores;
    if (scores_) scores_->assign(fb_.rows, 0.0);
    build(tree, all, 0);
    return tree;
  }

 private:
  std::int32_t build(Tree& tree, std::vector<std::uint32_t>& idx, std::size_t depth) {
    const auto node_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    double wp = 0.0, wn = 0.0;
    std::size_t np = 0, nn = 0;
    for (std::uint32_t i : idx) {
      wp += wpos_[i];
      wn += wneg_[i];
      if (wpos_[i] > 0.0) ++np;
      if (wneg_[i] > 0.0) ++nn;
    }
    Split split;
    if (depth < params_.max_depth && np > 0 && nn > 0) split = best_split(idx, wp, wn);
    if (!split.valid) {
      const double v = leaf_value(wp, wn, eps_);
      tree.nodes[node_id].value = v;
      if (scores_)
        for (std::uint32_t i : idx) (*scores_)[i] = v;
      return node_id;
    }
    const auto col = fb_.column(split.feature);
    std::vector<std::uint32_t> left, right;
    left.reserve(idx.size());
    right.reserve(idx.size());
    for (std::uint32_t i : idx) (col[i] <= split.bin ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    tree.nodes[node_id].feature = static_cast<std::int32_t>(split.feature);
    tree.nodes[node_id].threshold = fb_.thresholds[split.feature][split.bin];
    const std::int32_t l = build(tree, left, depth + 1);
    const std::int32_t r = build(tree, right, depth + 1);
    tree.nodes[node_id].left = l;
    tree.nodes[node_id].right = r;
    return node_id;
  }

  Split best_split(const std::vector<std::uint32_t>& idx, double wp, double wn) const {
    const std::size_t chunks = std::max(1u, resolve_threads(params_.threads));
    std::vector<Split> partial(std::min<std::size_t>(chunks, std::max<std::size_t>(1, fb_.dim)));
    const std::size_t per = (fb_.dim + partial.size() - 1) / partial.size();
    parallel_for(partial.size(), params_.threads, [&](std::size_t c) {
      const std::size_t f0 = c * per;
      const std::size_t f1 = std::min(fb_.dim, f0 + per);
      Split best;
      std::array<double, 256> hp{}, hn{};
      std::array<std::uint32_t, 256> hc{};
      for (std::size_t f = f0; f < f1; ++f) {
        const std::size_t nb = fb_.thresholds[f].size() + 1;
        if (nb < 2) continue;
        std::fill_n(hp.begin(), nb, 0.0);
        std::fill_n(hn.begin(), nb, 0.0);
        std::fill_n(hc.begin(), nb, 0u);
        const std::uint8_t* col = fb_.bins.data() + f * fb_.rows;
        for (std::uint32_t i : idx) {
          const std::uint8_t b = col[i];
          hp[b] += wpos_[i];
          hn[b] += wneg_[i];
          ++hc[b];
        }
        double lp = 0.0, ln = 0.0;
        std::size_t lc = 0;
        for (std::size_t j = 0; j + 1 < nb; ++j) {
          lp += hp[j];
          ln += hn[j];
          lc += hc[j];
          if (lc == 0) continue;
          if (lc == idx.size()) break;
          const double rp = std::max(0.0, wp - lp);
          const double rn = std::max(0.0, wn - ln);
          const double z = 2.0 * (std::sqrt(lp * ln) + std::sqrt(rp * rn));
          if (z < best.z) best = Split{true, f, j, z};
        }
      }
      partial[c] = best;
    });
    Split best;
    for (const Split& s : partial)
      if (s.valid && s.z < best.z) best = s;
    return best;
  }

  const FeatureBins& fb_;
  TreeParams params_;
  std::vector<double> wpos_;
  std::vector<double> wneg_;
  double eps_ = 0.0;
  std::vector<double>* scores_ = nullptr;
};

}  // namespace detail

// Grows one tree on pre-binned features. When `sample_scores` is given it
// receives the leaf value of every training sample.
inline Tree train_tree(const FeatureBins& fb, std::span<const int> labels,
                       std::span<const double> weights, const TreeParams& params,
                       std::vector<double>* sample_scores = nullptr) {
  if (labels.size() != fb.rows || weights.size() != fb.rows)
    throw Error(ErrorCode::kDimensionMismatch, "labels/weights do not match the sample count");
  if (fb.rows == 0) throw Error(ErrorCode::kInsufficientSamples, "cannot grow a tree on no samples");
  return detail::TreeGrower(fb, labels, weights, params).grow(sample_scores);
}

inline Tree train_tree(const TrainingSet& set, std::span<const double> weights,
                       const TreeParams& params) {
  const FeatureBins fb = bin_features(set, params.max_thresholds, params.threads);
  return train_tree(fb, set.labels, weights, params);
}

struct BoostParams {
  std::size_t max_depth = 5;
  double leaf_epsilon = 0.0;
  double prior_weight = 1.0;
  std::size_t max_thresholds = kMaxThresholds;
  unsigned threads = 1;
};

struct BoostTrace {
  std::vector<double> loss;         // mean exp(-y F); loss[0] is the prior-only margin
  std::vector<double> weight_sums;  // sum of weights after each normalisation
  std::size_t margin_clamps = 0;
};

namespace detail {

// Recomputes normalised weights from margins. Returns the mean exponential loss.
inline double refresh_weights(std::span<const int> labels, std::span<const double> margins,
                              std::vector<double>& weights, std::size_t& clamps) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double ym = labels[i] * margins[i];
    if (ym > kMarginClamp || ym < -kMarginClamp) {
      ++clamps;
      ym = std::clamp(ym, -kMarginClamp, kMarginClamp);
    }
    weights[i] = std::exp(-ym);
    total += weights[i];
  }
  for (double& w : weights) w /= total;
  return total / static_cast<double>(labels.size());
}

}  // namespace detail

// Initial weights proportional to exp(-y * alpha * prior), normalised.
inline std::vector<double> prior_weights(const TrainingSet& set, double prior_weight) {
  std::vector<double> margins(set.size()), w(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) margins[i] = prior_weight * set.priors[i];
  std::size_t clamps = 0;
  detail::refresh_weights(set.labels, margins, w, clamps);
  return w;
}

inline Forest realboost_fit(const TrainingSet& set, std::size_t rounds, const BoostParams& params,
                            BoostTrace* trace = nullptr, const FeatureBins* prebinned = nullptr) {
  if (rounds < 1) throw Error(ErrorCode::kInvalidArgument, "boosting needs at least one round");
  if (set.size() == 0) throw Error(ErrorCode::kInsufficientSamples, "empty training set");
  FeatureBins local;
  if (prebinned == nullptr) {
    local = bin_features(set, params.max_thresholds, params.threads);
    prebinned = &local;
  }
  const std::size_t n = set.size();
  std::vector<double> margins(n), weights(n), leaf(n);
  for (std::size_t i = 0; i < n; ++i) margins[i] = params.prior_weight * set.priors[i];
  BoostTrace tr;
  tr.loss.push_back(detail::refresh_weights(set.labels, margins, weights, tr.margin_clamps));
  tr.weight_sums.push_back(std::accumulate(weights.begin(), weights.end(), 0.0));

  const TreeParams tp{params.max_depth, params.leaf_epsilon, params.max_thresholds, params.threads};
  Forest forest;
  forest.prior_weight = params.prior_weight;
  forest.descriptor_length = set.dim;
  forest.trees.reserve(rounds);
  for (std::size_t t = 0; t < rounds; ++t) {
    forest.trees.push_back(train_tree(*prebinned, set.labels, weights, tp, &leaf));
    for (std::size_t i = 0; i < n; ++i) margins[i] += leaf[i];
    tr.loss.push_back(detail::refresh_weights(set.labels, margins, weights, tr.margin_clamps));
    tr.weight_sums.push_back(std::accumulate(weights.begin(), weights.end(), 0.0));
  }
  if (trace) *trace = std::move(tr);
  return forest;
}

}  // namespace samhead
