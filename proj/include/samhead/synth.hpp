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

// Synthetic detection data with scale-dependent layer informativeness.
//
// Every feature value starts as N(0, noise_sigma). Pedestrians and
// distractors ("objects") then deposit into each layer, per feature cell
// weighted by the fraction of the cell the box covers:
//
//   every channel     += strength * objectness
//   template c < T    += strength * g_c * (r * B_own(u,v) + (1 - r) * B_mix(u,v))
//
// where (u,v) is the cell position inside the box, B_ped is a Gaussian bump
// at a per-channel location, B_dis is B_ped mirrored, and B_mix is their
// mean. r = q^p / (q^p + q0^p) * q1^p / (q^p + q1^p) with q = box height /
// stride, so an object that spans too few cells of a layer, or too many for
// its receptive field, loses its class-specific pattern there.
// Pedestrians and distractors therefore look the same to every channel
// except through the resolution-limited templates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "samhead/dataset.hpp"
#include "samhead/error.hpp"
#include "samhead/featuremap.hpp"
#include "samhead/geometry.hpp"
#include "samhead/random.hpp"

namespace samhead {

inline constexpr std::uint8_t kPedestrianLabel = 15;
inline constexpr double kBackgroundIou = 0.3;
inline constexpr int kPlacementAttempts = 20;

struct SynthLayer {
  std::string name;
  std::uint32_t stride = 8;
  std::uint32_t channels = 16;
  double strength = 1.0;
};

inline std::vector<SynthLayer> default_synth_layers() {
  return {{"conv3", 4, 256, 0.55},
          {"conv4", 8, 512, 0.625},
          {"conv4a", 4, 512, 0.625},
          {"conv5", 16, 512, 1.0},
          {"conv5a", 8, 512, 1.0}};
}

struct SynthConfig {
  std::size_t image_count = 20;
  std::uint32_t image_w = 640;
  std::uint32_t image_h = 480;
  std::vector<SynthLayer> layers = default_synth_layers();
  std::uint32_t template_channels = 32;

  std::size_t pedestrians_min = 1;
  std::size_t pedestrians_max = 3;
  double small_fraction = 0.5;
  double small_min = 50.0;
  double small_max = 80.0;
  double large_min = 80.0;
  double large_max = 200.0;
  double aspect = 0.41;

  double distractor_density = 1.5;      // mean distractors per image
  double clutter_per_distractor = 30.0; // background windows per unit density
  std::size_t proposals_per_object = 4;
  std::size_t near_per_object = 2;
  double jitter = 0.04;
  double max_object_iou = 0.2;

  double noise_sigma = 0.35;
  double objectness = 0.5;
  double template_width = 0.2;
  double resolution_q0 = 8.5;
  double resolution_q1 = 24.0;
  double resolution_power = 10.0;

  double score_gain = 8.0;
  double score_noise = 0.5;

  double occluded_fraction = 0.15;
  double ignore_fraction = 0.02;

  bool emit_labels = true;
  std::size_t background_regions = 6;
  double label_noise = 0.02;
  double distractor_label_confusion = 0.25;

  bool emit_edges = true;
  std::size_t edge_segments = 8;
  double edge_noise = 0.05;

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
    if (image_count == 0) bad("image_count must be positive");
    if (image_w == 0 || image_h == 0) bad("image size must be positive");
    if (layers.empty()) bad("at least one layer is required");
    for (const auto& l : layers) {
      if (l.name.empty()) bad("layer name must be non-empty");
      if (!is_supported_stride(l.stride)) bad("layer " + l.name + ": unsupported stride");
      if (l.channels == 0) bad("layer " + l.name + ": channels must be positive");
      if (!(l.strength >= 0.0)) bad("layer " + l.name + ": strength must be >= 0");
    }
    if (pedestrians_max < pedestrians_min) bad("pedestrians_max < pedestrians_min");
    if (!(small_min > 0.0 && small_min < small_max)) bad("empty small height range");
    if (!(large_min > 0.0 && large_min < large_max)) bad("empty large height range");
    if (!(small_fraction >= 0.0 && small_fraction <= 1.0)) bad("small_fraction outside [0,1]");
    if (!(aspect > 0.0)) bad("aspect must be positive");
    if (!(distractor_density >= 0.0)) bad("distractor_density must be >= 0");
    if (!(clutter_per_distractor >= 0.0)) bad("clutter_per_distractor must be >= 0");
    if (!(jitter >= 0.0)) bad("jitter must be >= 0");
    if (!(noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
    if (!(template_width > 0.0)) bad("template_width must be positive");
    if (!(resolution_q0 > 0.0 && resolution_power > 0.0)) bad("resolution curve must be positive");
    if (!(resolution_q1 > resolution_q0)) bad("resolution_q1 must exceed resolution_q0");
    if (!(label_noise >= 0.0 && label_noise <= 1.0)) bad("label_noise outside [0,1]");
    if (!(edge_noise >= 0.0 && edge_noise <= 1.0)) bad("edge_noise outside [0,1]");
    if (!(max_object_iou > 0.0 && max_object_iou <= 1.0)) bad("max_object_iou outside (0,1]");
    if (!(occluded_fraction >= 0.0 && occluded_fraction <= 1.0))
      bad("occluded_fraction outside [0,1]");
    if (!(ignore_fraction >= 0.0 && ignore_fraction <= 1.0)) bad("ignore_fraction outside [0,1]");
  }
};

namespace detail {

struct SynthObject {
  Box box;
  bool pedestrian = true;
  double occlusion = 0.0;  // bottom fraction hidden
};

inline double synth_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Bump location of template channel c, inside the box, in [0.15, 0.85]^2.
inline std::pair<double, double> template_center(std::uint32_t c) {
  const double u = std::fmod(0.5 + 0.6180339887498949 * c, 1.0);
  const double v = std::fmod(0.25 + 0.7548776662466927 * c, 1.0);
  return {0.15 + 0.7 * u, 0.15 + 0.7 * v};
}

inline double template_gain(std::uint32_t c) { return 1.0 / (1.0 + 0.15 * c); }

inline double resolution(double q, const SynthConfig& cfg) {
  const double a = std::pow(q, cfg.resolution_power);
  const double hi = std::pow(cfg.resolution_q1, cfg.resolution_power);
  return a / (a + std::pow(cfg.resolution_q0, cfg.resolution_power)) * hi / (a + hi);
}

inline Box clip_box_to_image(const Box& b, double w, double h) {
  const double x1 = std::clamp(b.x(), 0.0, w - 1.0);
  const double y1 = std::clamp(b.y(), 0.0, h - 1.0);
  const double x2 = std::clamp(b.x2(), x1 + 1.0, w);
  const double y2 = std::clamp(b.y2(), y1 + 1.0, h);
  return Box::from_corners(x1, y1, x2, y2);
}

inline FeatureMap synth_layer(const SynthLayer& layer, const std::vector<SynthObject>& objects,
                              const SynthConfig& cfg, Rng& rng) {
  const std::uint32_t s = layer.stride;
  const std::uint32_t mw = (cfg.image_w + s - 1) / s;
  const std::uint32_t mh = (cfg.image_h + s - 1) / s;
  FeatureMap map = FeatureMap::zeros(layer.name, s, layer.channels, mh, mw);
  auto data = map.mutable_data();
  for (float& v : data) v = static_cast<float>(rng.normal(0.0, cfg.noise_sigma));

  const std::uint32_t tc = std::min(cfg.template_channels, layer.channels);
  std::vector<std::pair<double, double>> centers(tc);
  for (std::uint32_t c = 0; c < tc; ++c) centers[c] = template_center(c);
  const double inv2w2 = 1.0 / (2.0 * cfg.template_width * cfg.template_width);
  const std::size_t plane = std::size_t{mh} * mw;

  for (const SynthObject& obj : objects) {
    const Box& b = obj.box;
    const double r = resolution(b.h() / s, cfg);
    const double visible_y2 = b.y() + (1.0 - obj.occlusion) * b.h();
    const auto gx0 = static_cast<std::int64_t>(std::max(0.0, std::floor(b.x() / s)));
    const auto gy0 = static_cast<std::int64_t>(std::max(0.0, std::floor(b.y() / s)));
    const auto gx1 = std::min<std::int64_t>(mw, static_cast<std::int64_t>(std::ceil(b.x2() / s)));
    const auto gy1 =
        std::min<std::int64_t>(mh, static_cast<std::int64_t>(std::ceil(visible_y2 / s)));
    for (std::int64_t gy = gy0; gy < gy1; ++gy) {
      const double cy0 = std::max<double>(gy * s, b.y());
      const double cy1 = std::min<double>((gy + 1) * s, visible_y2);
      if (cy1 <= cy0) continue;
      for (std::int64_t gx = gx0; gx < gx1; ++gx) {
        const double cx0 = std::max<double>(gx * s, b.x());
        const double cx1 = std::min<double>((gx + 1) * s, b.x2());
        if (cx1 <= cx0) continue;
        const double cover = (cx1 - cx0) * (cy1 - cy0) / (double(s) * s);
        const double u = (0.5 * (cx0 + cx1) - b.x()) / b.w();
        const double v = (0.5 * (cy0 + cy1) - b.y()) / b.h();
        const std::size_t cell = static_cast<std::size_t>(gy) * mw + static_cast<std::size_t>(gx);
        const double base = layer.strength * cfg.objectness * cover;
        for (std::uint32_t c = 0; c < layer.channels; ++c)
          data[c * plane + cell] += static_cast<float>(base);
        for (std::uint32_t c = 0; c < tc; ++c) {
          const auto [tu, tv] = centers[c];
          const double bp = std::exp(-((u - tu) * (u - tu) + (v - tv) * (v - tv)) * inv2w2);
          const double bd = std::exp(-((u - 1.0 + tu) * (u - 1.0 + tu) +
                                       (v - 1.0 + tv) * (v - 1.0 + tv)) * inv2w2);
          const double own = obj.pedestrian ? bp : bd;
          const double val = r * own + (1.0 - r) * 0.5 * (bp + bd);
          data[c * plane + cell] +=
              static_cast<float>(layer.strength * template_gain(c) * val * cover);
        }
      }
    }
  }
  return map;
}

inline bool inside_ellipse(double px, double py, const Box& b) {
  const double dx = (px - b.cx()) / (0.5 * b.w());
  const double dy = (py - b.cy()) / (0.5 * b.h());
  return dx * dx + dy * dy <= 1.0;
}

inline std::uint8_t random_background_class(Rng& rng) {
  // 1..20 without the pedestrian class.
  std::uint8_t c = static_cast<std::uint8_t>(rng.integer(1, kMaxLabel - 1));
  if (c >= kPedestrianLabel) ++c;
  return c;
}

inline LabelMap synth_labels(const std::vector<SynthObject>& objects, const SynthConfig& cfg,
                             Rng& rng) {
  const std::uint32_t w = cfg.image_w, h = cfg.image_h;
  std::vector<std::uint8_t> px(std::size_t{w} * h, 0);
  auto paint_rect = [&](double x1, double y1, double x2, double y2, std::uint8_t c) {
    const auto xa = static_cast<std::int64_t>(std::max(0.0, std::floor(x1)));
    const auto ya = static_cast<std::int64_t>(std::max(0.0, std::floor(y1)));
    const auto xb = std::min<std::int64_t>(w, static_cast<std::int64_t>(std::ceil(x2)));
    const auto yb = std::min<std::int64_t>(h, static_cast<std::int64_t>(std::ceil(y2)));
    for (std::int64_t y = ya; y < yb; ++y)
      for (std::int64_t x = xa; x < xb; ++x) px[static_cast<std::size_t>(y) * w + x] = c;
  };
  for (std::size_t k = 0; k < cfg.background_regions; ++k) {
    const double rw = rng.uniform(20.0, 160.0), rh = rng.uniform(20.0, 160.0);
    const double x = rng.uniform(-20.0, w), y = rng.uniform(-20.0, h);
    paint_rect(x, y, x + rw, y + rh, random_background_class(rng));
  }
  for (const SynthObject& obj : objects) {
    std::uint8_t c = kPedestrianLabel;
    if (!obj.pedestrian && !rng.bernoulli(cfg.distractor_label_confusion))
      c = random_background_class(rng);
    const Box& b = obj.box;
    const double visible_y2 = b.y() + (1.0 - obj.occlusion) * b.h();
    const std::uint8_t occluder = random_background_class(rng);
    const auto xa = static_cast<std::int64_t>(std::max(0.0, std::floor(b.x())));
    const auto ya = static_cast<std::int64_t>(std::max(0.0, std::floor(b.y())));
    const auto xb = std::min<std::int64_t>(w, static_cast<std::int64_t>(std::ceil(b.x2())));
    const auto yb = std::min<std::int64_t>(h, static_cast<std::int64_t>(std::ceil(b.y2())));
    for (std::int64_t y = ya; y < yb; ++y)
      for (std::int64_t x = xa; x < xb; ++x) {
        const double cx = x + 0.5, cy = y + 0.5;
        if (cy >= visible_y2)
          px[static_cast<std::size_t>(y) * w + x] = occluder;
        else if (inside_ellipse(cx, cy, b))
          px[static_cast<std::size_t>(y) * w + x] = c;
      }
  }
  for (auto& v : px)
    if (rng.bernoulli(cfg.label_noise)) v = static_cast<std::uint8_t>(rng.integer(0, kMaxLabel));
  return LabelMap(h, w, std::move(px));
}

inline EdgeMap synth_edges(const std::vector<SynthObject>& objects, const SynthConfig& cfg,
                           Rng& rng) {
  const std::uint32_t w = cfg.image_w, h = cfg.image_h;
  std::vector<float> px(std::size_t{w} * h, 0.0f);
  auto put = [&](double x, double y, float v) {
    const auto xi = static_cast<std::int64_t>(std::floor(x));
    const auto yi = static_cast<std::int64_t>(std::floor(y));
    if (xi < 0 || yi < 0 || xi >= w || yi >= h) return;
    float& dst = px[static_cast<std::size_t>(yi) * w + xi];
    dst = std::max(dst, v);
  };
  auto line = [&](double x0, double y0, double x1, double y1, float v) {
    const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
    const auto steps = static_cast<std::int64_t>(std::ceil(len)) + 1;
    for (std::int64_t k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(steps);
      put(x0 + t * (x1 - x0), y0 + t * (y1 - y0), v);
    }
  };
  for (std::size_t k = 0; k < cfg.edge_segments; ++k) {
    const double x0 = rng.uniform(0.0, w), y0 = rng.uniform(0.0, h);
    const double x1 = x0 + rng.uniform(-80.0, 80.0), y1 = y0 + rng.uniform(-80.0, 80.0);
    line(x0, y0, x1, y1, static_cast<float>(rng.uniform(0.3, 0.8)));
  }
  for (const SynthObject& obj : objects) {
    const Box& b = obj.box;
    const auto v = static_cast<float>(rng.uniform(0.75, 1.0));
    if (obj.pedestrian) {
      const double perimeter = 3.2 * (b.w() + b.h());
      const auto steps = static_cast<std::int64_t>(std::ceil(perimeter)) + 8;
      for (std::int64_t k = 0; k < steps; ++k) {
        const double t = 2.0 * 3.141592653589793 * static_cast<double>(k) / steps;
        const double y = b.cy() + 0.5 * b.h() * std::sin(t);
        if (y > b.y() + (1.0 - obj.occlusion) * b.h()) continue;
        put(b.cx() + 0.5 * b.w() * std::cos(t), y, v);
      }
    } else {
      line(b.x(), b.y(), b.x2(), b.y(), v);
      line(b.x2(), b.y(), b.x2(), b.y2(), v);
      line(b.x2(), b.y2(), b.x(), b.y2(), v);
      line(b.x(), b.y2(), b.x(), b.y(), v);
    }
  }
  for (auto& v : px)
    if (rng.bernoulli(cfg.edge_noise))
      v = std::max(v, static_cast<float>(rng.uniform(0.0, 0.5)));
  return EdgeMap(h, w, std::move(px));
}

inline std::string synth_image_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05zu", i);
  return buf;
}

}  // namespace detail

// Images [first, first + count) of the sequence for (cfg, seed); each image
// depends only on (cfg, seed, index), so ranges concatenate to the full set.
inline Dataset synth_generate_range(const SynthConfig& cfg, std::uint64_t seed, std::size_t first,
                                    std::size_t count) {
  cfg.validate();
  Dataset ds;
  const double W = cfg.image_w, H = cfg.image_h;
  for (std::size_t i = first; i < first + count; ++i) {
    Rng rng(derive_seed(seed, i));
    const std::string id = detail::synth_image_id(i);

    std::vector<detail::SynthObject> objects;
    std::vector<GroundTruthBox> gts;
    auto draw_box = [&](bool& small) {
      small = rng.bernoulli(cfg.small_fraction);
      double hgt = small ? rng.uniform(cfg.small_min, cfg.small_max)
                         : rng.uniform(cfg.large_min, cfg.large_max);
      hgt = std::min(hgt, H);
      const double wid = std::min(cfg.aspect * hgt, W);
      const double x = rng.uniform(-0.15 * wid, W - 0.85 * wid);
      const double y = rng.uniform(0.0, H - hgt);
      return Box(x, y, wid, hgt);
    };
    // Raw box kept clear of every placed object, or nullopt after
    // kPlacementAttempts tries.
    auto place = [&](bool& small) -> std::optional<Box> {
      for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
        const Box b = draw_box(small);
        const Box clipped = detail::clip_box_to_image(b, W, H);
        bool clear = true;
        for (const auto& obj : objects)
          if (iou(clipped, obj.box) >= cfg.max_object_iou) clear = false;
        if (clear) return b;
      }
      return std::nullopt;
    };
    const auto peds = static_cast<std::size_t>(
        rng.integer(static_cast<std::int64_t>(cfg.pedestrians_min),
                    static_cast<std::int64_t>(cfg.pedestrians_max)));
    for (std::size_t k = 0; k < peds; ++k) {
      bool small = false;
      const auto b = place(small);
      const double occl = rng.bernoulli(cfg.occluded_fraction) ? rng.uniform(0.1, 0.8) : 0.0;
      const bool ignore = rng.bernoulli(cfg.ignore_fraction);
      if (!b) continue;
      const Box clipped = detail::clip_box_to_image(*b, W, H);
      const double trunc = std::clamp(1.0 - clipped.area() / b->area(), 0.0, 1.0);
      objects.push_back({clipped, true, occl});
      gts.emplace_back(clipped, occl, trunc, ignore);
    }
    const std::size_t distractors = rng.poisson(cfg.distractor_density);
    for (std::size_t k = 0; k < distractors; ++k) {
      bool small = false;
      if (const auto b = place(small))
        objects.push_back({detail::clip_box_to_image(*b, W, H), false, 0.0});
    }

    // Proposals: jittered copies of every object, plus near misses and clutter
    // that overlap no object by more than kBackgroundIou.
    auto background = [&](const Box& b) {
      for (const auto& obj : objects)
        if (iou(b, obj.box) >= kBackgroundIou) return false;
      return true;
    };
    std::vector<Box> boxes;
    for (const auto& obj : objects) {
      const Box& b = obj.box;
      for (std::size_t k = 0; k < cfg.proposals_per_object; ++k) {
        const double dx = rng.normal(0.0, cfg.jitter) * b.w();
        const double dy = rng.normal(0.0, cfg.jitter) * b.h();
        const double sc = std::exp(rng.normal(0.0, cfg.jitter));
        const double nh = b.h() * sc, nw = b.w() * sc;
        boxes.push_back(Box(b.cx() + dx - 0.5 * nw, b.cy() + dy - 0.5 * nh, nw, nh));
      }
      for (std::size_t k = 0; k < cfg.near_per_object && cfg.distractor_density > 0.0; ++k) {
        for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
          const double ang = rng.uniform(0.0, 2.0 * 3.141592653589793);
          const double dist = rng.uniform(0.6, 1.2);
          const Box nb = detail::clip_box_to_image(
              Box(b.x() + std::cos(ang) * dist * b.w(), b.y() + std::sin(ang) * dist * b.h(),
                  b.w(), b.h()),
              W, H);
          if (background(nb)) {
            boxes.push_back(nb);
            break;
          }
        }
      }
    }
    const auto clutter = static_cast<std::size_t>(
        std::llround(cfg.distractor_density * cfg.clutter_per_distractor));
    for (std::size_t k = 0; k < clutter; ++k) {
      for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
        const double hgt = std::min(H, rng.uniform(0.6 * cfg.small_min, cfg.large_max));
        const double wid = std::min(W, cfg.aspect * hgt * rng.uniform(0.8, 1.25));
        const Box cb(rng.uniform(0.0, W - wid), rng.uniform(0.0, H - hgt), wid, hgt);
        if (background(cb)) {
          boxes.push_back(cb);
          break;
        }
      }
    }
    std::vector<Candidate> cands;
    cands.reserve(boxes.size());
    for (const Box& raw : boxes) {
      const Box b = detail::clip_box_to_image(raw, W, H);
      double best = 0.0;
      for (const auto& obj : objects) best = std::max(best, iou(b, obj.box));
      const double z = cfg.score_gain * (best - 0.5) + rng.normal(0.0, cfg.score_noise);
      cands.emplace_back(b, std::clamp(detail::synth_sigmoid(z), 0.0, 1.0));
    }

    ImageRecord rec;
    rec.image_id = id;
    rec.image_w = cfg.image_w;
    rec.image_h = cfg.image_h;
    for (const SynthLayer& layer : cfg.layers)
      rec.layers.emplace(layer.name, detail::synth_layer(layer, objects, cfg, rng));
    if (cfg.emit_labels) rec.labels = detail::synth_labels(objects, cfg, rng);
    if (cfg.emit_edges) rec.edges = detail::synth_edges(objects, cfg, rng);
    ds.images.push_back(std::move(rec));
    ds.annotations[id] = std::move(gts);
    ds.proposals[id] = std::move(cands);
  }
  return ds;
}

// Pure function of (cfg, seed).
inline Dataset synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  return synth_generate_range(cfg, seed, 0, cfg.image_count);
}

}  // namespace samhead
