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

// SVG curve plots. FPPI curves are drawn log-log in the Caltech style
// (x: 1e-3..1e1 false positives per image, y: .05..1 miss rate) with the
// legend ranked by MR-2; precision/recall curves use linear unit axes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "samhead/evaluation.hpp"

namespace samhead {

enum class PlotKind { kFppi, kPrecisionRecall };

struct PlotSeries {
  std::string label;
  std::vector<FppiPoint> fppi;
  std::vector<PrPoint> pr;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* series_color(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return colors[i % 8];
}

struct Axes {
  double left = 70, top = 40, width = 480, height = 360;
  double x0, x1, y0, y1;
  bool logx, logy;

  double map(double v, double a, double b, bool lg) const {
    if (lg) {
      v = std::log10(std::max(v, a));
      a = std::log10(a);
      b = std::log10(b);
    }
    return std::clamp((v - a) / (b - a), 0.0, 1.0);
  }
  double px(double x) const { return left + width * map(x, x0, x1, logx); }
  double py(double y) const { return top + height * (1.0 - map(y, y0, y1, logy)); }
};

}  // namespace detail

inline std::string render_svg(PlotKind kind, const std::vector<PlotSeries>& series,
                              const std::string& title) {
  using detail::svg_num;
  const bool fppi = kind == PlotKind::kFppi;
  detail::Axes ax;
  if (fppi) {
    ax.x0 = 1e-3, ax.x1 = 10.0, ax.y0 = 0.05, ax.y1 = 1.0, ax.logx = ax.logy = true;
  } else {
    ax.x0 = 0.0, ax.x1 = 1.0, ax.y0 = 0.0, ax.y1 = 1.0, ax.logx = ax.logy = false;
  }
  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"460\" "
       "viewBox=\"0 0 760 460\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"760\" height=\"460\" fill=\"white\"/>\n";
  if (!title.empty())
    s += "<text x=\"" + svg_num(ax.left + ax.width / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + detail::svg_escape(title) +
         "</text>\n";

  // Grid and ticks.
  std::vector<double> xt, yt;
  if (fppi) {
    xt = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
    yt = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.64, 0.8, 1.0};
  } else {
    for (int i = 0; i <= 10; i += 2) xt.push_back(i / 10.0), yt.push_back(i / 10.0);
  }
  s += "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (double x : xt)
    s += "<line x1=\"" + svg_num(ax.px(x)) + "\" y1=\"" + svg_num(ax.top) + "\" x2=\"" +
         svg_num(ax.px(x)) + "\" y2=\"" + svg_num(ax.top + ax.height) + "\"/>\n";
  for (double y : yt)
    s += "<line x1=\"" + svg_num(ax.left) + "\" y1=\"" + svg_num(ax.py(y)) + "\" x2=\"" +
         svg_num(ax.left + ax.width) + "\" y2=\"" + svg_num(ax.py(y)) + "\"/>\n";
  s += "</g>\n";
  s += "<rect x=\"" + svg_num(ax.left) + "\" y=\"" + svg_num(ax.top) + "\" width=\"" +
       svg_num(ax.width) + "\" height=\"" + svg_num(ax.height) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  auto tick_label = [&](double v) {
    char buf[32];
    if (fppi && v < 1.0 && std::abs(std::log10(v) - std::round(std::log10(v))) < 1e-9)
      std::snprintf(buf, sizeof(buf), "1e%d", static_cast<int>(std::round(std::log10(v))));
    else
      std::snprintf(buf, sizeof(buf), "%g", v);
    return std::string(buf);
  };
  for (double x : xt)
    s += "<text x=\"" + svg_num(ax.px(x)) + "\" y=\"" + svg_num(ax.top + ax.height + 16) +
         "\" text-anchor=\"middle\">" + tick_label(x) + "</text>\n";
  for (double y : yt)
    s += "<text x=\"" + svg_num(ax.left - 6) + "\" y=\"" + svg_num(ax.py(y) + 4) +
         "\" text-anchor=\"end\">" + tick_label(y) + "</text>\n";
  s += "<text x=\"" + svg_num(ax.left + ax.width / 2) + "\" y=\"" +
       svg_num(ax.top + ax.height + 36) + "\" text-anchor=\"middle\">" +
       (fppi ? "false positives per image" : "recall") + "</text>\n";
  s += "<text x=\"18\" y=\"" + svg_num(ax.top + ax.height / 2) +
       "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " + svg_num(ax.top + ax.height / 2) +
       ")\">" + (fppi ? "miss rate" : "precision") + "</text>\n";

  // Legend order: ascending MR-2 for FPPI curves, input order otherwise.
  std::vector<std::size_t> order(series.size());
  std::vector<double> mr(series.size(), 0.0);
  for (std::size_t i = 0; i < series.size(); ++i) {
    order[i] = i;
    if (fppi) mr[i] = log_average_miss_rate(series[i].fppi, -2.0, 9);
  }
  if (fppi)
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return mr[a] < mr[b]; });

  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::size_t i = order[rank];
    const PlotSeries& ps = series[i];
    std::string pts;
    if (fppi) {
      for (const auto& p : ps.fppi)
        pts += svg_num(ax.px(p.fppi)) + "," + svg_num(ax.py(p.miss_rate)) + " ";
    } else {
      for (const auto& p : ps.pr)
        pts += svg_num(ax.px(p.recall)) + "," + svg_num(ax.py(p.precision)) + " ";
    }
    if (!pts.empty()) {
      pts.pop_back();
      s += "<polyline fill=\"none\" stroke=\"" + std::string(detail::series_color(i)) +
           "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    }
    const double ly = ax.top + 14 + 18.0 * static_cast<double>(rank);
    const double lx = ax.left + ax.width + 16;
    s += "<line x1=\"" + svg_num(lx) + "\" y1=\"" + svg_num(ly - 4) + "\" x2=\"" +
         svg_num(lx + 20) + "\" y2=\"" + svg_num(ly - 4) + "\" stroke=\"" +
         detail::series_color(i) + "\" stroke-width=\"2\"/>\n";
    std::string text = detail::svg_escape(ps.label);
    if (fppi) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f%% ", 100.0 * mr[i]);
      text = buf + text;
    }
    s += "<text x=\"" + svg_num(lx + 26) + "\" y=\"" + svg_num(ly) + "\">" + text + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace samhead
