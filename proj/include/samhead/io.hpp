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

// File formats (all little-endian):
//
//   FMAP: "FMAP" | u32 version=1 | u32 layer_count | per layer:
//         u32 name_len | name bytes | u32 stride | u32 C | u32 H | u32 W |
//         C*H*W f32, channel-major, row-major within a channel
//   LMAP: "LMAP" | u32 version=1 | u32 H | u32 W | H*W u8
//   EMAP: "EMAP" | u32 version=1 | u32 H | u32 W | H*W f32
//
// Annotations and proposals are JSON Lines, one image per line:
//   {"image_id": "...", "boxes": [{"x":..,"y":..,"w":..,"h":..,
//                                  "occl":..,"trunc":..,"ignore":..}]}
//   {"image_id": "...", "boxes": [{"x":..,"y":..,"w":..,"h":..,"score":..}]}
//
// Detections are CSV with header `image_id,x,y,w,h,score`.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "samhead/error.hpp"
#include "samhead/featuremap.hpp"
#include "samhead/geometry.hpp"

namespace samhead {

using Bytes = std::vector<std::uint8_t>;

namespace detail {

inline constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put_le(Bytes& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void expect_magic(std::string_view magic) {
    if (remaining() < magic.size() ||
        std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0)
      throw Error(ErrorCode::kBadMagic, "expected magic '" + std::string(magic) + "'");
    pos_ += magic.size();
  }

  void expect_version() {
    const auto v = get<std::uint32_t>();
    if (v != kFormatVersion)
      throw Error(ErrorCode::kUnsupportedVersion, "unsupported version " + std::to_string(v));
  }

  void expect_end() const {
    if (pos_ != bytes_.size())
      throw Error(ErrorCode::kTrailingData, "unexpected bytes after payload");
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::kTruncated, "payload truncated");
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline void put_magic(Bytes& out, std::string_view magic) {
  out.insert(out.end(), magic.begin(), magic.end());
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

// Checked count product; dimension fields come from untrusted files.
inline std::size_t checked_volume(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                                  std::size_t available, std::size_t elem) {
  const std::uint64_t limit = available / elem;
  if (a != 0 && b > limit / a) throw Error(ErrorCode::kTruncated, "payload truncated");
  const std::uint64_t ab = a * b;
  if (ab != 0 && c > limit / ab) throw Error(ErrorCode::kTruncated, "payload truncated");
  return static_cast<std::size_t>(ab * c);
}

}  // namespace detail

// --- FMAP -------------------------------------------------------------------

inline Bytes encode_fmap(std::span<const FeatureMap> maps) {
  Bytes out;
  detail::put_magic(out, "FMAP");
  detail::put_le<std::uint32_t>(out, detail::kFormatVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(maps.size()));
  for (const FeatureMap& m : maps) {
    m.validate();
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.layer_name().size()));
    out.insert(out.end(), m.layer_name().begin(), m.layer_name().end());
    detail::put_le<std::uint32_t>(out, m.stride());
    detail::put_le<std::uint32_t>(out, m.channels());
    detail::put_le<std::uint32_t>(out, m.height());
    detail::put_le<std::uint32_t>(out, m.width());
    out.reserve(out.size() + m.data().size() * 4);
    for (float v : m.data()) detail::put_le<float>(out, v);
  }
  return out;
}

inline std::vector<FeatureMap> decode_fmap(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("FMAP");
  r.expect_version();
  const auto count = r.get<std::uint32_t>();
  std::vector<FeatureMap> maps;
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.get_string(name_len);
    const auto stride = r.get<std::uint32_t>();
    const auto c = r.get<std::uint32_t>();
    const auto h = r.get<std::uint32_t>();
    const auto w = r.get<std::uint32_t>();
    if (!is_supported_stride(stride))
      throw Error(ErrorCode::kBadDimensions,
                  "layer " + name + ": stride " + std::to_string(stride) + " not supported");
    if (c == 0 || h == 0 || w == 0)
      throw Error(ErrorCode::kBadDimensions, "layer " + name + ": zero dimension");
    const std::size_t n = detail::checked_volume(c, h, w, r.remaining(), 4);
    r.need(n * 4);
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = r.get<float>();
    maps.emplace_back(std::move(name), stride, c, h, w, std::move(data));
  }
  r.expect_end();
  return maps;
}

inline void write_fmap(const std::filesystem::path& path, std::span<const FeatureMap> maps) {
  detail::write_file(path, encode_fmap(maps));
}

inline std::vector<FeatureMap> read_fmap(const std::filesystem::path& path) {
  return decode_fmap(detail::read_file(path));
}

// --- LMAP / EMAP ------------------------------------------------------------

inline Bytes encode_lmap(const LabelMap& map) {
  Bytes out;
  detail::put_magic(out, "LMAP");
  detail::put_le<std::uint32_t>(out, detail::kFormatVersion);
  detail::put_le<std::uint32_t>(out, map.height());
  detail::put_le<std::uint32_t>(out, map.width());
  out.insert(out.end(), map.data().begin(), map.data().end());
  return out;
}

inline LabelMap decode_lmap(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("LMAP");
  r.expect_version();
  const auto h = r.get<std::uint32_t>();
  const auto w = r.get<std::uint32_t>();
  if (h == 0 || w == 0) throw Error(ErrorCode::kBadDimensions, "label map: zero dimension");
  const std::size_t n = detail::checked_volume(h, w, 1, r.remaining(), 1);
  r.need(n);
  std::vector<std::uint8_t> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = r.get<std::uint8_t>();
  r.expect_end();
  return LabelMap(h, w, std::move(data));
}

inline Bytes encode_emap(const EdgeMap& map) {
  Bytes out;
  detail::put_magic(out, "EMAP");
  detail::put_le<std::uint32_t>(out, detail::kFormatVersion);
  detail::put_le<std::uint32_t>(out, map.height());
  detail::put_le<std::uint32_t>(out, map.width());
  for (float v : map.data()) detail::put_le<float>(out, v);
  return out;
}

inline EdgeMap decode_emap(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("EMAP");
  r.expect_version();
  const auto h = r.get<std::uint32_t>();
  const auto w = r.get<std::uint32_t>();
  if (h == 0 || w == 0) throw Error(ErrorCode::kBadDimensions, "edge map: zero dimension");
  const std::size_t n = detail::checked_volume(h, w, 1, r.remaining(), 4);
  r.need(n * 4);
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = r.get<float>();
  r.expect_end();
  return EdgeMap(h, w, std::move(data));
}

inline void write_lmap(const std::filesystem::path& path, const LabelMap& map) {
  detail::write_file(path, encode_lmap(map));
}
inline LabelMap read_lmap(const std::filesystem::path& path) {
  return decode_lmap(detail::read_file(path));
}
inline void write_emap(const std::filesystem::path& path, const EdgeMap& map) {
  detail::write_file(path, encode_emap(map));
}
inline EdgeMap read_emap(const std::filesystem::path& path) {
  return decode_emap(detail::read_file(path));
}

// --- JSON Lines boxes -------------------------------------------------------

template <typename T>
using PerImage = std::map<std::string, std::vector<T>>;

inline std::string annotations_to_jsonl(const PerImage<GroundTruthBox>& gts) {
  std::string out;
  for (const auto& [id, boxes] : gts) {
    nlohmann::json line;
    line["image_id"] = id;
    line["boxes"] = nlohmann::json::array();
    for (const auto& g : boxes)
      line["boxes"].push_back({{"x", g.box.x()}, {"y", g.box.y()}, {"w", g.box.w()},
                               {"h", g.box.h()}, {"occl", g.occlusion},
                               {"trunc", g.truncation}, {"ignore", g.ignore}});
    out += line.dump();
    out += '\n';
  }
  return out;
}

inline std::string proposals_to_jsonl(const PerImage<Candidate>& props) {
  std::string out;
  for (const auto& [id, boxes] : props) {
    nlohmann::json line;
    line["image_id"] = id;
    line["boxes"] = nlohmann::json::array();
    for (const auto& c : boxes)
      line["boxes"].push_back({{"x", c.box.x()}, {"y", c.box.y()}, {"w", c.box.w()},
                               {"h", c.box.h()}, {"score", c.score}});
    out += line.dump();
    out += '\n';
  }
  return out;
}

namespace detail {

template <typename T, typename Fn>
PerImage<T> parse_jsonl(const std::string& text, Fn&& make) {
  PerImage<T> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto& dst = out[j.at("image_id").get<std::string>()];
      for (const auto& b : j.at("boxes")) {
        const Box box(b.at("x").get<double>(), b.at("y").get<double>(), b.at("w").get<double>(),
                      b.at("h").get<double>());
        dst.push_back(make(box, b));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detail

inline PerImage<GroundTruthBox> annotations_from_jsonl(const std::string& text) {
  return detail::parse_jsonl<GroundTruthBox>(text, [](const Box& box, const nlohmann::json& b) {
    return GroundTruthBox(box, b.value("occl", 0.0), b.value("trunc", 0.0),
                          b.value("ignore", false));
  });
}

inline PerImage<Candidate> proposals_from_jsonl(const std::string& text) {
  return detail::parse_jsonl<Candidate>(text, [](const Box& box, const nlohmann::json& b) {
    return Candidate(box, b.at("score").get<double>());
  });
}

inline void write_annotations(const std::filesystem::path& path,
                              const PerImage<GroundTruthBox>& gts) {
  detail::write_text(path, annotations_to_jsonl(gts));
}
inline PerImage<GroundTruthBox> read_annotations(const std::filesystem::path& path) {
  return annotations_from_jsonl(detail::read_text(path));
}
inline void write_proposals(const std::filesystem::path& path, const PerImage<Candidate>& props) {
  detail::write_text(path, proposals_to_jsonl(props));
}
inline PerImage<Candidate> read_proposals(const std::filesystem::path& path) {
  return proposals_from_jsonl(detail::read_text(path));
}

// --- Detections CSV ---------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string detections_to_csv(const PerImage<Detection>& dets) {
  std::string out = "image_id,x,y,w,h,score\n";
  for (const auto& [id, list] : dets)
    for (const auto& d : list)
      out += id + "," + format_double(d.box.x()) + "," + format_double(d.box.y()) + "," +
             format_double(d.box.w()) + "," + format_double(d.box.h()) + "," +
             format_double(d.score) + "\n";
  return out;
}

inline PerImage<Detection> detections_from_csv(const std::string& text) {
  PerImage<Detection> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("image_id", 0) == 0) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 6)
      throw Error(ErrorCode::kParse, "detections line " + std::to_string(lineno) +
                                         ": expected 6 fields");
    try {
      const Box box(std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3]),
                    std::stod(fields[4]));
      out[fields[0]].emplace_back(box, std::stod(fields[5]));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParse, "detections line " + std::to_string(lineno) +
                                         ": bad number");
    }
  }
  return out;
}

inline void write_detections(const std::filesystem::path& path, const PerImage<Detection>& d) {
  detail::write_text(path, detections_to_csv(d));
}
inline PerImage<Detection> read_detections(const std::filesystem::path& path) {
  return detections_from_csv(detail::read_text(path));
}

}  // namespace samhead
