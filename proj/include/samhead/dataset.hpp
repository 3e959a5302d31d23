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

// A dataset directory:
//
//   dataset.json        {"images": [{"image_id", "width", "height"}, ...]}
//   annotations.jsonl   ground truth
//   proposals.jsonl     scored candidates
//   maps/<id>.fmap      every CNN layer of the image
//   maps/<id>.lmap      optional semantic labels
//   maps/<id>.emap      optional edge intensities

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "samhead/error.hpp"
#include "samhead/featuremap.hpp"
#include "samhead/geometry.hpp"
#include "samhead/io.hpp"

namespace samhead {

struct Dataset {
  std::vector<ImageRecord> images;
  PerImage<GroundTruthBox> annotations;
  PerImage<Candidate> proposals;

  const std::vector<GroundTruthBox>& gts(const std::string& id) const {
    static const std::vector<GroundTruthBox> kEmpty;
    auto it = annotations.find(id);
    return it == annotations.end() ? kEmpty : it->second;
  }
  const std::vector<Candidate>& candidates(const std::string& id) const {
    static const std::vector<Candidate> kEmpty;
    auto it = proposals.find(id);
    return it == proposals.end() ? kEmpty : it->second;
  }
};

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "maps", ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + (dir / "maps").string());
  nlohmann::json index;
  index["images"] = nlohmann::json::array();
  for (const ImageRecord& rec : ds.images) {
    index["images"].push_back(
        {{"image_id", rec.image_id}, {"width", rec.image_w}, {"height", rec.image_h}});
    std::vector<FeatureMap> maps;
    for (const auto& [name, map] : rec.layers) maps.push_back(map);
    write_fmap(dir / "maps" / (rec.image_id + ".fmap"), maps);
    if (rec.labels) write_lmap(dir / "maps" / (rec.image_id + ".lmap"), *rec.labels);
    if (rec.edges) write_emap(dir / "maps" / (rec.image_id + ".emap"), *rec.edges);
  }
  detail::write_text(dir / "dataset.json", index.dump(2) + "\n");
  write_annotations(dir / "annotations.jsonl", ds.annotations);
  write_proposals(dir / "proposals.jsonl", ds.proposals);
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(detail::read_text(dir / "dataset.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, (dir / "dataset.json").string() + ": " + e.what());
  }
  try {
    for (const auto& entry : index.at("images")) {
      ImageRecord rec;
      rec.image_id = entry.at("image_id").get<std::string>();
      rec.image_w = entry.at("width").get<std::uint32_t>();
      rec.image_h = entry.at("height").get<std::uint32_t>();
      for (FeatureMap& m : read_fmap(dir / "maps" / (rec.image_id + ".fmap")))
        rec.layers.emplace(m.layer_name(), std::move(m));
      const fs::path lpath = dir / "maps" / (rec.image_id + ".lmap");
      const fs::path epath = dir / "maps" / (rec.image_id + ".emap");
      if (fs::exists(lpath)) rec.labels = read_lmap(lpath);
      if (fs::exists(epath)) rec.edges = read_emap(epath);
      rec.validate();
      ds.images.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, (dir / "dataset.json").string() + ": " + e.what());
  }
  ds.annotations = read_annotations(dir / "annotations.jsonl");
  ds.proposals = read_proposals(dir / "proposals.jsonl");
  return ds;
}

}  // namespace samhead
