// Copyright 2026 The CPT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpt/error.hpp"
#include "cpt/geometry.hpp"
#include "cpt/targets.hpp"

// Dataset JSON is a COCO-compatible subset:
//   images:      [{id, width, height}]
//   annotations: [{id, image_id, category_id, bbox: [x, y, w, h],
//                  area?, iscrowd?, keypoints?: [x, y, v, ...],
//                  depth?, dims?: [h, w, l], yaw?}]
//   categories:  [{id, name}]
// Category ids are remapped to dense indices in ascending id order.

namespace cpt {

struct ImageInfo {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
};

struct Category {
  std::int64_t id = 0;
  std::string name;
};

struct DatasetAnnotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  ObjectAnnotation object;  // category is the dense index
  double area = 0;          // "area" field when present, else box area
  bool iscrowd = false;
};

struct Dataset {
  std::vector<ImageInfo> images;                // sorted by id
  std::vector<DatasetAnnotation> annotations;   // sorted by id
  std::vector<Category> categories;             // sorted by id; index = dense category
  std::vector<std::string> warnings;
  std::size_t clamped = 0;
  std::size_t dropped = 0;

  /// Annotation indices per image, aligned with `images`.
  std::vector<std::vector<std::size_t>> annotations_by_image() const {
    std::map<std::int64_t, std::size_t> slot;
    for (std::size_t i = 0; i < images.size(); ++i) slot[images[i].id] = i;
    std::vector<std::vector<std::size_t>> out(images.size());
    for (std::size_t a = 0; a < annotations.size(); ++a) out[slot.at(annotations[a].image_id)].push_back(a);
    return out;
  }

  std::vector<ObjectAnnotation> objects_of(std::size_t image_index,
                                           const std::vector<std::vector<std::size_t>>& by_image) const {
    std::vector<ObjectAnnotation> out;
    for (auto a : by_image[image_index]) out.push_back(annotations[a].object);
    return out;
  }
};

namespace detail {

template <typename V>
V field(const nlohmann::json& obj, const char* name, const std::string& where) {
  if (!obj.contains(name)) throw InputError(where + ": missing field '" + name + "'");
  try {
    return obj.at(name).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(where + ": field '" + name + "' has the wrong type");
  }
}

}  // namespace detail

inline Dataset parse_dataset(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InputError("dataset: top level must be an object");
  for (const char* key : {"images", "annotations", "categories"}) {
    if (!doc.contains(key) || !doc.at(key).is_array()) {
      throw InputError(std::string("dataset: field '") + key + "' must be an array");
    }
  }
  Dataset ds;

  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < doc["categories"].size(); ++i) {
    const auto& c = doc["categories"][i];
    const std::string where = "categories[" + std::to_string(i) + "]";
    Category cat{detail::field<std::int64_t>(c, "id", where), c.value("name", std::string())};
    if (!seen.insert(cat.id).second) throw InputError(where + ": duplicate category id " + std::to_string(cat.id));
    ds.categories.push_back(cat);
  }
  std::sort(ds.categories.begin(), ds.categories.end(), [](const Category& a, const Category& b) { return a.id < b.id; });
  std::map<std::int64_t, int> dense;
  for (std::size_t i = 0; i < ds.categories.size(); ++i) dense[ds.categories[i].id] = static_cast<int>(i);

  seen.clear();
  std::map<std::int64_t, ImageInfo> images;
  for (std::size_t i = 0; i < doc["images"].size(); ++i) {
    const auto& im = doc["images"][i];
    const std::string where = "images[" + std::to_string(i) + "]";
    ImageInfo info{detail::field<std::int64_t>(im, "id", where), detail::field<int>(im, "width", where),
                   detail::field<int>(im, "height", where)};
    require(info.width >= 1 && info.height >= 1, where + ": width and height must be >= 1");
    if (!seen.insert(info.id).second) throw InputError(where + ": duplicate image id " + std::to_string(info.id));
    images[info.id] = info;
  }
  for (const auto& [id, info] : images) ds.images.push_back(info);

  seen.clear();
  for (std::size_t i = 0; i < doc["annotations"].size(); ++i) {
    const auto& a = doc["annotations"][i];
    const std::string where = "annotations[" + std::to_string(i) + "]";
    DatasetAnnotation ann;
    ann.id = detail::field<std::int64_t>(a, "id", where);
    ann.image_id = detail::field<std::int64_t>(a, "image_id", where);
    const auto category_id = detail::field<std::int64_t>(a, "category_id", where);
    const auto bbox = detail::field<std::vector<double>>(a, "bbox", where);
    if (bbox.size() != 4) throw InputError(where + ": field 'bbox' must be [x, y, w, h]");
    if (!seen.insert(ann.id).second) throw InputError(where + ": duplicate annotation id " + std::to_string(ann.id));

    auto drop = [&](const std::string& why) {
      ds.warnings.push_back(where + " (id " + std::to_string(ann.id) + "): dropped, " + why);
      ++ds.dropped;
    };
    const auto img = images.find(ann.image_id);
    if (img == images.end()) {
      drop("unknown image_id");
      continue;
    }
    const auto cat = dense.find(category_id);
    if (cat == dense.end()) {
      drop("unknown category_id");
      continue;
    }
    if (!(bbox[2] >= 0 && bbox[3] >= 0)) {
      drop("negative box size");
      continue;
    }
    Box box{bbox[0], bbox[1], bbox[0] + bbox[2], bbox[1] + bbox[3]};
    const double W = img->second.width;
    const double H = img->second.height;
    Box clamped{std::clamp(box.x1, 0.0, W), std::clamp(box.y1, 0.0, H), std::clamp(box.x2, 0.0, W),
                std::clamp(box.y2, 0.0, H)};
    if (!(clamped == box)) {
      ds.warnings.push_back(where + " (id " + std::to_string(ann.id) + "): box clamped to image");
      ++ds.clamped;
    }
    ann.object.bbox = clamped;
    ann.object.category = cat->second;
    ann.area = a.contains("area") ? detail::field<double>(a, "area", where) : box.area();
    ann.iscrowd = a.value("iscrowd", 0) != 0;

    if (a.contains("keypoints")) {
      const auto kps = detail::field<std::vector<double>>(a, "keypoints", where);
      if (kps.size() % 3 != 0) throw InputError(where + ": field 'keypoints' length must be a multiple of 3");
      for (std::size_t k = 0; k < kps.size(); k += 3) {
        ann.object.keypoints.push_back({kps[k], kps[k + 1], kps[k + 2] > 0});
      }
    }
    if (a.contains("depth")) {
      const double d = detail::field<double>(a, "depth", where);
      require(d > 0, where + ": field 'depth' must be positive");
      ann.object.depth = d;
    }
    if (a.contains("dims")) {
      const auto d = detail::field<std::vector<double>>(a, "dims", where);
      require(d.size() == 3 && d[0] > 0 && d[1] > 0 && d[2] > 0, where + ": field 'dims' must be 3 positive values");
      ann.object.dims3d = std::array<double, 3>{d[0], d[1], d[2]};
    }
    if (a.contains("yaw")) ann.object.yaw = normalize_angle(detail::field<double>(a, "yaw", where));
    ds.annotations.push_back(std::move(ann));
  }
  std::sort(ds.annotations.begin(), ds.annotations.end(),
            [](const DatasetAnnotation& a, const DatasetAnnotation& b) { return a.id < b.id; });
  return ds;
}

inline Dataset parse_dataset_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset; report line and column as well
    const std::size_t offset = e.byte == 0 ? 0 : e.byte - 1;
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw InputError("dataset: parse error at line " + std::to_string(line) + ", column " + std::to_string(column) +
                     " (offset " + std::to_string(offset) + "): " + e.what());
  }
  return parse_dataset(doc);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset_text(buffer.str());
}

inline nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json doc = {{"images", nlohmann::json::array()},
                        {"annotations", nlohmann::json::array()},
                        {"categories", nlohmann::json::array()}};
  for (const auto& c : ds.categories) doc["categories"].push_back({{"id", c.id}, {"name", c.name}});
  for (const auto& im : ds.images) doc["images"].push_back({{"id", im.id}, {"width", im.width}, {"height", im.height}});
  for (const auto& a : ds.annotations) {
    const auto& b = a.object.bbox;
    nlohmann::json j = {{"id", a.id},
                        {"image_id", a.image_id},
                        {"category_id", ds.categories.at(a.object.category).id},
                        {"bbox", {b.x1, b.y1, b.width(), b.height()}},
                        {"area", a.area}};
    if (a.iscrowd) j["iscrowd"] = 1;
    if (!a.object.keypoints.empty()) {
      nlohmann::json kps = nlohmann::json::array();
      for (const auto& k : a.object.keypoints) {
        kps.push_back(k.x);
        kps.push_back(k.y);
        kps.push_back(k.visible ? 2 : 0);
      }
      j["keypoints"] = kps;
    }
    if (a.object.depth) j["depth"] = *a.object.depth;
    if (a.object.dims3d) j["dims"] = *a.object.dims3d;
    if (a.object.yaw) j["yaw"] = *a.object.yaw;
    doc["annotations"].push_back(std::move(j));
  }
  return doc;
}

/// Encoder settings for one image of the dataset.
inline EncoderConfig encoder_config_for(const Dataset& ds, const ImageInfo& image, EncoderConfig base) {
  base.input_width = image.width;
  base.input_height = image.height;
  base.num_classes = std::max<int>(1, static_cast<int>(ds.categories.size()));
  return base;
}

}  // namespace cpt
