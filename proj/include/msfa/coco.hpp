#pragma once

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include "msfa/binary_io.hpp"
#include "msfa/dataset.hpp"
#include "msfa/error.hpp"

namespace msfa {

// COCO detection JSON. Images carry two optional extension fields,
// "source_dataset" and "split"; both are omitted when empty.
inline nlohmann::ordered_json to_coco_json(const AnnotatedDataset& d) {
  using nlohmann::ordered_json;
  ordered_json images = ordered_json::array();
  for (const auto& im : d.images) {
    ordered_json j{{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}};
    if (!im.source_dataset.empty()) j["source_dataset"] = im.source_dataset;
    if (!im.split.empty()) j["split"] = im.split;
    images.push_back(std::move(j));
  }
  ordered_json annotations = ordered_json::array();
  for (const auto& a : d.annotations) {
    annotations.push_back({{"id", a.id},
                           {"image_id", a.image_id},
                           {"category_id", a.category_id},
                           {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}},
                           {"area", a.area},
                           {"iscrowd", a.iscrowd}});
  }
  ordered_json categories = ordered_json::array();
  for (const auto& c : d.categories) {
    categories.push_back({{"id", c.id}, {"name", c.name}, {"supercategory", c.name}});
  }
  return {{"images", std::move(images)},
          {"annotations", std::move(annotations)},
          {"categories", std::move(categories)}};
}

inline std::string to_coco_string(const AnnotatedDataset& d) {
  return to_coco_json(d).dump(1) + "\n";
}

inline void to_coco(const AnnotatedDataset& d, const std::filesystem::path& path) {
  write_file_atomic(path, to_coco_string(d));
}

namespace detail {

class CocoReader {
 public:
  template <typename T>
  bool field(const nlohmann::json& obj, const std::string& path, const char* key, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      problems.push_back(path + "." + key + ": missing");
      return false;
    }
    try {
      out = it->get<T>();
      return true;
    } catch (const nlohmann::json::exception&) {
      problems.push_back(path + "." + key + ": wrong type");
      return false;
    }
  }

  std::vector<std::string> problems;
};

}  // namespace detail

// Parses and validates; every schema or referential violation is reported
// with its JSON path in one Error.
inline AnnotatedDataset from_coco_json(const nlohmann::json& root) {
  detail::CocoReader rd;
  AnnotatedDataset d;
  auto array = [&](const char* key) -> const nlohmann::json* {
    auto it = root.find(key);
    if (it == root.end() || !it->is_array()) {
      rd.problems.push_back(std::string(key) + ": missing or not an array");
      return nullptr;
    }
    return &*it;
  };
  if (!root.is_object()) throw Error(Errc::schema_violation, "$: COCO root must be an object");

  if (const auto* images = array("images")) {
    for (std::size_t i = 0; i < images->size(); ++i) {
      const auto& j = (*images)[i];
      const std::string path = "images[" + std::to_string(i) + "]";
      ImageRecord im;
      bool ok = rd.field(j, path, "id", im.id);
      ok &= rd.field(j, path, "file_name", im.file_name);
      ok &= rd.field(j, path, "width", im.width);
      ok &= rd.field(j, path, "height", im.height);
      if (j.contains("source_dataset")) rd.field(j, path, "source_dataset", im.source_dataset);
      if (j.contains("split")) rd.field(j, path, "split", im.split);
      if (ok) d.images.push_back(std::move(im));
    }
  }
  if (const auto* cats = array("categories")) {
    for (std::size_t i = 0; i < cats->size(); ++i) {
      const std::string path = "categories[" + std::to_string(i) + "]";
      Category c;
      bool ok = rd.field((*cats)[i], path, "id", c.id);
      ok &= rd.field((*cats)[i], path, "name", c.name);
      if (ok) d.categories.push_back(std::move(c));
    }
  }
  if (const auto* anns = array("annotations")) {
    for (std::size_t i = 0; i < anns->size(); ++i) {
      const auto& j = (*anns)[i];
      const std::string path = "annotations[" + std::to_string(i) + "]";
      Instance a;
      std::vector<double> bbox;
      bool ok = rd.field(j, path, "id", a.id);
      ok &= rd.field(j, path, "image_id", a.image_id);
      ok &= rd.field(j, path, "category_id", a.category_id);
      if (rd.field(j, path, "bbox", bbox)) {
        if (bbox.size() != 4) {
          rd.problems.push_back(path + ".bbox: expected [x, y, w, h]");
          ok = false;
        } else {
          a.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
        }
      } else {
        ok = false;
      }
      if (j.contains("area")) {
        ok &= rd.field(j, path, "area", a.area);
      } else {
        a.area = a.bbox.area();
      }
      if (j.contains("iscrowd")) ok &= rd.field(j, path, "iscrowd", a.iscrowd);
      if (ok) d.annotations.push_back(a);
    }
  }
  if (rd.problems.empty()) {
    const auto more = validate_dataset(d);
    rd.problems.insert(rd.problems.end(), more.begin(), more.end());
  }
  if (!rd.problems.empty()) {
    std::string msg = std::to_string(rd.problems.size()) + " COCO schema violation(s)";
    for (const auto& p : rd.problems) msg += "\n  " + p;
    throw Error(Errc::schema_violation, msg);
  }
  return renumber(std::move(d));
}

inline AnnotatedDataset from_coco_string(std::string_view text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::schema_violation, std::string("$: invalid JSON: ") + e.what());
  }
  return from_coco_json(root);
}

inline AnnotatedDataset from_coco(const std::filesystem::path& path) {
  return from_coco_string(read_file(path));
}

}  // namespace msfa
