#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "msfa/coco.hpp"
#include "msfa/dataset.hpp"
#include "msfa/error.hpp"

namespace msfa {

enum class SourceFormat { coco, voc_xml, plain_txt };

inline SourceFormat parse_source_format(std::string_view s) {
  if (s == "coco") return SourceFormat::coco;
  if (s == "voc-xml" || s == "voc") return SourceFormat::voc_xml;
  if (s == "plain-txt" || s == "txt") return SourceFormat::plain_txt;
  throw Error(Errc::invalid_argument, "unknown source format '" + std::string(s) + "'");
}

// Source category name -> canonical name. Canonical names map to themselves
// without an entry.
class CategoryMapping {
 public:
  CategoryMapping() = default;
  explicit CategoryMapping(std::map<std::string, std::string> table) : table_(std::move(table)) {
    for (const auto& [from, to] : table_) {
      if (!is_canonical_category(to)) {
        throw Error(Errc::unknown_category, "mapping target '" + to + "' for '" + from +
                                                "' is not a canonical category");
      }
    }
  }

  // `source = canonical` lines; '#' or ';' comments.
  static CategoryMapping parse(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
      pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw Error(Errc::invalid_argument, std::string("category mapping: ") + e.what());
    }
    std::map<std::string, std::string> table;
    for (const auto& [key, value] : tree) {
      if (!value.empty()) throw Error(Errc::invalid_argument, "category mapping must not use sections");
      table[key] = value.data();
    }
    return CategoryMapping(std::move(table));
  }

  static CategoryMapping load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open category mapping " + path.string());
    return parse(in);
  }

  std::string map(const std::string& name) const {
    if (auto it = table_.find(name); it != table_.end()) return it->second;
    if (is_canonical_category(name)) return name;
    throw Error(Errc::unknown_category, "category '" + name + "' has no mapping");
  }

 private:
  std::map<std::string, std::string> table_;
};

// Returns (width, height) of an image file.
using ImageSizeProbe = std::function<std::pair<int, int>(const std::filesystem::path&)>;

namespace detail {

struct RawRecord {
  ImageRecord image;
  std::vector<std::pair<std::string, Box>> boxes; // canonical name, box
};

inline Box clip_to_image(const Box& b, int w, int h) {
  return intersect(b, {0, 0, double(w), double(h)});
}

inline AnnotatedDataset assemble(std::vector<RawRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const RawRecord& a, const RawRecord& b) { return a.image.file_name < b.image.file_name; });
  std::set<std::string> names;
  for (const auto& r : records) {
    for (const auto& [n, b] : r.boxes) names.insert(n);
  }
  AnnotatedDataset d;
  d.categories = unify_categories(names);
  for (auto& r : records) {
    r.image.id = static_cast<int>(d.images.size()) + 1;
    for (const auto& [name, box] : r.boxes) {
      Instance inst;
      inst.id = static_cast<int>(d.annotations.size()) + 1;
      inst.image_id = r.image.id;
      inst.category_id = d.category_by_name(name)->id;
      inst.bbox = box;
      inst.area = box.area();
      d.annotations.push_back(inst);
    }
    d.images.push_back(std::move(r.image));
  }
  return d;
}

inline std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir,
                                                       std::string_view ext) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) {
    throw Error(Errc::io_error, "missing directory " + dir.string());
  }
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ImageSets/Main/{train,val,test}.txt -> stem -> split.
inline std::map<std::string, std::string> read_voc_splits(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const char* split : {"train", "val", "test"}) {
    std::ifstream in(root / "ImageSets" / "Main" / (std::string(split) + ".txt"));
    std::string stem;
    while (in >> stem) out[stem] = split;
  }
  return out;
}

}  // namespace detail

// Pascal VOC: root/Annotations/*.xml with filename, size and object/bndbox.
inline AnnotatedDataset ingest_voc(const std::filesystem::path& root, const CategoryMapping& mapping,
                                   const std::string& source) {
  namespace pt = boost::property_tree;
  const auto splits = detail::read_voc_splits(root);
  std::vector<detail::RawRecord> records;
  for (const auto& file : detail::sorted_files(root / "Annotations", ".xml")) {
    pt::ptree tree;
    try {
      pt::read_xml(file.string(), tree);
    } catch (const pt::xml_parser_error& e) {
      throw Error(Errc::malformed_record, file.string() + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    try {
      const auto& ann = tree.get_child("annotation");
      detail::RawRecord rec;
      rec.image.file_name = ann.get<std::string>("filename", file.stem().string() + ".jpg");
      rec.image.width = ann.get<int>("size.width");
      rec.image.height = ann.get<int>("size.height");
      rec.image.source_dataset = source;
      if (auto it = splits.find(file.stem().string()); it != splits.end()) rec.image.split = it->second;
      for (const auto& [tag, obj] : ann) {
        if (tag != "object") continue;
        const std::string name = mapping.map(obj.get<std::string>("name"));
        const double x0 = obj.get<double>("bndbox.xmin"), y0 = obj.get<double>("bndbox.ymin");
        const double x1 = obj.get<double>("bndbox.xmax"), y1 = obj.get<double>("bndbox.ymax");
        const Box b = detail::clip_to_image({x0, y0, x1 - x0, y1 - y0}, rec.image.width, rec.image.height);
        if (b.area() <= 0) {
          throw Error(Errc::malformed_record, file.string() + ": degenerate box for '" + name + "'");
        }
        rec.boxes.emplace_back(name, b);
      }
      records.push_back(std::move(rec));
    } catch (const pt::ptree_error& e) {
      throw Error(Errc::malformed_record, file.string() + ": " + e.what());
    }
  }
  return detail::assemble(std::move(records));
}

// YOLO-style: root/labels/<stem>.txt with "class cx cy w h" (normalised) and
// the image at root/images/<stem>.<ext>.
inline AnnotatedDataset ingest_plain_txt(const std::filesystem::path& root,
                                         const CategoryMapping& mapping, const std::string& source,
                                         const ImageSizeProbe& probe) {
  std::map<std::string, std::filesystem::path> images;
  if (std::filesystem::is_directory(root / "images")) {
    for (const auto& e : std::filesystem::directory_iterator(root / "images")) {
      if (e.is_regular_file()) images[e.path().stem().string()] = e.path();
    }
  }
  std::vector<detail::RawRecord> records;
  for (const auto& file : detail::sorted_files(root / "labels", ".txt")) {
    const auto img = images.find(file.stem().string());
    if (img == images.end()) {
      throw Error(Errc::malformed_record, file.string() + ": no matching image in images/");
    }
    detail::RawRecord rec;
    rec.image.file_name = img->second.filename().string();
    std::tie(rec.image.width, rec.image.height) = probe(img->second);
    rec.image.source_dataset = source;
    std::ifstream in(file);
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream ls(line);
      std::string cls;
      double cx, cy, w, h;
      if (!(ls >> cls >> cx >> cy >> w >> h) || w <= 0 || h <= 0) {
        throw Error(Errc::malformed_record, file.string() + ":" + std::to_string(lineno) +
                                                ": expected 'class cx cy w h'");
      }
      const std::string name = mapping.map(cls);
      const double W = rec.image.width, H = rec.image.height;
      const Box b = detail::clip_to_image({(cx - w / 2) * W, (cy - h / 2) * H, w * W, h * H},
                                          rec.image.width, rec.image.height);
      if (b.area() <= 0) {
        throw Error(Errc::malformed_record, file.string() + ":" + std::to_string(lineno) +
                                                ": box lies outside the image");
      }
      rec.boxes.emplace_back(name, b);
    }
    records.push_back(std::move(rec));
  }
  return detail::assemble(std::move(records));
}

// COCO input: `root` is the JSON file itself or a directory holding
// annotations.json.
inline AnnotatedDataset ingest_coco(const std::filesystem::path& root, const CategoryMapping& mapping,
                                    const std::string& source) {
  const auto file = std::filesystem::is_directory(root) ? root / "annotations.json" : root;
  const AnnotatedDataset raw = from_coco(file);
  std::vector<detail::RawRecord> records;
  std::map<int, std::size_t> index;
  for (const auto& im : raw.images) {
    index[im.id] = records.size();
    detail::RawRecord rec{im, {}};
    if (!source.empty()) rec.image.source_dataset = source;
    records.push_back(std::move(rec));
  }
  for (const auto& a : raw.annotations) {
    std::string name;
    for (const auto& c : raw.categories) {
      if (c.id == a.category_id) name = c.name;
    }
    records[index.at(a.image_id)].boxes.emplace_back(mapping.map(name), a.bbox);
  }
  return detail::assemble(std::move(records));
}

inline AnnotatedDataset ingest(SourceFormat format, const std::filesystem::path& root,
                               const CategoryMapping& mapping, const std::string& source,
                               const ImageSizeProbe& probe = {}) {
  switch (format) {
    case SourceFormat::coco: return ingest_coco(root, mapping, source);
    case SourceFormat::voc_xml: return ingest_voc(root, mapping, source);
    case SourceFormat::plain_txt:
      if (!probe) throw Error(Errc::invalid_argument, "plain-txt ingest needs an image size probe");
      return ingest_plain_txt(root, mapping, source, probe);
  }
  throw Error(Errc::invalid_argument, "unhandled source format");
}

// Inverse of the plain-txt adapter: one label file per image, class names
// written verbatim.
inline std::map<std::string, std::string> to_plain_txt(const AnnotatedDataset& d) {
  std::map<int, std::string> names;
  for (const auto& c : d.categories) names[c.id] = c.name;
  std::map<int, const ImageRecord*> images;
  for (const auto& im : d.images) images[im.id] = &im;
  std::map<std::string, std::string> files;
  for (const auto& im : d.images) {
    files[std::filesystem::path(im.file_name).stem().string() + ".txt"];
  }
  for (const auto& a : d.annotations) {
    const ImageRecord& im = *images.at(a.image_id);
    std::ostringstream os;
    os.precision(17);
    os << names.at(a.category_id) << ' ' << (a.bbox.x + a.bbox.w / 2) / im.width << ' '
       << (a.bbox.y + a.bbox.h / 2) / im.height << ' ' << a.bbox.w / im.width << ' '
       << a.bbox.h / im.height << '\n';
    files[std::filesystem::path(im.file_name).stem().string() + ".txt"] += os.str();
  }
  return files;
}

}  // namespace msfa
