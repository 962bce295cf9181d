#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "msfa/error.hpp"
#include "msfa/raster.hpp"

namespace msfa {

inline constexpr std::array<std::string_view, 6> kCanonicalCategories = {
    "ship", "aircraft", "car", "bridge", "harbor", "tank"};

inline bool is_canonical_category(std::string_view name) {
  return std::find(kCanonicalCategories.begin(), kCanonicalCategories.end(), name) !=
         kCanonicalCategories.end();
}

// Axis-aligned box, top-left origin, pixels.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  double area() const noexcept { return w * h; }
  friend bool operator==(const Box&, const Box&) = default;
};

// Length of [lo, hi), reusing a source extent when the interval is unclipped.
inline double clipped_extent(double lo, double hi, double a0, double alen, double b0, double blen) {
  if (lo == a0 && hi == a0 + alen) return alen;
  if (lo == b0 && hi == b0 + blen) return blen;
  return hi - lo;
}

inline Box intersect(const Box& a, const Box& b) {
  const double x0 = std::max(a.x, b.x), y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.x + a.w, b.x + b.w), y1 = std::min(a.y + a.h, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
  return {x0, y0, clipped_extent(x0, x1, a.x, a.w, b.x, b.w), clipped_extent(y0, y1, a.y, a.h, b.y, b.h)};
}

struct Instance {
  int id = 0;
  int image_id = 0;
  int category_id = 0;
  Box bbox;
  double area = 0;
  int iscrowd = 0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct ImageRecord {
  int id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  std::string source_dataset;
  std::string split; // "train" / "val" / "test" when predefined, else empty

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Category {
  int id = 0;
  std::string name;

  friend bool operator==(const Category&, const Category&) = default;
};

struct AnnotatedDataset {
  std::vector<ImageRecord> images;
  std::vector<Instance> annotations;
  std::vector<Category> categories;

  friend bool operator==(const AnnotatedDataset&, const AnnotatedDataset&) = default;

  const Category* category_by_name(std::string_view name) const {
    for (const auto& c : categories) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

// Invariant violations, each prefixed with a JSON-style path.
inline std::vector<std::string> validate_dataset(const AnnotatedDataset& d) {
  std::vector<std::string> problems;
  std::map<int, const ImageRecord*> images;
  std::set<int> categories;
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    const auto& im = d.images[i];
    const std::string path = "images[" + std::to_string(i) + "]";
    if (!images.emplace(im.id, &im).second) problems.push_back(path + ".id: duplicate id " + std::to_string(im.id));
    if (im.width < 1 || im.height < 1) problems.push_back(path + ": non-positive dimensions");
    if (im.file_name.empty()) problems.push_back(path + ".file_name: empty");
  }
  for (std::size_t i = 0; i < d.categories.size(); ++i) {
    if (!categories.insert(d.categories[i].id).second) {
      problems.push_back("categories[" + std::to_string(i) + "].id: duplicate id");
    }
  }
  std::set<int> ann_ids;
  for (std::size_t i = 0; i < d.annotations.size(); ++i) {
    const auto& a = d.annotations[i];
    const std::string path = "annotations[" + std::to_string(i) + "]";
    if (!ann_ids.insert(a.id).second) problems.push_back(path + ".id: duplicate id");
    const auto it = images.find(a.image_id);
    if (it == images.end()) {
      problems.push_back(path + ".image_id: references missing image " + std::to_string(a.image_id));
    }
    if (!categories.count(a.category_id)) {
      problems.push_back(path + ".category_id: references missing category " +
                         std::to_string(a.category_id));
    }
    if (!(a.bbox.w > 0 && a.bbox.h > 0)) problems.push_back(path + ".bbox: non-positive size");
    if (it != images.end()) {
      const auto& im = *it->second;
      constexpr double tol = 1e-6;
      if (a.bbox.x < -tol || a.bbox.y < -tol || a.bbox.x + a.bbox.w > im.width + tol ||
          a.bbox.y + a.bbox.h > im.height + tol) {
        problems.push_back(path + ".bbox: outside image bounds");
      }
    }
    if (a.iscrowd != 0 && a.iscrowd != 1) problems.push_back(path + ".iscrowd: must be 0 or 1");
  }
  return problems;
}

// Renumbers image, annotation and category ids to 1..n (ordered by current
// id) and rewrites references.
inline AnnotatedDataset renumber(AnnotatedDataset d) {
  auto remap = [](auto& items) {
    std::vector<int> old;
    for (const auto& it : items) old.push_back(it.id);
    std::sort(old.begin(), old.end());
    std::map<int, int> m;
    for (std::size_t i = 0; i < old.size(); ++i) m[old[i]] = static_cast<int>(i) + 1;
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (auto& it : items) it.id = m.at(it.id);
    return m;
  };
  const auto images = remap(d.images);
  const auto cats = remap(d.categories);
  remap(d.annotations);
  for (auto& a : d.annotations) {
    a.image_id = images.at(a.image_id);
    a.category_id = cats.at(a.category_id);
  }
  return d;
}

// Keeps the listed images (by index) with their annotations, renumbered.
inline AnnotatedDataset subset(const AnnotatedDataset& d, const std::vector<std::size_t>& image_indices) {
  AnnotatedDataset out;
  out.categories = d.categories;
  std::vector<std::size_t> order = image_indices;
  std::sort(order.begin(), order.end());
  std::map<int, int> ids;
  for (std::size_t idx : order) {
    ImageRecord im = d.images.at(idx);
    const int new_id = static_cast<int>(out.images.size()) + 1;
    ids[im.id] = new_id;
    im.id = new_id;
    out.images.push_back(std::move(im));
  }
  for (const auto& a : d.annotations) {
    auto it = ids.find(a.image_id);
    if (it == ids.end()) continue;
    Instance copy = a;
    copy.image_id = it->second;
    copy.id = static_cast<int>(out.annotations.size()) + 1;
    out.annotations.push_back(copy);
  }
  return out;
}

// ---------------------------------------------------------------- splitting

// Uniform integer in [0, bound) from a 64-bit engine by rejection.
inline std::uint64_t bounded_uniform(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

// Fisher-Yates over [0, n) driven by mt19937_64(seed).
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(p[i - 1], p[bounded_uniform(rng, i)]);
  }
  return p;
}

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

// n_val = floor(n * r_val), n_test = floor(n * r_test), remainder to train.
inline SplitCounts split_counts(std::size_t n, const SplitRatios& r) {
  if (!(r.train > 0 && r.val > 0 && r.test > 0)) {
    throw Error(Errc::invalid_argument, "split ratios must be positive");
  }
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw Error(Errc::invalid_argument, "split ratios must sum to 1");
  }
  const auto part = [n](double ratio) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
  };
  SplitCounts c;
  c.val = part(r.val);
  c.test = part(r.test);
  c.train = n - c.val - c.test;
  return c;
}

struct DatasetSplit {
  AnnotatedDataset train, val, test;
  std::vector<std::string> warnings;
};

inline DatasetSplit split_dataset(const AnnotatedDataset& d, const SplitRatios& ratios,
                                  std::uint64_t seed) {
  if (d.images.empty()) throw Error(Errc::empty_dataset, "cannot split an empty dataset");
  const SplitCounts c = split_counts(d.images.size(), ratios);
  const auto perm = seeded_permutation(d.images.size(), seed);
  std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(c.train));
  std::vector<std::size_t> va(perm.begin() + static_cast<std::ptrdiff_t>(c.train),
                              perm.begin() + static_cast<std::ptrdiff_t>(c.train + c.val));
  std::vector<std::size_t> te(perm.begin() + static_cast<std::ptrdiff_t>(c.train + c.val), perm.end());
  DatasetSplit s{subset(d, tr), subset(d, va), subset(d, te), {}};
  for (auto* part : {&s.train, &s.val, &s.test}) {
    const char* name = part == &s.train ? "train" : part == &s.val ? "val" : "test";
    for (auto& im : part->images) im.split = name;
    if (part->images.empty()) {
      s.warnings.push_back(std::string(name) + " split is empty (" +
                           std::to_string(d.images.size()) + " images)");
    }
  }
  return s;
}

inline bool has_predefined_splits(const AnnotatedDataset& d) {
  if (d.images.empty()) return false;
  return std::all_of(d.images.begin(), d.images.end(), [](const ImageRecord& im) {
    return im.split == "train" || im.split == "val" || im.split == "test";
  });
}

// Source datasets that ship train/val/test lists keep them; all others are
// split with split_dataset.
inline DatasetSplit split_or_adopt(const AnnotatedDataset& d, const SplitRatios& ratios,
                                   std::uint64_t seed) {
  if (!has_predefined_splits(d)) return split_dataset(d, ratios, seed);
  std::vector<std::size_t> tr, va, te;
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    const auto& s = d.images[i].split;
    (s == "train" ? tr : s == "val" ? va : te).push_back(i);
  }
  DatasetSplit out{subset(d, tr), subset(d, va), subset(d, te), {}};
  for (auto* part : {&out.train, &out.val, &out.test}) {
    if (part->images.empty()) out.warnings.push_back("predefined split is empty");
  }
  return out;
}

// ------------------------------------------------------------------ slicing

struct SliceSpec {
  int patch = 512;
  int overlap = 200;
  double keep_fraction = 0.6;
  double min_area = 4.0;
  std::vector<double> scales{1.0};

  int stride() const noexcept { return patch - overlap; }

  void validate() const {
    if (patch < 1) throw Error(Errc::invalid_argument, "patch must be >= 1");
    if (overlap < 0 || overlap >= patch) {
      throw Error(Errc::invalid_argument, "overlap must satisfy 0 <= overlap < patch");
    }
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
      throw Error(Errc::invalid_argument, "keep_fraction must be in (0, 1]");
    }
    if (!(min_area >= 0.0)) throw Error(Errc::invalid_argument, "min_area must be >= 0");
    if (scales.empty()) throw Error(Errc::invalid_argument, "at least one scale is required");
    for (double s : scales) {
      if (!(s > 0.0)) throw Error(Errc::invalid_argument, "scales must be > 0");
    }
  }
};

// 0, stride, 2*stride, ... while pos + patch <= dim, then a final position
// dim - patch if the tail is not yet covered. dim <= patch gives {0}.
inline std::vector<int> slice_positions(int dim, int patch, int stride) {
  if (dim <= patch) return {0};
  std::vector<int> pos;
  for (int p = 0; p + patch <= dim; p += stride) pos.push_back(p);
  if (pos.back() + patch < dim) pos.push_back(dim - patch);
  return pos;
}

struct PatchWindow {
  int x = 0, y = 0, w = 0, h = 0;

  Box box() const { return {double(x), double(y), double(w), double(h)}; }
  friend bool operator==(const PatchWindow&, const PatchWindow&) = default;
};

// Row-major (y outer, x inner).
inline std::vector<PatchWindow> patch_windows(int width, int height, const SliceSpec& spec) {
  spec.validate();
  const auto xs = slice_positions(width, spec.patch, spec.stride());
  const auto ys = slice_positions(height, spec.patch, spec.stride());
  std::vector<PatchWindow> out;
  for (int y : ys) {
    for (int x : xs) {
      out.push_back({x, y, std::min(spec.patch, width), std::min(spec.patch, height)});
    }
  }
  return out;
}

struct Patch {
  PatchWindow window;
  double scale = 1.0;
  std::vector<Instance> instances; // in patch coordinates, ids local to the patch
  std::optional<Raster> pixels;
};

struct SliceReport {
  std::vector<Patch> patches;
  std::size_t kept = 0;          // instances present in at least one patch
  std::size_t dropped = 0;       // instances present in no patch
  std::size_t dropped_pairs = 0; // (instance, patch) overlaps rejected by the thresholds
};

// An instance is kept in a patch iff clipped area / original area >=
// keep_fraction and the clipped box area >= min_area.
inline SliceReport slice_image(int width, int height, const std::vector<Instance>& instances,
                               const SliceSpec& spec, double scale = 1.0) {
  SliceReport report;
  std::vector<bool> seen(instances.size(), false);
  for (const PatchWindow& win : patch_windows(width, height, spec)) {
    Patch patch{win, scale, {}, std::nullopt};
    const Box wb = win.box();
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const Instance& inst = instances[i];
      const Box clipped = intersect(inst.bbox, wb);
      if (clipped.area() <= 0.0) continue;
      if (clipped.area() / inst.bbox.area() < spec.keep_fraction || clipped.area() < spec.min_area) {
        ++report.dropped_pairs;
        continue;
      }
      Instance out = inst;
      out.id = static_cast<int>(patch.instances.size()) + 1;
      out.bbox = {clipped.x - wb.x, clipped.y - wb.y, clipped.w, clipped.h};
      out.area = clipped.area();
      patch.instances.push_back(out);
      seen[i] = true;
    }
    report.patches.push_back(std::move(patch));
  }
  for (bool s : seen) (s ? report.kept : report.dropped) += 1;
  return report;
}

inline SliceReport slice_image(const Raster& image, const std::vector<Instance>& instances,
                               const SliceSpec& spec, double scale = 1.0) {
  SliceReport report = slice_image(image.width(), image.height(), instances, spec, scale);
  for (Patch& p : report.patches) {
    p.pixels = crop(image, p.window.x, p.window.y, p.window.w, p.window.h);
  }
  return report;
}

inline Instance scale_instance(Instance inst, double s) {
  inst.bbox = {inst.bbox.x * s, inst.bbox.y * s, inst.bbox.w * s, inst.bbox.h * s};
  inst.area = inst.bbox.area();
  return inst;
}

inline int scaled_dim(int dim, double s) {
  return std::max(1, static_cast<int>(std::lround(dim * s)));
}

// Rescales image and boxes by each scale, then slices. The report
// concatenates patches over scales; kept/dropped count (instance, scale)
// pairs.
inline SliceReport multi_scale_slice(int width, int height, const std::vector<Instance>& instances,
                                     const SliceSpec& spec, const Raster* image = nullptr) {
  spec.validate();
  SliceReport all;
  for (double s : spec.scales) {
    std::vector<Instance> scaled;
    scaled.reserve(instances.size());
    for (const auto& inst : instances) scaled.push_back(scale_instance(inst, s));
    const int sw = scaled_dim(width, s), sh = scaled_dim(height, s);
    SliceReport r;
    if (image) {
      const Raster resized = s == 1.0 ? *image : resample(*image, sw, sh, Interpolation::bilinear);
      r = slice_image(resized, scaled, spec, s);
    } else {
      r = slice_image(sw, sh, scaled, spec, s);
    }
    all.kept += r.kept;
    all.dropped += r.dropped;
    all.dropped_pairs += r.dropped_pairs;
    for (auto& p : r.patches) all.patches.push_back(std::move(p));
  }
  return all;
}

// "1.0", "0.5", "1.5": shortest round-trip form, always with a decimal point.
inline std::string format_scale(double s) {
  std::ostringstream os;
  os.precision(15);
  os << s;
  std::string out = os.str();
  if (out.find('.') == std::string::npos && out.find('e') == std::string::npos) out += ".0";
  return out;
}

// {stem}__s{scale}__{x}_{y}.png
inline std::string patch_file_name(std::string_view stem, double scale, int x, int y) {
  return std::string(stem) + "__s" + format_scale(scale) + "__" + std::to_string(x) + "_" +
         std::to_string(y) + ".png";
}

// ------------------------------------------------------------------ merging

// Category order: canonical names first (in canonical order), then others
// alphabetically.
inline std::vector<Category> unify_categories(const std::set<std::string>& names) {
  std::vector<Category> out;
  for (auto c : kCanonicalCategories) {
    if (names.count(std::string(c))) out.push_back({static_cast<int>(out.size()) + 1, std::string(c)});
  }
  for (const auto& n : names) {
    if (!is_canonical_category(n)) out.push_back({static_cast<int>(out.size()) + 1, n});
  }
  return out;
}

// Images are ordered by (source_dataset, file_name), ids renumbered from 1,
// categories unified by name. Clashing file names are prefixed with their
// source dataset; nothing is dropped.
inline AnnotatedDataset merge(const std::vector<AnnotatedDataset>& parts) {
  std::set<std::string> names;
  for (const auto& d : parts) {
    for (const auto& c : d.categories) {
      if (!is_canonical_category(c.name)) {
        throw Error(Errc::unknown_category, "merge: category '" + c.name + "' is not canonical");
      }
      names.insert(c.name);
    }
  }
  const auto categories = unify_categories(names);
  auto category_id = [&](const std::string& name) {
    for (const auto& c : categories) {
      if (c.name == name) return c.id;
    }
    throw Error(Errc::unknown_category, name);
  };

  struct Entry {
    std::size_t part;
    std::size_t index;
  };
  std::vector<Entry> order;
  std::map<std::string, int> name_uses;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t i = 0; i < parts[p].images.size(); ++i) {
      order.push_back({p, i});
      name_uses[parts[p].images[i].file_name] += 1;
    }
  }
  auto key = [&](const Entry& e) {
    const auto& im = parts[e.part].images[e.index];
    return std::tie(im.source_dataset, im.file_name);
  };
  std::stable_sort(order.begin(), order.end(), [&](const Entry& a, const Entry& b) {
    if (key(a) != key(b)) return key(a) < key(b);
    return std::tie(a.part, a.index) < std::tie(b.part, b.index);
  });

  // Per part: image id -> annotation indices, and category id -> unified id.
  std::vector<std::map<int, std::vector<std::size_t>>> by_image(parts.size());
  std::vector<std::map<int, int>> cat_map(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t a = 0; a < parts[p].annotations.size(); ++a) {
      by_image[p][parts[p].annotations[a].image_id].push_back(a);
    }
    for (const auto& c : parts[p].categories) cat_map[p][c.id] = category_id(c.name);
  }

  AnnotatedDataset out;
  out.categories = categories;
  std::set<std::string> taken;
  for (const Entry& e : order) {
    const AnnotatedDataset& src = parts[e.part];
    ImageRecord im = src.images[e.index];
    const int old_id = im.id;
    std::string name = im.file_name;
    if (name_uses[name] > 1) {
      name = (im.source_dataset.empty() ? "part" + std::to_string(e.part) : im.source_dataset) +
             "__" + name;
    }
    for (int k = 2; taken.count(name); ++k) {
      name = im.source_dataset + "__" + std::to_string(k) + "__" + im.file_name;
    }
    taken.insert(name);
    im.file_name = name;
    im.id = static_cast<int>(out.images.size()) + 1;
    if (auto it = by_image[e.part].find(old_id); it != by_image[e.part].end()) {
      for (std::size_t a : it->second) {
        Instance copy = src.annotations[a];
        copy.id = static_cast<int>(out.annotations.size()) + 1;
        copy.image_id = im.id;
        const auto cat = cat_map[e.part].find(copy.category_id);
        if (cat == cat_map[e.part].end()) {
          throw Error(Errc::schema_violation, "merge: annotation references a missing category");
        }
        copy.category_id = cat->second;
        out.annotations.push_back(copy);
      }
    }
    out.images.push_back(std::move(im));
  }
  return out;
}

}  // namespace msfa
