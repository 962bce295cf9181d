#pragma once

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <string_view>
#include <vector>

#include "msfa/dataset.hpp"
#include "msfa/descriptor.hpp"
#include "msfa/error.hpp"
#include "msfa/parallel.hpp"
#include "msfa/raster.hpp"

namespace msfa {

// ------------------------------------------------------ dataset statistics

// Instances per image rounded half away from zero to two decimals.
inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline std::string format2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", round2(v));
  return buf;
}

inline double ins_per_img(std::size_t instances, std::size_t images) {
  if (images == 0) throw Error(Errc::empty_dataset, "instances-per-image needs at least one image");
  return static_cast<double>(instances) / static_cast<double>(images);
}

struct SplitTally {
  std::size_t images = 0;
  std::size_t instances = 0;

  double ins_per_img() const {
    return images == 0 ? 0.0 : static_cast<double>(instances) / static_cast<double>(images);
  }
};

// One row of the image/instance table: train / val / test / all.
struct DatasetStats {
  std::string name;
  SplitTally train, val, test, all;

  double ins_per_img() const { return all.ins_per_img(); }
  std::string ins_per_img_text() const { return format2(ins_per_img()); }
};

inline DatasetStats dataset_stats(const AnnotatedDataset& d, std::string name = {}) {
  if (d.images.empty()) throw Error(Errc::empty_dataset, "dataset has no images");
  DatasetStats s;
  s.name = std::move(name);
  std::map<int, SplitTally*> by_image;
  for (const auto& im : d.images) {
    SplitTally* t = im.split == "train" ? &s.train
                    : im.split == "val" ? &s.val
                    : im.split == "test" ? &s.test
                                         : nullptr;
    if (t) t->images += 1;
    s.all.images += 1;
    by_image[im.id] = t;
  }
  for (const auto& a : d.annotations) {
    auto it = by_image.find(a.image_id);
    if (it != by_image.end() && it->second) it->second->instances += 1;
    s.all.instances += 1;
  }
  return s;
}

struct CategoryStat {
  std::string name;
  std::size_t count = 0;
  double percentage = 0.0;
  double mean_area = 0.0;
};

// Share of instances per category and mean instance area; categories
// without instances report zeros.
inline std::vector<CategoryStat> category_stats(const AnnotatedDataset& d) {
  if (d.images.empty()) throw Error(Errc::empty_dataset, "dataset has no images");
  std::vector<CategoryStat> out;
  std::map<int, std::size_t> index;
  for (const auto& c : d.categories) {
    index[c.id] = out.size();
    out.push_back({c.name, 0, 0.0, 0.0});
  }
  std::vector<double> area_sum(out.size(), 0.0);
  for (const auto& a : d.annotations) {
    const std::size_t i = index.at(a.category_id);
    out[i].count += 1;
    area_sum[i] += a.area;
  }
  const double total = static_cast<double>(d.annotations.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].count == 0) continue;
    out[i].percentage = 100.0 * static_cast<double>(out[i].count) / total;
    out[i].mean_area = area_sum[i] / static_cast<double>(out[i].count);
  }
  return out;
}

// ------------------------------------------------------ feature-space gaps

// Pixel space when empty, otherwise a descriptor's pooled channel.
struct FeatureSpace {
  std::optional<DescriptorKind> descriptor;

  std::string name() const { return descriptor ? std::string(to_string(*descriptor)) : "pixel"; }
  friend bool operator==(const FeatureSpace&, const FeatureSpace&) = default;
};

inline FeatureSpace parse_feature_space(std::string_view s) {
  if (s == "pixel" || s == "Pixel") return {};
  return {parse_descriptor(s)};
}

inline std::vector<FeatureSpace> all_feature_spaces() {
  std::vector<FeatureSpace> out{FeatureSpace{}};
  for (DescriptorKind k : kAllDescriptors) out.push_back({k});
  return out;
}

struct CorpusHistogram {
  FeatureSpace space;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  std::size_t bins() const noexcept { return counts.size(); }

  std::vector<double> normalized() const {
    std::vector<double> f(counts.size(), 0.0);
    if (total == 0) return f;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      f[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    }
    return f;
  }

  CorpusHistogram& operator+=(const CorpusHistogram& o) {
    if (o.counts.size() != counts.size()) throw Error(Errc::space_mismatch, "histogram bin mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    total += o.total;
    return *this;
  }
};

// Uniform bins over [0, 1]; 1.0 falls into the last bin.
inline std::size_t value_bin(double v, std::size_t bins) {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * static_cast<double>(bins));
  return std::min(static_cast<std::size_t>(scaled), bins - 1);
}

// The image is min-max normalised and, for descriptor spaces, replaced by the
// descriptor's pooled channel at the image's size.
inline Raster feature_space_view(const Raster& image, const FeatureSpace& space,
                                 const DescriptorParams& params = {}) {
  const Raster x = normalize(image, NormalizePolicy::minmax());
  if (!space.descriptor) return x;
  return descriptor_channel(x, *space.descriptor, params);
}

inline CorpusHistogram image_histogram(const Raster& image, const FeatureSpace& space,
                                       std::size_t bins, const DescriptorParams& params = {}) {
  CorpusHistogram h{space, std::vector<std::uint64_t>(bins, 0), 0};
  const Raster view = feature_space_view(image, space, params);
  for (double v : view.values()) {
    h.counts[value_bin(v, bins)] += 1;
  }
  h.total = image.size();
  return h;
}

// Per-image histograms summed in input order.
inline CorpusHistogram corpus_histogram(const std::vector<Raster>& corpus, const FeatureSpace& space,
                                        std::size_t bins = 256, const DescriptorParams& params = {},
                                        int workers = 1) {
  if (corpus.empty()) throw Error(Errc::empty_dataset, "corpus has no images");
  if (bins < 2) throw Error(Errc::invalid_argument, "histogram needs at least 2 bins");
  const auto parts = parallel_map(corpus.size(), workers, [&](std::size_t i) {
    return image_histogram(corpus[i], space, bins, params);
  });
  CorpusHistogram total{space, std::vector<std::uint64_t>(bins, 0), 0};
  for (const auto& p : parts) total += p;
  return total;
}

// Pearson correlation of the two normalised frequency vectors, clamped to
// [-1, 1]. Symmetric in its arguments bit for bit.
inline double pcc(const CorpusHistogram& a, const CorpusHistogram& b) {
  if (!(a.space == b.space)) {
    throw Error(Errc::space_mismatch, "histograms are in different spaces: " + a.space.name() +
                                          " vs " + b.space.name());
  }
  if (a.bins() != b.bins()) throw Error(Errc::space_mismatch, "histograms have different bin counts");
  const auto fa = a.normalized(), fb = b.normalized();
  const double n = static_cast<double>(fa.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    ma += fa[i];
    mb += fb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const double da = fa[i] - ma, db = fb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) {
    throw Error(Errc::undefined_correlation, "correlation undefined for a constant histogram");
  }
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

struct PccReport {
  std::string corpus_a, corpus_b;
  std::size_t images_a = 0, images_b = 0;
  std::size_t bins = 256;
  std::vector<std::pair<FeatureSpace, double>> values;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json pcc_values = nlohmann::ordered_json::object();
    for (const auto& [space, v] : values) pcc_values[space.name()] = v;
    return {{"corpus_a", {{"id", corpus_a}, {"images", images_a}}},
            {"corpus_b", {{"id", corpus_b}, {"images", images_b}}},
            {"bins", bins},
            {"pcc", std::move(pcc_values)}};
  }
};

inline PccReport pcc_report(const std::vector<Raster>& a, const std::vector<Raster>& b,
                            const std::vector<FeatureSpace>& spaces, std::size_t bins = 256,
                            const DescriptorParams& params = {}, int workers = 1) {
  PccReport r;
  r.images_a = a.size();
  r.images_b = b.size();
  r.bins = bins;
  for (const auto& space : spaces) {
    r.values.emplace_back(space, pcc(corpus_histogram(a, space, bins, params, workers),
                                     corpus_histogram(b, space, bins, params, workers)));
  }
  return r;
}

}  // namespace msfa
