#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "msfa/error.hpp"
#include "msfa/feature_stack.hpp"
#include "msfa/filters/canny.hpp"
#include "msfa/filters/gre.hpp"
#include "msfa/filters/haar.hpp"
#include "msfa/filters/hog.hpp"
#include "msfa/filters/wst.hpp"
#include "msfa/raster.hpp"

namespace msfa {

enum class DescriptorKind { hog, canny, haar, wst, gre };

inline constexpr std::array<DescriptorKind, 5> kAllDescriptors = {
    DescriptorKind::hog, DescriptorKind::canny, DescriptorKind::haar, DescriptorKind::wst,
    DescriptorKind::gre};

inline std::string_view to_string(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::hog: return "hog";
    case DescriptorKind::canny: return "canny";
    case DescriptorKind::haar: return "haar";
    case DescriptorKind::wst: return "wst";
    case DescriptorKind::gre: return "gre";
  }
  return "?";
}

inline DescriptorKind parse_descriptor(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (DescriptorKind k : kAllDescriptors) {
    if (lower == to_string(k)) return k;
  }
  throw Error(Errc::unknown_descriptor, "unknown descriptor '" + std::string(name) + "'");
}

// Comma-separated, order preserving, duplicates rejected.
inline std::vector<DescriptorKind> parse_descriptor_list(std::string_view list) {
  std::vector<DescriptorKind> out;
  std::stringstream ss{std::string(list)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const DescriptorKind k = parse_descriptor(item);
    for (DescriptorKind seen : out) {
      if (seen == k) throw Error(Errc::invalid_argument, "descriptor listed twice: " + item);
    }
    out.push_back(k);
  }
  return out;
}

struct DescriptorParams {
  filters::HogParams hog;
  filters::CannyParams canny;
  filters::HaarParams haar;
  filters::WstParams wst;
  filters::GreParams gre;

  void validate() const {
    hog.validate();
    canny.validate();
    haar.validate();
    wst.validate();
    gre.validate();
  }
};

// INI schema (every key optional):
//   [canny] sigma, low_frac, high_percentile
//   [hog]   cell, bins, block, norm_eps
//   [haar]  window
//   [wst]   J, L
//   [gre]   alpha, eps
inline DescriptorParams parse_descriptor_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::invalid_argument, std::string("descriptor config: ") + e.what());
  }
  static const std::array<std::string_view, 12> known = {
      "canny.sigma", "canny.low_frac", "canny.high_percentile", "hog.cell", "hog.bins",
      "hog.block",   "hog.norm_eps",   "haar.window",           "wst.J",    "wst.L",
      "gre.alpha",   "gre.eps"};
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      bool ok = false;
      for (auto k : known) ok = ok || k == full;
      if (!ok) throw Error(Errc::invalid_argument, "descriptor config: unknown key " + full);
    }
  }
  auto read = [&tree]<typename T>(const char* key, T fallback) {
    const auto node = tree.get_child_optional(key);
    return node ? node->get_value<T>() : fallback;
  };
  DescriptorParams p;
  try {
    p.canny.sigma = read("canny.sigma", p.canny.sigma);
    p.canny.low_frac = read("canny.low_frac", p.canny.low_frac);
    p.canny.high_percentile = read("canny.high_percentile", p.canny.high_percentile);
    p.hog.cell = read("hog.cell", p.hog.cell);
    p.hog.bins = read("hog.bins", p.hog.bins);
    p.hog.block = read("hog.block", p.hog.block);
    p.hog.norm_eps = read("hog.norm_eps", p.hog.norm_eps);
    p.haar.window = read("haar.window", p.haar.window);
    p.wst.J = read("wst.J", p.wst.J);
    p.wst.L = read("wst.L", p.wst.L);
    p.gre.alpha = read("gre.alpha", p.gre.alpha);
    p.gre.eps = read("gre.eps", p.gre.eps);
  } catch (const boost::property_tree::ptree_error& e) {
    throw Error(Errc::invalid_argument, std::string("descriptor config: ") + e.what());
  }
  p.validate();
  return p;
}

inline DescriptorParams load_descriptor_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open descriptor config " + path.string());
  return parse_descriptor_config(in);
}

// Raw descriptor output at its native resolution.
inline FeatureStack run_descriptor(const Raster& x, DescriptorKind kind,
                                   const DescriptorParams& p = {}) {
  switch (kind) {
    case DescriptorKind::hog: return filters::hog_map(x, p.hog);
    case DescriptorKind::canny: return filters::canny(x, p.canny);
    case DescriptorKind::haar: return filters::haar_map(x, p.haar);
    case DescriptorKind::wst: return filters::wst(x, p.wst);
    case DescriptorKind::gre: return filters::gre(x, p.gre);
  }
  throw Error(Errc::unknown_descriptor, "unhandled descriptor kind");
}

// Channel-wise mean, bilinear resize to the target, then min-max to [0, 1]
// (a constant map becomes all zeros).
inline FeatureStack pool_to_channel(const FeatureStack& fs, int target_w, int target_h) {
  if (fs.empty()) throw Error(Errc::invalid_argument, "cannot pool an empty feature stack");
  const std::size_t n = fs.channel(0).size();
  std::vector<double> mean(n, 0.0);
  for (std::size_t c = 0; c < fs.channels(); ++c) {
    const auto v = fs.channel(c).values();
    for (std::size_t i = 0; i < n; ++i) mean[i] += v[i];
  }
  for (double& m : mean) m /= static_cast<double>(fs.channels());
  const Raster avg(fs.width(), fs.height(), std::move(mean), fs.channel(0).bit_depth_origin());
  const Raster sized = resample(avg, target_w, target_h, Interpolation::bilinear);
  std::string label = fs.channels() == 1 ? fs.label(0) : "pooled";
  return single_channel(std::move(label), normalize(sized, NormalizePolicy::minmax()));
}

// Descriptor rendered as one [0, 1] channel at the input's size.
inline Raster descriptor_channel(const Raster& x, DescriptorKind kind,
                                 const DescriptorParams& p = {}) {
  return pool_to_channel(run_descriptor(x, kind, p), x.width(), x.height()).channel(0);
}

}  // namespace msfa
