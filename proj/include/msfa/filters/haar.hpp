#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "msfa/error.hpp"
#include "msfa/feature_stack.hpp"
#include "msfa/raster.hpp"

namespace msfa::filters {

struct HaarParams {
  int window = 16;

  void validate() const {
    if (window < 4 || window % 2 != 0) {
      throw Error(Errc::invalid_argument, "haar window must be even and >= 4");
    }
  }
};

enum class HaarTemplate {
  edge_vertical,   // left half vs right half
  edge_horizontal, // top half vs bottom half
  line_vertical,   // centre column strip vs outer strips
  line_horizontal, // centre row strip vs outer strips
  diagonal,        // main-diagonal quadrants vs anti-diagonal quadrants
  point,           // centre square vs surround
};

inline constexpr std::array<HaarTemplate, 6> kHaarTemplates = {
    HaarTemplate::edge_vertical, HaarTemplate::edge_horizontal, HaarTemplate::line_vertical,
    HaarTemplate::line_horizontal, HaarTemplate::diagonal, HaarTemplate::point};

// Signed response of one template over the window x window support whose
// top-left corner is (x0, y0) in the integral image's coordinates. Responses
// are differences of region means.
inline double haar_response(const IntegralImage& ii, int x0, int y0, int window, HaarTemplate t) {
  const int w = window, h = window / 2, q = window / 4;
  auto sum = [&](int x, int y, int sw, int sh) { return ii.rect_sum(x0 + x, y0 + y, sw, sh); };
  auto area = [](int sw, int sh) { return static_cast<double>(sw) * static_cast<double>(sh); };
  const double total = sum(0, 0, w, w);
  switch (t) {
    case HaarTemplate::edge_vertical:
      return sum(h, 0, w - h, w) / area(w - h, w) - sum(0, 0, h, w) / area(h, w);
    case HaarTemplate::edge_horizontal:
      return sum(0, h, w, w - h) / area(w, w - h) - sum(0, 0, w, h) / area(w, h);
    case HaarTemplate::line_vertical: {
      const double mid = sum(q, 0, w - 2 * q, w);
      return mid / area(w - 2 * q, w) - (total - mid) / area(2 * q, w);
    }
    case HaarTemplate::line_horizontal: {
      const double mid = sum(0, q, w, w - 2 * q);
      return mid / area(w, w - 2 * q) - (total - mid) / area(w, 2 * q);
    }
    case HaarTemplate::diagonal: {
      const double main = sum(0, 0, h, h) + sum(h, h, w - h, w - h);
      const double anti = sum(h, 0, w - h, h) + sum(0, h, h, w - h);
      return main / (area(h, h) + area(w - h, w - h)) - anti / (area(w - h, h) + area(h, w - h));
    }
    case HaarTemplate::point: {
      const double centre = sum(q, q, w - 2 * q, w - 2 * q);
      const double c_area = area(w - 2 * q, w - 2 * q);
      return centre / c_area - (total - centre) / (area(w, w) - c_area);
    }
  }
  return 0.0;
}

// Per-template signed response maps, in kHaarTemplates order. Each pixel's
// support is the window centred on it (extent [-window/2, window/2)), with the
// image mirrored across its borders.
inline std::vector<Raster> haar_responses(const Raster& r, const HaarParams& p = {}) {
  p.validate();
  if (r.width() < p.window || r.height() < p.window) {
    throw Error(Errc::too_small_input, "image smaller than the haar window");
  }
  const int half = p.window / 2;
  const IntegralImage ii(pad_reflect(r, half, half, half, half));
  std::vector<Raster> out;
  for (HaarTemplate t : kHaarTemplates) {
    std::vector<double> v(r.size());
    for (int y = 0; y < r.height(); ++y) {
      for (int x = 0; x < r.width(); ++x) {
        v[static_cast<std::size_t>(y) * r.width() + x] = haar_response(ii, x, y, p.window, t);
      }
    }
    out.emplace_back(r.width(), r.height(), std::move(v), r.bit_depth_origin());
  }
  return out;
}

// Mean absolute response over the six templates.
inline FeatureStack haar_map(const Raster& r, const HaarParams& p = {}) {
  const auto responses = haar_responses(r, p);
  std::vector<double> v(r.size(), 0.0);
  for (const Raster& resp : responses) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += std::abs(resp.values()[i]);
  }
  for (double& x : v) x /= static_cast<double>(responses.size());
  return single_channel("haar", Raster(r.width(), r.height(), std::move(v), r.bit_depth_origin()));
}

}  // namespace msfa::filters
