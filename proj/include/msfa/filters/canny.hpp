#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "msfa/error.hpp"
#include "msfa/feature_stack.hpp"
#include "msfa/raster.hpp"

namespace msfa::filters {

struct CannyParams {
  double sigma = 1.4;
  double low_frac = 0.5;         // low threshold as a fraction of the high one
  double high_percentile = 90.0; // over nonzero gradient magnitudes

  void validate() const {
    if (!(sigma > 0.0)) throw Error(Errc::invalid_argument, "canny sigma must be > 0");
    if (!(low_frac > 0.0 && low_frac <= 1.0)) {
      throw Error(Errc::invalid_argument, "canny low_frac must be in (0, 1]");
    }
    if (!(high_percentile > 0.0 && high_percentile < 100.0)) {
      throw Error(Errc::invalid_argument, "canny high_percentile must be in (0, 100)");
    }
  }
};

namespace detail {

// Normalised Gaussian taps truncated at radius floor(2*sigma) (>= 1).
inline std::vector<double> gaussian_taps(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::floor(2.0 * sigma)));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * k * k / (sigma * sigma));
    taps[static_cast<std::size_t>(k + radius)] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

inline std::vector<double> separable_blur(const Raster& r, const std::vector<double>& taps) {
  const int w = r.width(), h = r.height();
  const int radius = static_cast<int>(taps.size() / 2);
  std::vector<double> tmp(r.size()), out(r.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] * r(mirror_index(x + k, w), y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] *
               tmp[static_cast<std::size_t>(mirror_index(y + k, h)) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

}  // namespace detail

struct CannyStages {
  std::vector<double> magnitude;  // Sobel magnitude of the smoothed image
  std::vector<double> suppressed; // magnitude after non-maximum suppression
  double high = 0.0;
  double low = 0.0;
};

// Gaussian smoothing, Sobel gradients, non-maximum suppression along the
// quantised gradient direction and percentile thresholds. Exposed for tests.
inline CannyStages canny_stages(const Raster& r, const CannyParams& p) {
  p.validate();
  const int w = r.width(), h = r.height();
  const auto smooth = detail::separable_blur(r, detail::gaussian_taps(p.sigma));
  auto at = [&](int x, int y) {
    return smooth[static_cast<std::size_t>(mirror_index(y, h)) * w + mirror_index(x, w)];
  };

  CannyStages s;
  s.magnitude.assign(r.size(), 0.0);
  std::vector<std::uint8_t> sector(r.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      s.magnitude[i] = std::hypot(gx, gy);
      // 0: horizontal gradient, 1: 45 deg, 2: vertical, 3: 135 deg.
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      sector[i] = static_cast<std::uint8_t>(static_cast<int>(std::floor((angle + 22.5) / 45.0)) % 4);
    }
  }

  s.suppressed.assign(r.size(), 0.0);
  auto mag = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return s.magnitude[static_cast<std::size_t>(y) * w + x];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double m = s.magnitude[i];
      if (m <= 0.0) continue;
      double before = 0.0, after = 0.0;
      switch (sector[i]) {
        case 0: before = mag(x - 1, y); after = mag(x + 1, y); break;
        case 1: before = mag(x - 1, y - 1); after = mag(x + 1, y + 1); break;
        case 2: before = mag(x, y - 1); after = mag(x, y + 1); break;
        default: before = mag(x + 1, y - 1); after = mag(x - 1, y + 1); break;
      }
      if (m > before && m >= after) s.suppressed[i] = m;
    }
  }

  std::vector<double> nonzero;
  for (double m : s.magnitude) {
    if (m > 0.0) nonzero.push_back(m);
  }
  if (!nonzero.empty()) {
    s.high = percentile(std::move(nonzero), p.high_percentile);
    s.low = p.low_frac * s.high;
  }
  return s;
}

// Binary edge map: strong pixels (>= high) plus weak pixels (>= low) that are
// 8-connected to a strong pixel through other weak pixels.
inline FeatureStack canny(const Raster& r, const CannyParams& p = {}) {
  const int w = r.width(), h = r.height();
  const CannyStages s = canny_stages(r, p);
  std::vector<double> edges(r.size(), 0.0);
  if (s.high > 0.0) {
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (s.suppressed[i] >= s.high) {
        edges[i] = 1.0;
        stack.push_back(i);
      }
    }
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % static_cast<std::size_t>(w));
      const int y = static_cast<int>(i / static_cast<std::size_t>(w));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
          if (edges[j] == 0.0 && s.suppressed[j] > 0.0 && s.suppressed[j] >= s.low) {
            edges[j] = 1.0;
            stack.push_back(j);
          }
        }
      }
    }
  }
  return single_channel("canny", Raster(w, h, std::move(edges), r.bit_depth_origin()));
}

}  // namespace msfa::filters
