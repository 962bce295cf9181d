#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "msfa/error.hpp"
#include "msfa/feature_stack.hpp"
#include "msfa/raster.hpp"

namespace msfa::filters {

// Ratio-of-exponentially-weighted-averages gradient.
struct GreParams {
  double alpha = 2.0; // exponential decay scale in pixels
  double eps = 1e-6;  // added to both one-sided means; 0 requires positive input

  void validate() const {
    if (!(alpha >= 1.0)) throw Error(Errc::invalid_argument, "gre alpha must be >= 1");
    if (!(eps >= 0.0)) throw Error(Errc::invalid_argument, "gre eps must be >= 0");
  }

  // Kernel truncated at 6 alpha.
  int support() const { return static_cast<int>(std::ceil(6.0 * alpha)); }
};

struct GreComponents {
  Raster horizontal; // |log(mean_right / mean_left)|
  Raster vertical;   // |log(mean_below / mean_above)|
};

namespace detail {

inline std::vector<double> exp_weights(int support, double alpha, bool one_sided) {
  // index k holds the weight for offset k (one-sided: k >= 1) or k - support.
  std::vector<double> w;
  double sum = 0.0;
  if (one_sided) {
    w.assign(static_cast<std::size_t>(support) + 1, 0.0);
    for (int k = 1; k <= support; ++k) sum += (w[static_cast<std::size_t>(k)] = std::exp(-k / alpha));
  } else {
    w.assign(static_cast<std::size_t>(2 * support + 1), 0.0);
    for (int k = -support; k <= support; ++k) {
      sum += (w[static_cast<std::size_t>(k + support)] = std::exp(-std::abs(k) / alpha));
    }
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace detail

inline GreComponents gre_components(const Raster& r, const GreParams& p = {}) {
  p.validate();
  if (p.eps == 0.0 && r.value_range().lo <= 0.0) {
    throw Error(Errc::invalid_argument, "gre with eps = 0 requires strictly positive input");
  }
  const int w = r.width(), h = r.height(), K = p.support();
  const auto side = detail::exp_weights(K, p.alpha, true);
  const auto both = detail::exp_weights(K, p.alpha, false);
  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

  // Smoothing across the derivative direction.
  std::vector<double> smooth_v(r.size()), smooth_h(r.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sv = 0.0, sh = 0.0;
      for (int k = -K; k <= K; ++k) {
        const double wk = both[static_cast<std::size_t>(k + K)];
        sv += wk * r(x, mirror_index(y + k, h));
        sh += wk * r(mirror_index(x + k, w), y);
      }
      smooth_v[idx(x, y)] = sv;
      smooth_h[idx(x, y)] = sh;
    }
  }

  std::vector<double> gh(r.size()), gv(r.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double left = 0.0, right = 0.0, above = 0.0, below = 0.0;
      for (int k = 1; k <= K; ++k) {
        const double wk = side[static_cast<std::size_t>(k)];
        left += wk * smooth_v[idx(mirror_index(x - k, w), y)];
        right += wk * smooth_v[idx(mirror_index(x + k, w), y)];
        above += wk * smooth_h[idx(x, mirror_index(y - k, h))];
        below += wk * smooth_h[idx(x, mirror_index(y + k, h))];
      }
      gh[idx(x, y)] = std::abs(std::log((right + p.eps) / (left + p.eps)));
      gv[idx(x, y)] = std::abs(std::log((below + p.eps) / (above + p.eps)));
    }
  }
  return {Raster(w, h, std::move(gh), r.bit_depth_origin()),
          Raster(w, h, std::move(gv), r.bit_depth_origin())};
}

inline FeatureStack gre(const Raster& r, const GreParams& p = {}) {
  const GreComponents c = gre_components(r, p);
  std::vector<double> mag(r.size());
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::hypot(c.horizontal.values()[i], c.vertical.values()[i]);
  }
  return single_channel("gre", Raster(r.width(), r.height(), std::move(mag), r.bit_depth_origin()));
}

}  // namespace msfa::filters
