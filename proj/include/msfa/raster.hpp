#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msfa/error.hpp"

namespace msfa {

enum class BitDepth { u8 = 8, u16 = 16 };

struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Single-channel real-valued image, row-major. Immutable once built: every
// transform returns a new Raster.
class Raster {
 public:
  Raster() = default;

  Raster(int width, int height, std::vector<double> values, BitDepth origin = BitDepth::u8)
      : width_(width), height_(height), values_(std::move(values)), origin_(origin) {
    if (width < 1 || height < 1) {
      throw Error(Errc::zero_dimension, "raster dimensions must be >= 1, got " +
                                            std::to_string(width) + "x" + std::to_string(height));
    }
    if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(Errc::invalid_argument, "raster value count does not match dimensions");
    }
    range_ = observed_range();
  }

  static Raster filled(int width, int height, double value, BitDepth origin = BitDepth::u8) {
    return Raster(width, height,
                  std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                          static_cast<std::size_t>(std::max(height, 0)),
                                      value),
                  origin);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  BitDepth bit_depth_origin() const noexcept { return origin_; }
  ValueRange value_range() const noexcept { return range_; }

  std::span<const double> values() const noexcept { return values_; }
  double operator()(int x, int y) const noexcept {
    return values_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                   static_cast<std::size_t>(x)];
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.values_ == b.values_;
  }

 private:
  ValueRange observed_range() const {
    if (values_.empty()) return {};
    auto [mn, mx] = std::minmax_element(values_.begin(), values_.end());
    return {*mn, *mx};
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
  BitDepth origin_ = BitDepth::u8;
  ValueRange range_{};
};

// Reflect-101 border index (…2 1 | 0 1 2 … n-1 | n-2 …), valid for any offset.
inline int mirror_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Linear-interpolated percentile on a sorted copy, p in [0, 100].
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(Errc::invalid_argument, "percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

struct NormalizePolicy {
  enum class Kind { minmax, percentile };
  Kind kind = Kind::minmax;
  double low_pct = 2.0;
  double high_pct = 98.0;

  static NormalizePolicy minmax() { return {}; }
  static NormalizePolicy percentiles(double lo = 2.0, double hi = 98.0) {
    return {Kind::percentile, lo, hi};
  }
};

// Maps values to [0, 1]. A degenerate range (constant image, or equal
// percentiles) maps to all zeros.
inline Raster normalize(const Raster& r, NormalizePolicy policy = NormalizePolicy::minmax()) {
  std::vector<double> in(r.values().begin(), r.values().end());
  double lo = r.value_range().lo;
  double hi = r.value_range().hi;
  if (policy.kind == NormalizePolicy::Kind::percentile) {
    if (!(policy.low_pct >= 0.0 && policy.low_pct < policy.high_pct && policy.high_pct <= 100.0)) {
      throw Error(Errc::invalid_argument, "percentile bounds must satisfy 0 <= pl < ph <= 100");
    }
    lo = percentile(in, policy.low_pct);
    hi = percentile(in, policy.high_pct);
  }
  std::vector<double> out(in.size(), 0.0);
  if (hi > lo) {
    const double span = hi - lo;
    for (std::size_t i = 0; i < in.size(); ++i) {
      out[i] = std::clamp((in[i] - lo) / span, 0.0, 1.0);
    }
  }
  return Raster(r.width(), r.height(), std::move(out), r.bit_depth_origin());
}

enum class Interpolation { nearest, bilinear };

// Pixel-centre aligned resampling: destination pixel d samples source
// coordinate (d + 0.5) * src/dst - 0.5, clamped to the valid range.
inline Raster resample(const Raster& r, int new_w, int new_h,
                       Interpolation method = Interpolation::bilinear) {
  if (new_w < 1 || new_h < 1) {
    throw Error(Errc::zero_dimension, "resample target must be at least 1x1");
  }
  if (new_w == r.width() && new_h == r.height()) return r;

  const double sx = static_cast<double>(r.width()) / new_w;
  const double sy = static_cast<double>(r.height()) / new_h;
  std::vector<double> out(static_cast<std::size_t>(new_w) * static_cast<std::size_t>(new_h));

  if (method == Interpolation::nearest) {
    for (int y = 0; y < new_h; ++y) {
      const int syi = std::min(static_cast<int>(std::floor((y + 0.5) * sy)), r.height() - 1);
      for (int x = 0; x < new_w; ++x) {
        const int sxi = std::min(static_cast<int>(std::floor((x + 0.5) * sx)), r.width() - 1);
        out[static_cast<std::size_t>(y) * new_w + x] = r(sxi, syi);
      }
    }
    return Raster(new_w, new_h, std::move(out), r.bit_depth_origin());
  }

  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int n_dst, int n_src, double scale) {
    std::vector<Tap> t(static_cast<std::size_t>(n_dst));
    for (int d = 0; d < n_dst; ++d) {
      const double s = std::clamp((d + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_src - 1));
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, n_src - 1);
      t[static_cast<std::size_t>(d)] = {i0, i1, s - i0};
    }
    return t;
  };
  const auto tx = taps(new_w, r.width(), sx);
  const auto ty = taps(new_h, r.height(), sy);
  for (int y = 0; y < new_h; ++y) {
    const Tap& vy = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < new_w; ++x) {
      const Tap& vx = tx[static_cast<std::size_t>(x)];
      const double top = r(vx.i0, vy.i0) + (r(vx.i1, vy.i0) - r(vx.i0, vy.i0)) * vx.f;
      const double bot = r(vx.i0, vy.i1) + (r(vx.i1, vy.i1) - r(vx.i0, vy.i1)) * vx.f;
      out[static_cast<std::size_t>(y) * new_w + x] = top + (bot - top) * vy.f;
    }
  }
  return Raster(new_w, new_h, std::move(out), r.bit_depth_origin());
}

// Extracts the window [x, x+w) x [y, y+h); must lie inside r.
inline Raster crop(const Raster& r, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > r.width() || y + h > r.height()) {
    throw Error(Errc::invalid_argument, "crop window outside raster");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int yy = y; yy < y + h; ++yy) {
    for (int xx = x; xx < x + w; ++xx) out.push_back(r(xx, yy));
  }
  return Raster(w, h, std::move(out), r.bit_depth_origin());
}

// Reflect-101 padding by independent amounts on each side.
inline Raster pad_reflect(const Raster& r, int left, int top, int right, int bottom) {
  const int w = r.width() + left + right;
  const int h = r.height() + top + bottom;
  std::vector<double> out(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    const int sy = mirror_index(y - top, r.height());
    for (int x = 0; x < w; ++x) {
      out[static_cast<std::size_t>(y) * w + x] = r(mirror_index(x - left, r.width()), sy);
    }
  }
  return Raster(w, h, std::move(out), r.bit_depth_origin());
}

// Summed-area table with a zero first row and column.
class IntegralImage {
 public:
  explicit IntegralImage(const Raster& r)
      : width_(r.width()), height_(r.height()),
        sums_(static_cast<std::size_t>(r.width() + 1) * static_cast<std::size_t>(r.height() + 1),
              0.0) {
    const std::size_t stride = static_cast<std::size_t>(width_) + 1;
    for (int y = 0; y < height_; ++y) {
      double row = 0.0;
      for (int x = 0; x < width_; ++x) {
        row += r(x, y);
        sums_[(y + 1) * stride + (x + 1)] = sums_[y * stride + (x + 1)] + row;
      }
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  // Sum over [x, x+w) x [y, y+h).
  double rect_sum(int x, int y, int w, int h) const noexcept {
    const std::size_t stride = static_cast<std::size_t>(width_) + 1;
    const std::size_t x0 = static_cast<std::size_t>(x), y0 = static_cast<std::size_t>(y);
    const std::size_t x1 = x0 + static_cast<std::size_t>(w), y1 = y0 + static_cast<std::size_t>(h);
    return sums_[y1 * stride + x1] - sums_[y0 * stride + x1] - sums_[y1 * stride + x0] +
           sums_[y0 * stride + x0];
  }

 private:
  int width_;
  int height_;
  std::vector<double> sums_;
};

}  // namespace msfa
