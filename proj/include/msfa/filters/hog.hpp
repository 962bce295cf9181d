#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "msfa/error.hpp"
#include "msfa/feature_stack.hpp"
#include "msfa/raster.hpp"

namespace msfa::filters {

struct HogParams {
  int cell = 8;            // pixels per cell side
  int bins = 9;            // unsigned orientation bins over [0, 180)
  int block = 2;           // cells per block side
  double norm_eps = 1e-12; // added to the squared L2 block norm

  void validate() const {
    if (cell < 2) throw Error(Errc::invalid_argument, "hog cell must be >= 2");
    if (bins < 2) throw Error(Errc::invalid_argument, "hog bins must be >= 2");
    if (block < 1) throw Error(Errc::invalid_argument, "hog block must be >= 1");
    if (!(norm_eps >= 0.0)) throw Error(Errc::invalid_argument, "hog norm_eps must be >= 0");
  }
};

// Raw per-cell orientation histograms, cells_y x cells_x x bins.
struct HogCells {
  int cells_x = 0;
  int cells_y = 0;
  int bins = 0;
  std::vector<double> hist;

  double& at(int cx, int cy, int b) {
    return hist[(static_cast<std::size_t>(cy) * cells_x + cx) * bins + b];
  }
  double at(int cx, int cy, int b) const {
    return hist[(static_cast<std::size_t>(cy) * cells_x + cx) * bins + b];
  }
};

// Orientation bin for a gradient, hard assignment over [0, 180).
inline int hog_bin(double gx, double gy, int bins) {
  double deg = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 180.0;
  if (deg >= 180.0) deg -= 180.0;
  return std::min(bins - 1, static_cast<int>(std::floor(deg * bins / 180.0)));
}

// Centred-difference gradients with reflected borders; pixels beyond the last
// whole cell are ignored.
inline HogCells hog_cell_histograms(const Raster& r, const HogParams& p) {
  p.validate();
  HogCells c;
  c.cells_x = r.width() / p.cell;
  c.cells_y = r.height() / p.cell;
  c.bins = p.bins;
  if (c.cells_x < p.block || c.cells_y < p.block) {
    throw Error(Errc::too_small_input, "image " + std::to_string(r.width()) + "x" +
                                           std::to_string(r.height()) +
                                           " is smaller than one hog block");
  }
  c.hist.assign(static_cast<std::size_t>(c.cells_x) * c.cells_y * c.bins, 0.0);
  const int w = r.width(), h = r.height();
  for (int y = 0; y < c.cells_y * p.cell; ++y) {
    for (int x = 0; x < c.cells_x * p.cell; ++x) {
      const double gx = r(mirror_index(x + 1, w), y) - r(mirror_index(x - 1, w), y);
      const double gy = r(x, mirror_index(y + 1, h)) - r(x, mirror_index(y - 1, h));
      const double m = std::hypot(gx, gy);
      if (m == 0.0) continue;
      c.at(x / p.cell, y / p.cell, hog_bin(gx, gy, p.bins)) += m;
    }
  }
  return c;
}

// Per-cell descriptor value: every block (block x block cells, stride one
// cell) is L2-normalised; a cell's value is the mean over the blocks that
// contain it of its mean normalised bin value.
inline std::vector<double> hog_cell_values(const HogCells& c, const HogParams& p) {
  std::vector<double> acc(static_cast<std::size_t>(c.cells_x) * c.cells_y, 0.0);
  std::vector<int> hits(acc.size(), 0);
  for (int by = 0; by + p.block <= c.cells_y; ++by) {
    for (int bx = 0; bx + p.block <= c.cells_x; ++bx) {
      double sq = 0.0;
      for (int cy = by; cy < by + p.block; ++cy) {
        for (int cx = bx; cx < bx + p.block; ++cx) {
          for (int b = 0; b < c.bins; ++b) sq += c.at(cx, cy, b) * c.at(cx, cy, b);
        }
      }
      const double norm = std::sqrt(sq + p.norm_eps);
      for (int cy = by; cy < by + p.block; ++cy) {
        for (int cx = bx; cx < bx + p.block; ++cx) {
          double cell_sum = 0.0;
          for (int b = 0; b < c.bins; ++b) cell_sum += c.at(cx, cy, b);
          const std::size_t i = static_cast<std::size_t>(cy) * c.cells_x + cx;
          acc[i] += norm > 0.0 ? cell_sum / norm / c.bins : 0.0;
          hits[i] += 1;
        }
      }
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (hits[i] > 0) acc[i] /= hits[i];
  }
  return acc;
}

inline FeatureStack hog_map(const Raster& r, const HogParams& p = {}) {
  const HogCells cells = hog_cell_histograms(r, p);
  Raster grid(cells.cells_x, cells.cells_y, hog_cell_values(cells, p), r.bit_depth_origin());
  return single_channel("hog", resample(grid, r.width(), r.height(), Interpolation::bilinear));
}

}  // namespace msfa::filters
