#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "msfa/binary_io.hpp"
#include "msfa/error.hpp"
#include "msfa/feature_stack.hpp"
#include "msfa/raster.hpp"

namespace msfa {

namespace detail {

inline cv::Mat read_any(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(Errc::unreadable_file, "no such file " + path.string());
  }
  cv::Mat m;
  try {
    m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw Error(Errc::unreadable_file, path.string() + ": " + e.what());
  }
  if (m.data == nullptr) throw Error(Errc::unreadable_file, "cannot decode " + path.string());
  return m;
}

inline void write_encoded(const std::filesystem::path& path, const cv::Mat& m,
                          const std::vector<int>& params = {}) {
  std::vector<uchar> buf;
  if (!cv::imencode(path.extension().string(), m, buf, params)) {
    throw Error(Errc::io_error, "cannot encode " + path.string());
  }
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(buf.data()), buf.size()));
}

}  // namespace detail

// Raw pixel values, no normalisation. Colour images are reduced by the
// unweighted mean of their colour channels; an alpha channel is ignored.
inline Raster load_grayscale(const std::filesystem::path& path) {
  const cv::Mat m = detail::read_any(path);
  BitDepth depth;
  switch (m.depth()) {
    case CV_8U: depth = BitDepth::u8; break;
    case CV_16U: depth = BitDepth::u16; break;
    default:
      throw Error(Errc::unsupported_bit_depth, path.string() + ": only 8- and 16-bit images are supported");
  }
  if (m.cols < 1 || m.rows < 1) throw Error(Errc::zero_dimension, path.string() + " has no pixels");
  const int channels = m.channels();
  if (channels != 1 && channels != 3 && channels != 4) {
    throw Error(Errc::unsupported_bit_depth, path.string() + ": unsupported channel count " +
                                                 std::to_string(channels));
  }
  const int colour = channels == 1 ? 1 : 3;
  cv::Mat f;
  m.convertTo(f, CV_64F);
  std::vector<double> values(static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols));
  for (int y = 0; y < m.rows; ++y) {
    const double* row = f.ptr<double>(y);
    for (int x = 0; x < m.cols; ++x) {
      double sum = 0.0;
      for (int c = 0; c < colour; ++c) sum += row[x * channels + c];
      values[static_cast<std::size_t>(y) * static_cast<std::size_t>(m.cols) + static_cast<std::size_t>(x)] =
          sum / colour;
    }
  }
  return Raster(m.cols, m.rows, std::move(values), depth);
}

inline std::pair<int, int> probe_image_size(const std::filesystem::path& path) {
  const cv::Mat m = detail::read_any(path);
  return {m.cols, m.rows};
}

inline bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".tif" || ext == ".tiff" || ext == ".jpg" || ext == ".jpeg" ||
         ext == ".bmp";
}

// Image files directly inside `dir`, sorted by name.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::io_error, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Writes raw values rounded and clamped to the raster's original bit depth.
inline void save_png(const Raster& r, const std::filesystem::path& path) {
  const bool wide = r.bit_depth_origin() == BitDepth::u16;
  const double hi = wide ? 65535.0 : 255.0;
  cv::Mat m(r.height(), r.width(), wide ? CV_16UC1 : CV_8UC1);
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      const double v = std::clamp(std::round(r(x, y)), 0.0, hi);
      if (wide) m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(v);
      else m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(v);
    }
  }
  detail::write_encoded(path, m);
}

// One 32-bit float page per channel.
inline void save_multipage_tiff(const FeatureStack& fs, const std::filesystem::path& path) {
  if (fs.empty()) throw Error(Errc::invalid_argument, "feature stack has no channels");
  std::vector<cv::Mat> pages;
  for (std::size_t c = 0; c < fs.channels(); ++c) {
    const Raster& r = fs.channel(c);
    cv::Mat m(r.height(), r.width(), CV_32FC1);
    for (int y = 0; y < r.height(); ++y) {
      for (int x = 0; x < r.width(); ++x) m.at<float>(y, x) = static_cast<float>(r(x, y));
    }
    pages.push_back(std::move(m));
  }
  namespace fs_ = std::filesystem;
  const fs_::path parent = path.has_parent_path() ? path.parent_path() : fs_::path(".");
  fs_::create_directories(parent);
  const fs_::path tmp = parent / ("." + path.stem().string() + ".partial.tiff");
  if (!cv::imwritemulti(tmp.string(), pages)) throw Error(Errc::io_error, "cannot write " + path.string());
  fs_::rename(tmp, path);
}

// Horizontal-axis labels with one bar per value in [lo, hi].
inline void save_bar_chart(const std::vector<std::pair<std::string, double>>& bars,
                           const std::filesystem::path& path, const std::string& title,
                           double lo = 0.0, double hi = 1.0) {
  const int bar_w = 70, gap = 30, left = 60, top = 50, plot_h = 300, bottom = 60;
  const int n = static_cast<int>(bars.size());
  const int width = left + std::max(n, 1) * (bar_w + gap) + gap;
  const int height = top + plot_h + bottom;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  cv::putText(img, title, {left, 30}, font, 0.6, {0, 0, 0}, 1, cv::LINE_AA);
  const auto y_of = [&](double v) {
    const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    return top + plot_h - static_cast<int>(std::lround(t * plot_h));
  };
  cv::line(img, {left, top}, {left, top + plot_h}, {0, 0, 0});
  cv::line(img, {left, y_of(lo)}, {width - gap / 2, y_of(lo)}, {0, 0, 0});
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    cv::putText(img, buf, {5, y_of(v) + 4}, font, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
  }
  for (int i = 0; i < n; ++i) {
    const int x0 = left + gap + i * (bar_w + gap);
    const int y_base = y_of(std::clamp(0.0, lo, hi));
    const int y_top = y_of(bars[static_cast<std::size_t>(i)].second);
    cv::rectangle(img, {x0, std::min(y_base, y_top)}, {x0 + bar_w, std::max(y_base, y_top)},
                  {180, 120, 40}, cv::FILLED);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", bars[static_cast<std::size_t>(i)].second);
    cv::putText(img, buf, {x0 + 8, std::min(y_base, y_top) - 6}, font, 0.45, {0, 0, 0}, 1, cv::LINE_AA);
    cv::putText(img, bars[static_cast<std::size_t>(i)].first, {x0 + 8, top + plot_h + 25}, font, 0.5,
                {0, 0, 0}, 1, cv::LINE_AA);
  }
  detail::write_encoded(path, img);
}

}  // namespace msfa
