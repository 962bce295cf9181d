#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "msfa/error.hpp"
#include "msfa/raster.hpp"

namespace msfa {

// Multi-channel descriptor output. All channels share dimensions; each has a
// semantic label (e.g. a scattering path).
class FeatureStack {
 public:
  FeatureStack() = default;

  void push_back(std::string label, Raster channel) {
    if (!channels_.empty() &&
        (channel.width() != width() || channel.height() != height())) {
      throw Error(Errc::invalid_argument, "feature channel '" + label + "' has mismatched size");
    }
    labels_.push_back(std::move(label));
    channels_.push_back(std::move(channel));
  }

  std::size_t channels() const noexcept { return channels_.size(); }
  bool empty() const noexcept { return channels_.empty(); }
  int width() const noexcept { return channels_.empty() ? 0 : channels_.front().width(); }
  int height() const noexcept { return channels_.empty() ? 0 : channels_.front().height(); }

  const Raster& channel(std::size_t i) const { return channels_.at(i); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  friend bool operator==(const FeatureStack&, const FeatureStack&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<Raster> channels_;
};

inline FeatureStack single_channel(std::string label, Raster r) {
  FeatureStack fs;
  fs.push_back(std::move(label), std::move(r));
  return fs;
}

}  // namespace msfa
