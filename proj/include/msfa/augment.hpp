#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "msfa/binary_io.hpp"
#include "msfa/descriptor.hpp"
#include "msfa/error.hpp"
#include "msfa/raster.hpp"

namespace msfa {

// Detector input: the normalised SAR channel followed by descriptor channels.
struct AugmentedInput {
  std::vector<std::string> labels;
  std::vector<Raster> channels;

  std::size_t size() const noexcept { return channels.size(); }
  int width() const noexcept { return channels.empty() ? 0 : channels.front().width(); }
  int height() const noexcept { return channels.empty() ? 0 : channels.front().height(); }
};

enum class ChannelPolicy {
  one_per_descriptor, // [x, M1, ..., Mk]
  pad_to_three,       // as above, repeating the last descriptor until 3 channels
};

inline AugmentedInput compose(const Raster& x, const std::vector<DescriptorKind>& descriptors,
                              const DescriptorParams& params = {},
                              ChannelPolicy policy = ChannelPolicy::one_per_descriptor) {
  if (x.value_range().lo < 0.0 || x.value_range().hi > 1.0) {
    throw Error(Errc::invalid_argument, "compose expects a raster normalised to [0, 1]");
  }
  AugmentedInput a;
  a.labels.emplace_back("sar");
  a.channels.push_back(x);
  if (descriptors.empty()) {
    // SAR-as-RGB baseline.
    for (int i = 0; i < 2; ++i) {
      a.labels.emplace_back("sar");
      a.channels.push_back(x);
    }
    return a;
  }
  for (DescriptorKind k : descriptors) {
    a.labels.emplace_back(to_string(k));
    a.channels.push_back(descriptor_channel(x, k, params));
  }
  if (policy == ChannelPolicy::pad_to_three) {
    while (a.channels.size() < 3) {
      a.labels.push_back(a.labels.back());
      a.channels.push_back(a.channels.back());
    }
  }
  return a;
}

enum class TensorLayout { chw, hwc };

inline std::string_view to_string(TensorLayout l) { return l == TensorLayout::chw ? "chw" : "hwc"; }

inline TensorLayout parse_layout(std::string_view s) {
  if (s == "chw" || s == "channel-first") return TensorLayout::chw;
  if (s == "hwc" || s == "channel-last") return TensorLayout::hwc;
  throw Error(Errc::invalid_argument, "unknown tensor layout '" + std::string(s) + "'");
}

struct Tensor {
  std::vector<std::int64_t> shape;
  TensorLayout layout = TensorLayout::chw;
  std::vector<std::string> labels;
  std::vector<float> values;
};

inline nlohmann::json tensor_header(const Tensor& t) {
  return {{"shape", t.shape},
          {"layout", std::string(to_string(t.layout))},
          {"labels", t.labels},
          {"dtype", "f32"}};
}

inline Tensor to_tensor(const AugmentedInput& a, TensorLayout layout) {
  const auto c = static_cast<std::int64_t>(a.size());
  const auto h = static_cast<std::int64_t>(a.height());
  const auto w = static_cast<std::int64_t>(a.width());
  Tensor t;
  t.layout = layout;
  t.labels = a.labels;
  t.shape = layout == TensorLayout::chw ? std::vector<std::int64_t>{c, h, w}
                                        : std::vector<std::int64_t>{h, w, c};
  t.values.resize(static_cast<std::size_t>(c * h * w));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const auto v = a.channels[static_cast<std::size_t>(ch)].values();
    for (std::int64_t i = 0; i < h * w; ++i) {
      const std::int64_t dst = layout == TensorLayout::chw ? ch * h * w + i : i * c + ch;
      t.values[static_cast<std::size_t>(dst)] = static_cast<float>(v[static_cast<std::size_t>(i)]);
    }
  }
  return t;
}

// File: u64 LE header length, UTF-8 JSON header, raw f32 LE payload.
inline std::string encode_tensor(const Tensor& t) {
  const std::string header = tensor_header(t).dump();
  std::string out;
  out.reserve(8 + header.size() + t.values.size() * 4);
  put_u64_le(out, header.size());
  out += header;
  for (float f : t.values) put_f32_le(out, f);
  return out;
}

inline Tensor decode_tensor(std::string_view bytes) {
  if (bytes.size() < 8) throw Error(Errc::corrupt_header, "tensor file shorter than its header");
  const std::uint64_t hlen = get_u64_le(bytes);
  if (hlen > bytes.size() - 8) throw Error(Errc::corrupt_header, "tensor header length overruns file");
  Tensor t;
  try {
    const auto j = nlohmann::json::parse(bytes.substr(8, hlen));
    if (j.at("dtype").get<std::string>() != "f32") {
      throw Error(Errc::corrupt_header, "unsupported tensor dtype");
    }
    t.shape = j.at("shape").get<std::vector<std::int64_t>>();
    t.layout = parse_layout(j.at("layout").get<std::string>());
    t.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_header, std::string("tensor header: ") + e.what());
  }
  std::uint64_t count = 1;
  for (auto d : t.shape) {
    if (d < 0) throw Error(Errc::corrupt_header, "negative tensor dimension");
    count *= static_cast<std::uint64_t>(d);
  }
  const std::string_view payload = bytes.substr(8 + hlen);
  if (payload.size() != count * 4) {
    throw Error(Errc::payload_length_mismatch, "tensor payload has " +
                                                   std::to_string(payload.size()) +
                                                   " bytes, expected " + std::to_string(count * 4));
  }
  t.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) t.values[i] = get_f32_le(payload.data() + 4 * i);
  return t;
}

// Writes `path` and a JSON sidecar next to it (same stem, .json extension).
inline void export_tensor(const AugmentedInput& a, TensorLayout layout,
                          const std::filesystem::path& path) {
  const Tensor t = to_tensor(a, layout);
  write_file_atomic(path, encode_tensor(t));
  auto sidecar = path;
  sidecar.replace_extension(".json");
  write_file_atomic(sidecar, tensor_header(t).dump(2) + "\n");
}

inline Tensor import_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_file(path));
}

}  // namespace msfa
