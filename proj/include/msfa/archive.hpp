#pragma once

#include "json.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "msfa/binary_io.hpp"
#include "msfa/error.hpp"

namespace msfa {

struct WeightTensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::uint64_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1},
                           [](std::uint64_t a, std::int64_t d) { return a * static_cast<std::uint64_t>(d); });
  }

  friend bool operator==(const WeightTensor&, const WeightTensor&) = default;
};

struct ArchiveMetadata {
  std::string stage;
  std::string backbone_prefix = "backbone.";

  friend bool operator==(const ArchiveMetadata&, const ArchiveMetadata&) = default;
};

// Named tensors in key order plus producing-stage metadata.
struct WeightArchive {
  std::map<std::string, WeightTensor> tensors;
  ArchiveMetadata metadata;

  friend bool operator==(const WeightArchive&, const WeightArchive&) = default;
};

inline constexpr std::string_view kArchiveMetadataKey = "__metadata__";

// Layout: u64 LE header length, JSON header
//   {"__metadata__": {...}, key: {"dtype": "F32", "shape": [...], "offset": o, "nbytes": n}, ...}
// with keys in sorted order, then the f32 LE payload in key order.
inline std::string encode_archive(const WeightArchive& a) {
  nlohmann::json header = nlohmann::json::object();
  header[std::string(kArchiveMetadataKey)] = {{"stage", a.metadata.stage},
                                              {"backbone_prefix", a.metadata.backbone_prefix}};
  std::uint64_t offset = 0;
  for (const auto& [key, t] : a.tensors) {
    if (key == kArchiveMetadataKey) throw Error(Errc::invalid_argument, "reserved tensor key " + key);
    if (t.data.size() != t.numel()) {
      throw Error(Errc::payload_length_mismatch, "tensor '" + key + "' data does not match its shape");
    }
    const std::uint64_t nbytes = t.numel() * 4;
    header[key] = {{"dtype", "F32"}, {"shape", t.shape}, {"offset", offset}, {"nbytes", nbytes}};
    offset += nbytes;
  }
  const std::string h = header.dump();
  std::string out;
  out.reserve(8 + h.size() + offset);
  put_u64_le(out, h.size());
  out += h;
  for (const auto& [key, t] : a.tensors) {
    for (float f : t.data) put_f32_le(out, f);
  }
  return out;
}

namespace detail {

// Rejects repeated keys in any JSON object while parsing.
inline nlohmann::json parse_unique_keys(std::string_view text) {
  std::vector<std::set<std::string>> seen;
  const nlohmann::json::parser_callback_t cb = [&seen](int, nlohmann::json::parse_event_t ev,
                                                       nlohmann::json& parsed) {
    using E = nlohmann::json::parse_event_t;
    if (ev == E::object_start) {
      seen.emplace_back();
    } else if (ev == E::object_end) {
      seen.pop_back();
    } else if (ev == E::key) {
      const auto name = parsed.get<std::string>();
      if (!seen.back().insert(name).second) {
        throw Error(Errc::duplicate_key, "archive header repeats key '" + name + "'");
      }
    }
    return true;
  };
  return nlohmann::json::parse(text, cb);
}

}  // namespace detail

inline WeightArchive decode_archive(std::string_view bytes) {
  if (bytes.size() < 8) throw Error(Errc::corrupt_header, "archive shorter than its header length");
  const std::uint64_t hlen = get_u64_le(bytes);
  if (hlen > bytes.size() - 8) throw Error(Errc::corrupt_header, "archive header length overruns file");
  nlohmann::json header;
  try {
    header = detail::parse_unique_keys(bytes.substr(8, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_header, std::string("archive header: ") + e.what());
  }
  if (!header.is_object()) throw Error(Errc::corrupt_header, "archive header is not an object");
  const std::string_view payload = bytes.substr(8 + hlen);
  WeightArchive a;
  std::uint64_t covered = 0;
  try {
    for (const auto& [key, entry] : header.items()) {
      if (key == kArchiveMetadataKey) {
        a.metadata.stage = entry.value("stage", "");
        a.metadata.backbone_prefix = entry.value("backbone_prefix", "backbone.");
        continue;
      }
      if (entry.at("dtype").get<std::string>() != "F32") {
        throw Error(Errc::corrupt_header, "tensor '" + key + "' has unsupported dtype");
      }
      WeightTensor t;
      t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      for (auto d : t.shape) {
        if (d < 0) throw Error(Errc::corrupt_header, "tensor '" + key + "' has a negative dimension");
      }
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
      if (nbytes != t.numel() * 4) {
        throw Error(Errc::payload_length_mismatch,
                    "tensor '" + key + "' declares " + std::to_string(nbytes) + " bytes for " +
                        std::to_string(t.numel()) + " elements");
      }
      if (offset > payload.size() || nbytes > payload.size() - offset) {
        throw Error(Errc::payload_length_mismatch,
                    "tensor '" + key + "' extends past the end of the payload");
      }
      t.data.resize(t.numel());
      for (std::uint64_t i = 0; i < t.numel(); ++i) t.data[i] = get_f32_le(payload.data() + offset + 4 * i);
      covered += nbytes;
      a.tensors.emplace(key, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_header, std::string("archive header: ") + e.what());
  }
  if (covered != payload.size()) {
    throw Error(Errc::payload_length_mismatch, "archive payload has " + std::to_string(payload.size()) +
                                                   " bytes, tensors cover " + std::to_string(covered));
  }
  return a;
}

inline void write_archive(const WeightArchive& a, const std::filesystem::path& path) {
  write_file_atomic(path, encode_archive(a));
}

inline WeightArchive read_archive(const std::filesystem::path& path) {
  return decode_archive(read_file(path));
}

// (out, c_src, kh, kw) -> (out, c_dst, kh, kw): per-filter mean over input
// channels, replicated and scaled by c_src / c_dst. With matching channel
// counts the weights pass through unchanged unless `force` is set.
inline WeightTensor adapt_first_layer(const WeightTensor& w, std::int64_t c_dst, bool force = false) {
  if (w.shape.size() != 4) throw Error(Errc::invalid_argument, "first-layer weights must be 4-D");
  const std::int64_t out = w.shape[0], c_src = w.shape[1], kh = w.shape[2], kw = w.shape[3];
  if (c_src < 1 || c_dst < 1) throw Error(Errc::invalid_argument, "channel counts must be >= 1");
  if (c_src == c_dst && !force) return w;
  const std::int64_t k = kh * kw;
  WeightTensor r{{out, c_dst, kh, kw}, std::vector<float>(static_cast<std::size_t>(out * c_dst * k))};
  const double scale = static_cast<double>(c_src) / static_cast<double>(c_dst);
  for (std::int64_t o = 0; o < out; ++o) {
    for (std::int64_t i = 0; i < k; ++i) {
      double sum = 0.0;
      for (std::int64_t c = 0; c < c_src; ++c) sum += w.data[static_cast<std::size_t>((o * c_src + c) * k + i)];
      const auto v = static_cast<float>(scale * sum / static_cast<double>(c_src));
      for (std::int64_t c = 0; c < c_dst; ++c) r.data[static_cast<std::size_t>((o * c_dst + c) * k + i)] = v;
    }
  }
  return r;
}

enum class TransferMode { backbone, framework };

inline std::string_view to_string(TransferMode m) {
  return m == TransferMode::backbone ? "backbone" : "framework";
}

inline TransferMode parse_transfer_mode(std::string_view s) {
  if (s == "backbone") return TransferMode::backbone;
  if (s == "framework") return TransferMode::framework;
  throw Error(Errc::invalid_argument, "unknown transfer mode '" + std::string(s) + "'");
}

struct TransferReport {
  std::vector<std::string> copied;
  std::vector<std::string> adapted;
  std::vector<std::string> skipped;

  nlohmann::ordered_json to_json() const {
    return {{"copied", copied}, {"adapted", adapted}, {"skipped", skipped}};
  }
};

struct TransferResult {
  WeightArchive archive;
  TransferReport report;
};

namespace detail {

// Same rank 4, equal in every dimension except input channels.
inline bool channel_adaptable(const WeightTensor& src, const WeightTensor& dst) {
  return src.shape.size() == 4 && dst.shape.size() == 4 && src.shape[0] == dst.shape[0] &&
         src.shape[2] == dst.shape[2] && src.shape[3] == dst.shape[3] && src.shape[1] != dst.shape[1];
}

}  // namespace detail

// Fills the skeleton from `src`. Backbone mode only considers keys under
// `prefix`; framework mode considers every key. Keys that are missing from
// src or whose shapes cannot be reconciled keep their skeleton values.
inline TransferResult transfer_weights(const WeightArchive& src, const WeightArchive& dst_skeleton,
                                       TransferMode mode, const std::string& prefix = "backbone.") {
  TransferResult r{dst_skeleton, {}};
  bool overlap = false;
  for (auto& [key, dst] : r.archive.tensors) {
    const bool eligible = mode == TransferMode::framework || key.rfind(prefix, 0) == 0;
    const auto it = eligible ? src.tensors.find(key) : src.tensors.end();
    if (it == src.tensors.end()) {
      r.report.skipped.push_back(key);
      continue;
    }
    overlap = true;
    if (it->second.shape == dst.shape) {
      dst = it->second;
      r.report.copied.push_back(key);
    } else if (detail::channel_adaptable(it->second, dst)) {
      dst = adapt_first_layer(it->second, dst.shape[1]);
      r.report.adapted.push_back(key);
    } else {
      r.report.skipped.push_back(key);
    }
  }
  if (!overlap) {
    throw Error(Errc::no_overlap, "no " + std::string(to_string(mode)) +
                                      " keys shared between source and destination");
  }
  return r;
}

}  // namespace msfa
