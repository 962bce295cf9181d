#include <gtest/gtest.h>

#include <random>
#include <set>

#include "msfa/archive.hpp"
#include "test_util.hpp"

using namespace msfa;

namespace {

WeightTensor random_tensor(std::vector<std::int64_t> shape, std::mt19937_64& rng) {
  WeightTensor t{std::move(shape), {}};
  std::normal_distribution<float> g(0.0f, 1.0f);
  t.data.resize(t.numel());
  for (float& v : t.data) v = g(rng);
  return t;
}

WeightTensor zeros(std::vector<std::int64_t> shape) {
  WeightTensor t{std::move(shape), {}};
  t.data.assign(t.numel(), 0.0f);
  return t;
}

WeightArchive detector(std::int64_t in_channels, std::mt19937_64& rng) {
  WeightArchive a;
  a.tensors["backbone.conv1.weight"] = random_tensor({64, in_channels, 7, 7}, rng);
  a.tensors["backbone.layer1.0.weight"] = random_tensor({64, 64, 3, 3}, rng);
  a.tensors["backbone.layer1.0.bias"] = random_tensor({64}, rng);
  a.tensors["neck.fpn.weight"] = random_tensor({256, 64, 1, 1}, rng);
  a.tensors["bbox_head.weight"] = random_tensor({4, 256}, rng);
  a.metadata.stage = "det@dota";
  return a;
}

WeightArchive skeleton_of(const WeightArchive& a, std::int64_t in_channels) {
  WeightArchive s;
  for (const auto& [k, t] : a.tensors) {
    auto shape = t.shape;
    if (k == "backbone.conv1.weight") shape[1] = in_channels;
    s.tensors[k] = zeros(shape);
  }
  return s;
}

double conv_at(const WeightTensor& w, std::int64_t o, const std::vector<std::vector<double>>& planes, int x0, int y0,
               int size) {
  const std::int64_t c = w.shape[1], kh = w.shape[2], kw = w.shape[3];
  double s = 0;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < kh; ++i) {
      for (std::int64_t j = 0; j < kw; ++j) {
        const int y = (y0 + static_cast<int>(i)) % size, x = (x0 + static_cast<int>(j)) % size;
        s += w.data[static_cast<std::size_t>(((o * c + ch) * kh + i) * kw + j)] *
             planes[static_cast<std::size_t>(ch)][static_cast<std::size_t>(y * size + x)];
      }
    }
  }
  return s;
}

}  // namespace

TEST(Archive, TwoByTwoTensorHasSixteenBytePayload) {
  WeightArchive a;
  a.tensors["w"] = {{2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}};
  const std::string bytes = encode_archive(a);
  EXPECT_EQ(bytes.size() - 8 - get_u64_le(bytes), 16u);
  const auto header = nlohmann::json::parse(bytes.substr(8, get_u64_le(bytes)));
  EXPECT_EQ(header["w"]["nbytes"], 16);
  EXPECT_EQ(header["w"]["dtype"], "F32");
}

TEST(Archive, RoundTripIsByteExact) {
  std::mt19937_64 rng(1);
  const WeightArchive a = detector(3, rng);
  const std::string bytes = encode_archive(a);
  const WeightArchive back = decode_archive(bytes);
  EXPECT_TRUE(back == a);
  EXPECT_EQ(encode_archive(back), bytes);
  const auto dir = test::temp_dir("archive");
  write_archive(a, dir / "w.msw");
  EXPECT_TRUE(read_archive(dir / "w.msw") == a);
}

TEST(Archive, TruncatedPayloadNamesTheTensor) {
  WeightArchive a;
  a.tensors["alpha"] = {{2}, {1.0f, 2.0f}};
  a.tensors["beta"] = {{2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}};
  const std::string bytes = encode_archive(a);
  try {
    decode_archive(bytes.substr(0, bytes.size() - 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::payload_length_mismatch);
    EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
  }
  try {
    decode_archive(bytes + "xxxx");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::payload_length_mismatch);
  }
}

TEST(Archive, DuplicateKeyAndCorruptHeader) {
  std::string header = R"({"w":{"dtype":"F32","shape":[1],"offset":0,"nbytes":4},"w":{"dtype":"F32","shape":[1],"offset":0,"nbytes":4}})";
  std::string bytes;
  put_u64_le(bytes, header.size());
  bytes += header;
  put_f32_le(bytes, 1.0f);
  try {
    decode_archive(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::duplicate_key);
  }
  std::string garbage;
  put_u64_le(garbage, 3);
  garbage += "{x}";
  try {
    decode_archive(garbage);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::corrupt_header);
  }
  EXPECT_THROW(decode_archive("abc"), Error);
  std::string overrun;
  put_u64_le(overrun, 1000);
  EXPECT_THROW(decode_archive(overrun + "{}"), Error);
}

TEST(Transfer, FrameworkCopiesEveryMatchingTensor) {
  std::mt19937_64 rng(2);
  const WeightArchive src = detector(3, rng);
  const auto r = transfer_weights(src, skeleton_of(src, 3), TransferMode::framework);
  EXPECT_EQ(r.report.copied.size(), src.tensors.size());
  EXPECT_TRUE(r.report.adapted.empty());
  EXPECT_TRUE(r.report.skipped.empty());
  EXPECT_TRUE(r.archive.tensors == src.tensors);
}

TEST(Transfer, BackboneLeavesHeadsUntouched) {
  std::mt19937_64 rng(3);
  const WeightArchive src = detector(3, rng);
  const WeightArchive skel = skeleton_of(src, 3);
  const auto r = transfer_weights(src, skel, TransferMode::backbone);
  EXPECT_TRUE(r.archive.tensors.at("bbox_head.weight") == skel.tensors.at("bbox_head.weight"));
  EXPECT_TRUE(r.archive.tensors.at("neck.fpn.weight") == skel.tensors.at("neck.fpn.weight"));
  EXPECT_TRUE(r.archive.tensors.at("backbone.layer1.0.weight") == src.tensors.at("backbone.layer1.0.weight"));
  EXPECT_EQ(r.report.copied.size(), 3u);
  EXPECT_EQ(r.report.skipped, (std::vector<std::string>{"bbox_head.weight", "neck.fpn.weight"}));
}

TEST(Transfer, FirstLayerIsAdaptedToTwoChannels) {
  std::mt19937_64 rng(4);
  const WeightArchive src = detector(3, rng);
  const WeightArchive skel = skeleton_of(src, 2);
  const auto r = transfer_weights(src, skel, TransferMode::backbone);
  std::vector<std::string> differing;
  for (const auto& [k, t] : skel.tensors) {
    if (t.shape != src.tensors.at(k).shape) differing.push_back(k);
  }
  EXPECT_EQ(r.report.adapted, differing);
  const WeightTensor& w = r.archive.tensors.at("backbone.conv1.weight");
  EXPECT_EQ(w.shape, (std::vector<std::int64_t>{64, 2, 7, 7}));
  const WeightTensor& s = src.tensors.at("backbone.conv1.weight");
  for (std::size_t o = 0; o < 64; ++o) {
    for (std::size_t i = 0; i < 49; ++i) {
      const double sum = s.data[(o * 3 + 0) * 49 + i] + s.data[(o * 3 + 1) * 49 + i] + s.data[(o * 3 + 2) * 49 + i];
      EXPECT_NEAR(w.data[(o * 2 + 0) * 49 + i], sum / 2.0, 1e-6);
      EXPECT_EQ(w.data[(o * 2 + 0) * 49 + i], w.data[(o * 2 + 1) * 49 + i]);
    }
  }
}

TEST(Transfer, ReportInvariantsHoldForRandomSkeletons) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    const WeightArchive src = detector(3, rng);
    WeightArchive skel = skeleton_of(src, coin(rng) ? 2 : 3);
    if (coin(rng)) skel.tensors.erase("neck.fpn.weight");
    if (coin(rng)) skel.tensors["backbone.extra"] = zeros({5});
    if (coin(rng)) skel.tensors["bbox_head.weight"] = zeros({8, 256});
    std::set<std::string> framework_moved;
    for (TransferMode mode : {TransferMode::framework, TransferMode::backbone}) {
      const auto r = transfer_weights(src, skel, mode);
      const auto& rep = r.report;
      EXPECT_EQ(rep.copied.size() + rep.adapted.size() + rep.skipped.size(), skel.tensors.size());
      std::set<std::string> all;
      for (const auto* v : {&rep.copied, &rep.adapted, &rep.skipped}) all.insert(v->begin(), v->end());
      EXPECT_EQ(all.size(), skel.tensors.size());
      for (const auto& [k, t] : r.archive.tensors) EXPECT_EQ(t.shape, skel.tensors.at(k).shape) << k;
      std::set<std::string> moved(rep.copied.begin(), rep.copied.end());
      moved.insert(rep.adapted.begin(), rep.adapted.end());
      if (mode == TransferMode::framework) {
        framework_moved = moved;
      } else {
        EXPECT_TRUE(std::includes(framework_moved.begin(), framework_moved.end(), moved.begin(), moved.end()));
      }
    }
  }
}

TEST(Transfer, NoOverlapIsAnError) {
  WeightArchive src, dst;
  src.tensors["a"] = {{1}, {1.0f}};
  dst.tensors["backbone.b"] = {{1}, {0.0f}};
  try {
    transfer_weights(src, dst, TransferMode::framework);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::no_overlap);
  }
  EXPECT_EQ(parse_transfer_mode("framework"), TransferMode::framework);
  EXPECT_THROW(parse_transfer_mode("all"), Error);
}

TEST(Adapt, PreservesResponseToChannelReplicatedInput) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> ch(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t c_src = ch(rng), c_dst = ch(rng);
    const WeightTensor w = random_tensor({4, c_src, 3, 3}, rng);
    const WeightTensor a = adapt_first_layer(w, c_dst, true);
    std::vector<double> plane(64);
    for (double& v : plane) v = u(rng);
    const std::vector<std::vector<double>> src_in(static_cast<std::size_t>(c_src), plane);
    const std::vector<std::vector<double>> dst_in(static_cast<std::size_t>(c_dst), plane);
    for (std::int64_t o = 0; o < 4; ++o) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          const double ref = conv_at(w, o, src_in, x, y, 8);
          worst = std::max(worst, std::abs(conv_at(a, o, dst_in, x, y, 8) - ref) / std::max(1.0, std::abs(ref)));
        }
      }
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(Adapt, ThreeToOneIsChannelSum) {
  std::mt19937_64 rng(7);
  const WeightTensor w = random_tensor({2, 3, 1, 2}, rng);
  const WeightTensor a = adapt_first_layer(w, 1);
  ASSERT_EQ(a.shape, (std::vector<std::int64_t>{2, 1, 1, 2}));
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_NEAR(a.data[o * 2 + i], w.data[o * 6 + i] + w.data[o * 6 + 2 + i] + w.data[o * 6 + 4 + i], 1e-6);
    }
  }
  EXPECT_TRUE(adapt_first_layer(w, 3) == w);
  EXPECT_THROW(adapt_first_layer(WeightTensor{{3, 3}, std::vector<float>(9)}, 1), Error);
}
