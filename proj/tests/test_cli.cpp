#include <gtest/gtest.h>

#include "cli_util.hpp"
#include "msfa/archive.hpp"
#include "msfa/augment.hpp"
#include "msfa/stage_plan.hpp"
#include "test_util.hpp"

using namespace msfa;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(test::temp_dir("cli"));
    const auto a = test::write_fixture_images(*root_ / "a", 4, 96, 80, 1);
    test::write_fixture_images(*root_ / "b", 3, 64, 64, 2);
    to_coco(a, *root_ / "a.json");
  }
  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
  }
  static fs::path root() { return *root_; }

  static fs::path* root_;
};

fs::path* Cli::root_ = nullptr;

std::string w(int n) { return std::to_string(n); }

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(test::run_cli({"--help"}).status, 0);
  EXPECT_NE(test::run_cli({"--help"}).out.find("slice"), std::string::npos);
  EXPECT_EQ(test::run_cli({"frobnicate"}).status, 2);
  EXPECT_EQ(test::run_cli({"slice", "--ann"}).status, 2);
  EXPECT_EQ(test::run_cli({"stats", "--ann", (root() / "missing.json").string()}).status, 1);
}

TEST_F(Cli, SliceIsIdenticalAcrossWorkerCounts) {
  std::map<std::string, std::string> first;
  for (int n : {1, 4, 8}) {
    const auto out = root() / ("slice_" + w(n));
    ASSERT_EQ(test::run_cli({"--workers", w(n), "slice", "--in", (root() / "a").string(), "--ann",
                             (root() / "a.json").string(), "--out", out.string(), "--patch", "48", "--overlap",
                             "16", "--scales", "0.5,1.0"})
                  .status,
              0);
    const auto files = test::tree_contents(out);
    if (first.empty()) {
      first = files;
      EXPECT_EQ(from_coco(out / "annotations.json").images.size() + 2, files.size());
    } else {
      EXPECT_TRUE(files == first) << "workers " << n;
    }
  }
}

TEST_F(Cli, AugmentIsIdenticalAcrossWorkerCounts) {
  std::map<std::string, std::string> first;
  for (int n : {1, 4, 8}) {
    const auto out = root() / ("aug_" + w(n));
    ASSERT_EQ(test::run_cli({"--workers", w(n), "augment", "--descriptors", "wst,gre", "--in",
                             (root() / "a").string(), "--out", out.string()})
                  .status,
              0);
    const auto files = test::tree_contents(out);
    if (first.empty()) {
      first = files;
      ASSERT_EQ(files.size(), 8u);
      const Tensor t = decode_tensor(files.at("img0.tensor"));
      EXPECT_EQ(t.shape, (std::vector<std::int64_t>{3, 80, 96}));
      EXPECT_EQ(t.labels, (std::vector<std::string>{"sar", "wst", "gre"}));
    } else {
      EXPECT_TRUE(files == first) << "workers " << n;
    }
  }
}

TEST_F(Cli, PccIsIdenticalAcrossWorkerCounts) {
  std::string first;
  for (int n : {1, 4, 8}) {
    const auto r = test::run_cli({"--workers", w(n), "pcc", (root() / "a").string(), (root() / "b").string(),
                                  "--space", "all", "--bins", "64"});
    ASSERT_EQ(r.status, 0);
    if (first.empty()) {
      first = r.out;
      const auto j = nlohmann::json::parse(r.out);
      EXPECT_EQ(j["pcc"].size(), 6u);
      EXPECT_EQ(j["corpus_a"]["images"], 4);
      EXPECT_EQ(j["bins"], 64);
    } else {
      EXPECT_EQ(r.out, first) << "workers " << n;
    }
  }
  const auto self = nlohmann::json::parse(
      test::run_cli({"pcc", (root() / "a").string(), (root() / "a").string(), "--space", "pixel,wst"}).out);
  EXPECT_EQ(self["pcc"]["pixel"], 1.0);
  EXPECT_EQ(self["pcc"]["wst"], 1.0);
}

TEST_F(Cli, SplitStatsAndMerge) {
  const auto out = root() / "split";
  ASSERT_EQ(test::run_cli({"split", "--ann", (root() / "a.json").string(), "--out", out.string(), "--seed", "3"})
                .status,
            0);
  const auto train = from_coco(out / "train.json");
  EXPECT_EQ(train.images.size() + from_coco(out / "val.json").images.size() +
                from_coco(out / "test.json").images.size(),
            4u);
  const auto stats = test::run_cli({"stats", "--ann", (root() / "a.json").string(), "--name", "A", "--json",
                                    (root() / "stats.json").string()});
  ASSERT_EQ(stats.status, 0);
  EXPECT_NE(stats.out.find("1.00"), std::string::npos);
  const auto j = nlohmann::json::parse(read_file(root() / "stats.json"));
  EXPECT_EQ(j["datasets"][0]["all"]["instances"], 4);
  ASSERT_EQ(test::run_cli({"merge", (root() / "a.json").string(), (out / "train.json").string(), "--out",
                           (root() / "merged.json").string()})
                .status,
            0);
  EXPECT_EQ(from_coco(root() / "merged.json").images.size(), 4u + train.images.size());
}

TEST_F(Cli, FiltersDumpWritesAllWstChannels) {
  const auto out = root() / "wst.tiff";
  ASSERT_EQ(test::run_cli({"filters", "dump", "--descriptor", "wst", "--in", (root() / "a" / "img0.png").string(),
                           "--out", out.string()})
                .status,
            0);
  std::vector<cv::Mat> pages;
  ASSERT_TRUE(cv::imreadmulti(out.string(), pages, cv::IMREAD_UNCHANGED));
  EXPECT_EQ(pages.size(), 81u);
  EXPECT_EQ(test::run_cli({"filters", "dump", "--descriptor", "sift", "--in", (root() / "a" / "img0.png").string(),
                           "--out", out.string()})
                .status,
            1);
}

TEST_F(Cli, PlanValidateAndEmit) {
  const StagePlan good{{{StageTask::cls, "D_IN", StageInit::random, std::nullopt},
                        {StageTask::det, "D_RS", StageInit::from_previous, TransferMode::backbone},
                        {StageTask::det, "D_SAR", StageInit::from_previous, TransferMode::framework}}};
  write_file_atomic(root() / "good.json", plan_to_json(good));
  StagePlan bad = good;
  bad.stages[1].transfer = TransferMode::framework;
  write_file_atomic(root() / "bad.json", plan_to_json(bad));
  EXPECT_EQ(test::run_cli({"plan", "validate", (root() / "good.json").string()}).status, 0);
  const auto r = test::run_cli({"plan", "validate", (root() / "bad.json").string()});
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(nlohmann::json::parse(r.out)["ok"], false);
  const auto out = root() / "manifests";
  ASSERT_EQ(test::run_cli({"plan", "emit", (root() / "good.json").string(), "--out", out.string(), "--epochs", "1"})
                .status,
            0);
  const auto files = test::tree_contents(out);
  EXPECT_EQ(files.size(), 3u);
  EXPECT_NE(files.at("stage2_det_dota.ini").find("epochs = 1"), std::string::npos);
}

TEST_F(Cli, WeightsTransferReportsAndWrites) {
  WeightArchive src, dst;
  src.tensors["backbone.conv1.weight"] = {{2, 3, 1, 1}, {1, 2, 3, 4, 5, 6}};
  src.tensors["head.w"] = {{1}, {9}};
  dst.tensors["backbone.conv1.weight"] = {{2, 2, 1, 1}, {0, 0, 0, 0}};
  dst.tensors["head.w"] = {{1}, {0}};
  write_archive(src, root() / "src.msw");
  write_archive(dst, root() / "dst.msw");
  const auto r = test::run_cli({"weights", "transfer", "--src", (root() / "src.msw").string(), "--dst",
                                (root() / "dst.msw").string(), "--out", (root() / "out.msw").string(), "--mode",
                                "backbone"});
  ASSERT_EQ(r.status, 0);
  const auto rep = nlohmann::json::parse(r.out);
  EXPECT_EQ(rep["adapted"], nlohmann::json({"backbone.conv1.weight"}));
  EXPECT_EQ(rep["skipped"], nlohmann::json({"head.w"}));
  const auto out = read_archive(root() / "out.msw");
  EXPECT_EQ(out.tensors.at("backbone.conv1.weight").data, (std::vector<float>{3, 3, 7.5, 7.5}));
  EXPECT_EQ(out.tensors.at("head.w").data, (std::vector<float>{0}));
}
