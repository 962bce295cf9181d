#include <gtest/gtest.h>

#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "msfa/stage_plan.hpp"

using namespace msfa;

namespace {

Stage cls(std::string ds) { return {StageTask::cls, std::move(ds), StageInit::random, std::nullopt}; }
Stage det(std::string ds, TransferMode m) { return {StageTask::det, std::move(ds), StageInit::from_previous, m}; }

const StagePlan kThreeStage{{cls("D_IN"), det("D_RS", TransferMode::backbone), det("D_SAR", TransferMode::framework)}};
const StagePlan kTwoStage{{cls("D_IN"), det("D_SAR", TransferMode::backbone)}};

std::vector<Stage> stage_options() {
  std::vector<Stage> out;
  for (StageTask t : {StageTask::cls, StageTask::det}) {
    out.push_back({t, "d", StageInit::random, std::nullopt});
    out.push_back({t, "d", StageInit::from_previous, TransferMode::backbone});
    out.push_back({t, "d", StageInit::from_previous, TransferMode::framework});
  }
  return out;
}

std::vector<StagePlan> all_plans() {
  const auto opts = stage_options();
  std::vector<StagePlan> plans;
  for (const auto& a : opts) {
    for (const auto& b : opts) {
      plans.push_back({{a, b}});
      for (const auto& c : opts) plans.push_back({{a, b, c}});
    }
  }
  return plans;
}

boost::property_tree::ptree ini(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree t;
  boost::property_tree::read_ini(in, t);
  return t;
}

}  // namespace

TEST(Plan, CanonicalPlansAreAccepted) {
  EXPECT_TRUE(validate_plan(kThreeStage).ok());
  EXPECT_TRUE(validate_plan(kTwoStage).ok());
}

TEST(Plan, FrameworkTransferFromClassificationIsRejected) {
  const StagePlan p{{cls("D_IN"), det("D_SAR", TransferMode::framework)}};
  const auto r = validate_plan(p);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.violations[0].stage, 2u);
  EXPECT_NE(r.violations[0].message.find("det@D_SAR"), std::string::npos);
}

TEST(Plan, ExactlyTwoShapesAcceptedAmongAllShortPlans) {
  std::vector<StagePlan> accepted;
  for (const auto& p : all_plans()) {
    if (validate_plan(p).ok()) accepted.push_back(p);
  }
  ASSERT_EQ(accepted.size(), 2u);
  const Stage c = {StageTask::cls, "d", StageInit::random, std::nullopt};
  const Stage b = {StageTask::det, "d", StageInit::from_previous, TransferMode::backbone};
  const Stage f = {StageTask::det, "d", StageInit::from_previous, TransferMode::framework};
  EXPECT_EQ(accepted[0], (StagePlan{{c, b}}));
  EXPECT_EQ(accepted[1], (StagePlan{{c, b, f}}));
}

TEST(Plan, RelaxationAdmitsBackboneAfterDet) {
  const StagePlan p{{cls("D_IN"), det("D_RS", TransferMode::backbone), det("D_SAR", TransferMode::backbone)}};
  EXPECT_FALSE(validate_plan(p).ok());
  EXPECT_TRUE(validate_plan(p, {true}).ok());
  std::size_t accepted = 0;
  for (const auto& q : all_plans()) accepted += validate_plan(q, {true}).ok();
  EXPECT_EQ(accepted, 3u);
}

TEST(Plan, StructuralViolations) {
  EXPECT_FALSE(validate_plan(StagePlan{}).ok());
  StagePlan four = kThreeStage;
  four.stages.push_back(det("x", TransferMode::framework));
  EXPECT_FALSE(validate_plan(four).ok());
  StagePlan unnamed = kTwoStage;
  unnamed.stages[1].dataset.clear();
  EXPECT_FALSE(validate_plan(unnamed).ok());
  StagePlan missing = kTwoStage;
  missing.stages[1].transfer.reset();
  EXPECT_FALSE(validate_plan(missing).ok());
  EXPECT_TRUE(validate_plan(StagePlan{{cls("D_IN")}}).ok());
}

TEST(Manifests, ThreeStagePlanYieldsThreeConfigs) {
  const auto m = emit_stage_manifests(kThreeStage);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].file_name, "stage1_cls_imagenet.ini");
  EXPECT_EQ(m[1].file_name, "stage2_det_dota.ini");
  EXPECT_EQ(m[2].file_name, "stage3_det_sardet-100k.ini");
  const auto s1 = ini(m[0].content), s2 = ini(m[1].content), s3 = ini(m[2].content);
  EXPECT_EQ(s1.get<int>("optimizer.epochs"), 100);
  EXPECT_EQ(s1.get<int>("optimizer.batch_size"), 512);
  EXPECT_EQ(s1.get<double>("optimizer.lr"), 1e-8);
  EXPECT_EQ(s2.get<double>("optimizer.lr"), 1e-4);
  EXPECT_EQ(s2.get<int>("optimizer.epochs"), 12);
  EXPECT_EQ(s2.get<int>("optimizer.batch_size"), 16);
  EXPECT_EQ(s2.get<std::string>("optimizer.name"), "AdamW");
  EXPECT_EQ(s2.get<std::string>("stage.phase"), "det-pretrain");
  EXPECT_EQ(s2.get<std::string>("stage.transfer"), "backbone");
  EXPECT_EQ(s3.get<std::string>("stage.phase"), "det-finetune");
  EXPECT_EQ(s3.get<std::string>("stage.transfer"), "framework");
}

TEST(Manifests, FinetuneRowsAndOverrides) {
  const StagePlan ssdd{{cls("D_IN"), det("DIOR", TransferMode::backbone), det("SSDD", TransferMode::framework)}};
  const auto m = emit_stage_manifests(ssdd);
  EXPECT_EQ(ini(m[2].content).get<int>("optimizer.batch_size"), 32);
  EXPECT_EQ(ini(m[2].content).get<double>("optimizer.lr"), 2.5e-4);
  HyperOverrides o;
  o.epochs = 1;
  for (const auto& s : emit_stage_manifests(ssdd, default_hyper_table(), o)) {
    EXPECT_EQ(ini(s.content).get<int>("optimizer.epochs"), 1) << s.file_name;
  }
  const auto unknown = emit_stage_manifests(StagePlan{{cls("mystery"), det("other", TransferMode::backbone)}});
  EXPECT_EQ(ini(unknown[1].content).get<int>("optimizer.batch_size"), 16);
}

TEST(Manifests, InvalidPlanThrows) {
  try {
    emit_stage_manifests(StagePlan{{det("D_RS", TransferMode::framework)}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_plan);
  }
}

TEST(PlanJson, ParsesAndRoundTrips) {
  const auto p = parse_plan(R"({"stages":[{"task":"cls","dataset":"D_IN","init":"random"},
      {"task":"det","dataset":"D_RS","init":"from_previous","transfer":"backbone"},
      {"task":"det","dataset":"D_SAR","init":"from_previous","transfer":"framework"}]})");
  EXPECT_EQ(p, kThreeStage);
  EXPECT_EQ(parse_plan(plan_to_json(p)), p);
  EXPECT_THROW(parse_plan(R"({"stages":[{"task":"seg","dataset":"x"}]})"), Error);
  EXPECT_THROW(parse_plan(R"({"stages":[{"task":"det","dataset":"x","transfer":"all"}]})"), Error);
  EXPECT_THROW(parse_plan("{"), Error);
  EXPECT_EQ(validate_plan(p).to_json()["ok"], true);
}
