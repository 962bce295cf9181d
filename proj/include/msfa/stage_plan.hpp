#pragma once

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msfa/archive.hpp"
#include "msfa/binary_io.hpp"
#include "msfa/error.hpp"

namespace msfa {

enum class StageTask { cls, det };
enum class StageInit { random, from_previous };

inline std::string_view to_string(StageTask t) { return t == StageTask::cls ? "cls" : "det"; }
inline std::string_view to_string(StageInit i) {
  return i == StageInit::random ? "random" : "from_previous";
}

struct Stage {
  StageTask task = StageTask::cls;
  std::string dataset;
  StageInit init = StageInit::random;
  std::optional<TransferMode> transfer; // set iff init == from_previous

  std::string describe() const { return std::string(to_string(task)) + "@" + dataset; }
  friend bool operator==(const Stage&, const Stage&) = default;
};

struct StagePlan {
  std::vector<Stage> stages;
  friend bool operator==(const StagePlan&, const StagePlan&) = default;
};

// {"stages": [{"task": "cls", "dataset": "D_IN", "init": "random"},
//             {"task": "det", "dataset": "D_RS", "init": "from_previous", "transfer": "backbone"}, ...]}
inline StagePlan parse_plan(std::string_view text) {
  StagePlan p;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& stages = j.at("stages");
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& s = stages[i];
      const std::string where = "stages[" + std::to_string(i) + "]";
      Stage st;
      const auto task = s.at("task").get<std::string>();
      if (task == "cls") st.task = StageTask::cls;
      else if (task == "det") st.task = StageTask::det;
      else throw Error(Errc::invalid_plan, where + ".task: expected cls or det, got '" + task + "'");
      st.dataset = s.at("dataset").get<std::string>();
      const auto init = s.value("init", std::string("random"));
      if (init == "random") st.init = StageInit::random;
      else if (init == "from_previous") st.init = StageInit::from_previous;
      else throw Error(Errc::invalid_plan, where + ".init: expected random or from_previous");
      if (s.contains("transfer") && !s["transfer"].is_null()) {
        st.transfer = parse_transfer_mode(s["transfer"].get<std::string>());
      }
      p.stages.push_back(std::move(st));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_plan, std::string("plan file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::invalid_argument) throw Error(Errc::invalid_plan, e.what());
    throw;
  }
  return p;
}

inline StagePlan load_plan(const std::filesystem::path& path) { return parse_plan(read_file(path)); }

inline std::string plan_to_json(const StagePlan& p) {
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const auto& s : p.stages) {
    nlohmann::ordered_json j{{"task", to_string(s.task)}, {"dataset", s.dataset}, {"init", to_string(s.init)}};
    if (s.transfer) j["transfer"] = to_string(*s.transfer);
    stages.push_back(std::move(j));
  }
  return nlohmann::ordered_json{{"stages", std::move(stages)}}.dump(2) + "\n";
}

struct PlanRules {
  // Also accept a det stage that takes only the backbone of a preceding det stage.
  bool allow_backbone_after_det = false;
};

struct PlanViolation {
  std::size_t stage = 0; // 1-based; 0 for plan-level problems
  std::string message;
};

struct PlanReport {
  std::vector<PlanViolation> violations;

  bool ok() const noexcept { return violations.empty(); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json v = nlohmann::ordered_json::array();
    for (const auto& x : violations) v.push_back({{"stage", x.stage}, {"message", x.message}});
    return {{"ok", ok()}, {"violations", std::move(v)}};
  }
};

// Accepted chains: cls(random) -> det(backbone), optionally followed by
// det(framework).
inline PlanReport validate_plan(const StagePlan& p, const PlanRules& rules = {}) {
  PlanReport r;
  auto flag = [&](std::size_t i, std::string msg) {
    r.violations.push_back({i + 1, "stage " + std::to_string(i + 1) + " (" + p.stages[i].describe() +
                                       "): " + std::move(msg)});
  };
  if (p.stages.empty()) {
    r.violations.push_back({0, "plan has no stages"});
    return r;
  }
  if (p.stages.size() > 3) {
    r.violations.push_back({0, "plan has " + std::to_string(p.stages.size()) + " stages, at most 3 are supported"});
  }
  for (std::size_t i = 0; i < p.stages.size(); ++i) {
    const Stage& s = p.stages[i];
    if (s.dataset.empty()) flag(i, "dataset is empty");
    if (s.init == StageInit::random && s.transfer) flag(i, "random init must not declare a transfer component");
    if (s.init == StageInit::from_previous && !s.transfer) flag(i, "from_previous init needs a transfer component");
    if (i == 0) {
      if (s.init != StageInit::random) flag(i, "first stage must use random init");
      if (s.task != StageTask::cls) flag(i, "first stage must be classification pretraining");
      continue;
    }
    const Stage& prev = p.stages[i - 1];
    if (s.task != StageTask::det) flag(i, "only the first stage may be classification");
    if (s.init != StageInit::from_previous) flag(i, "must initialise from the previous stage");
    if (!s.transfer) continue;
    if (*s.transfer == TransferMode::framework && prev.task != StageTask::det) {
      flag(i, "framework transfer needs a det predecessor; a cls stage only produces a backbone");
    }
    if (*s.transfer == TransferMode::backbone && prev.task == StageTask::det && !rules.allow_backbone_after_det) {
      flag(i, "a det predecessor must hand over the full framework");
    }
  }
  return r;
}

// ------------------------------------------------------ stage manifests

enum class StagePhase { cls_pretrain, det_pretrain, det_finetune };

inline std::string_view to_string(StagePhase p) {
  switch (p) {
    case StagePhase::cls_pretrain: return "cls-pretrain";
    case StagePhase::det_pretrain: return "det-pretrain";
    case StagePhase::det_finetune: return "det-finetune";
  }
  return "";
}

struct HyperRow {
  StagePhase phase;
  std::string dataset;
  std::string optimizer;
  int batch_size;
  double lr;
  int epochs;
};

// Training settings per (phase, dataset); the first row of each phase is the
// fallback for unlisted datasets.
inline std::vector<HyperRow> default_hyper_table() {
  return {
      {StagePhase::cls_pretrain, "imagenet", "AdamW", 512, 1e-8, 100},
      {StagePhase::det_pretrain, "dota", "AdamW", 16, 1e-4, 12},
      {StagePhase::det_pretrain, "dior", "AdamW", 16, 1e-4, 12},
      {StagePhase::det_finetune, "sardet-100k", "AdamW", 16, 1e-4, 12},
      {StagePhase::det_finetune, "ssdd", "AdamW", 32, 2.5e-4, 12},
      {StagePhase::det_finetune, "hrsid", "AdamW", 32, 2.5e-4, 12},
  };
}

inline std::string canonical_dataset(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "d_in") return "imagenet";
  if (s == "d_rs") return "dota";
  if (s == "d_sar") return "sardet-100k";
  return s;
}

struct HyperOverrides {
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<std::string> optimizer;
};

struct StageManifest {
  std::string file_name;
  std::string content;
};

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::vector<StageManifest> emit_stage_manifests(const StagePlan& p,
                                                       const std::vector<HyperRow>& table = default_hyper_table(),
                                                       const HyperOverrides& overrides = {},
                                                       const PlanRules& rules = {}) {
  const PlanReport report = validate_plan(p, rules);
  if (!report.ok()) {
    std::string msg = "plan is invalid";
    for (const auto& v : report.violations) msg += "\n  " + v.message;
    throw Error(Errc::invalid_plan, msg);
  }
  std::vector<StageManifest> out;
  for (std::size_t i = 0; i < p.stages.size(); ++i) {
    const Stage& s = p.stages[i];
    const StagePhase phase = s.task == StageTask::cls ? StagePhase::cls_pretrain
                             : i + 1 == p.stages.size() ? StagePhase::det_finetune
                                                        : StagePhase::det_pretrain;
    const std::string dataset = canonical_dataset(s.dataset);
    const HyperRow* row = nullptr;
    for (const auto& h : table) {
      if (h.phase != phase) continue;
      if (!row) row = &h;
      if (h.dataset == dataset) {
        row = &h;
        break;
      }
    }
    if (!row) throw Error(Errc::invalid_plan, "no hyper-parameter row for phase " + std::string(to_string(phase)));
    std::string c;
    auto kv = [&c](std::string_view k, const std::string& v) {
      c += std::string(k) + " = " + v + "\n";
    };
    c += "[stage]\n";
    kv("index", std::to_string(i + 1));
    kv("phase", std::string(to_string(phase)));
    kv("task", std::string(to_string(s.task)));
    kv("dataset", dataset);
    kv("init", std::string(to_string(s.init)));
    kv("transfer", s.transfer ? std::string(to_string(*s.transfer)) : "none");
    c += "\n[optimizer]\n";
    kv("name", overrides.optimizer.value_or(row->optimizer));
    kv("batch_size", std::to_string(overrides.batch_size.value_or(row->batch_size)));
    kv("lr", format_number(overrides.lr.value_or(row->lr)));
    kv("epochs", std::to_string(overrides.epochs.value_or(row->epochs)));
    out.push_back({"stage" + std::to_string(i + 1) + "_" + std::string(to_string(s.task)) + "_" + dataset + ".ini",
                   std::move(c)});
  }
  return out;
}

}  // namespace msfa
