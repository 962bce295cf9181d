#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "msfa/image_io.hpp"
#include "msfa/msfa.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

enum class LogLevel { quiet, info, debug };
LogLevel g_log = LogLevel::info;

void log_info(const std::string& msg) {
  if (g_log != LogLevel::quiet) std::cerr << "msfa: " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (g_log == LogLevel::debug) std::cerr << "msfa: " << msg << "\n";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

msfa::NormalizePolicy parse_normalize(const std::string& s) {
  if (s == "minmax") return msfa::NormalizePolicy::minmax();
  if (s == "percentile") return msfa::NormalizePolicy::percentiles();
  throw msfa::Error(msfa::Errc::invalid_argument, "unknown normalisation '" + s + "'");
}

msfa::DescriptorParams descriptor_params(const std::string& config) {
  return config.empty() ? msfa::DescriptorParams{} : msfa::load_descriptor_config(config);
}

msfa::CategoryMapping category_mapping(const std::string& path) {
  return path.empty() ? msfa::CategoryMapping{} : msfa::CategoryMapping::load(path);
}

void write_json(const ordered_json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    msfa::write_file_atomic(path, text);
  }
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ------------------------------------------------------------------ ingest

struct IngestOptions {
  std::string format = "coco";
  std::string in;
  std::string out;
  std::string source;
  std::string mapping;
};

void add_ingest(CLI::App& app, std::function<void()>& action) {
  auto opt = std::make_shared<IngestOptions>();
  auto* cmd = app.add_subcommand("ingest", "Convert a source dataset (COCO, VOC XML, plain txt) to COCO JSON");
  cmd->add_option("--format", opt->format, "Source format: coco, voc-xml, plain-txt")
      ->capture_default_str()
      ->check(CLI::IsMember({"coco", "voc-xml", "voc", "plain-txt", "txt"}));
  cmd->add_option("--in", opt->in, "Source dataset root (or COCO JSON file)")->required();
  cmd->add_option("--out", opt->out, "Output COCO JSON file")->required();
  cmd->add_option("--source", opt->source, "Source dataset name recorded on every image");
  cmd->add_option("--mapping", opt->mapping, "Category mapping file (source = canonical lines)");
  cmd->callback([opt, &action] {
    action = [opt] {
      const auto d = msfa::ingest(msfa::parse_source_format(opt->format), opt->in,
                                  category_mapping(opt->mapping), opt->source, msfa::probe_image_size);
      msfa::to_coco(d, opt->out);
      log_info("ingested " + std::to_string(d.images.size()) + " images, " +
               std::to_string(d.annotations.size()) + " instances");
    };
  });
}

// ------------------------------------------------------------------- split

struct SplitOptions {
  std::string ann;
  std::string out;
  std::string ratios = "0.8,0.1,0.1";
  std::uint64_t seed = 0;
  bool ignore_predefined = false;
};

void add_split(CLI::App& app, std::function<void()>& action) {
  auto opt = std::make_shared<SplitOptions>();
  auto* cmd = app.add_subcommand("split", "Seeded train/val/test split of a COCO dataset");
  cmd->add_option("--ann", opt->ann, "Input COCO JSON")->required();
  cmd->add_option("--out", opt->out, "Output directory for train.json, val.json, test.json")->required();
  cmd->add_option("--ratios", opt->ratios, "Train,val,test ratios summing to 1")->capture_default_str();
  cmd->add_option("--seed", opt->seed, "Shuffle seed")->capture_default_str();
  cmd->add_flag("--ignore-predefined", opt->ignore_predefined,
                "Resplit even when every image already carries a split");
  cmd->callback([opt, &action] {
    action = [opt] {
      const auto parts = split_list(opt->ratios);
      if (parts.size() != 3) throw msfa::Error(msfa::Errc::invalid_argument, "--ratios needs three values");
      const msfa::SplitRatios r{std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
      const auto d = msfa::from_coco(opt->ann);
      const auto s = opt->ignore_predefined ? msfa::split_dataset(d, r, opt->seed)
                                            : msfa::split_or_adopt(d, r, opt->seed);
      for (const auto& w : s.warnings) log_info("warning: " + w);
      const fs::path out(opt->out);
      msfa::to_coco(s.train, out / "train.json");
      msfa::to_coco(s.val, out / "val.json");
      msfa::to_coco(s.test, out / "test.json");
      log_info("split " + std::to_string(d.images.size()) + " images into " +
               std::to_string(s.train.images.size()) + "/" + std::to_string(s.val.images.size()) + "/" +
               std::to_string(s.test.images.size()));
    };
  });
}

// ------------------------------------------------------------------- slice

struct SliceOptions {
  std::string in;
  std::string ann;
  std::string out;
  msfa::SliceSpec spec;
  std::string scales = "1.0";
};

struct SlicedImage {
  std::vector<msfa::ImageRecord> images;
  std::vector<std::vector<msfa::Instance>> instances;
  std::size_t kept = 0, dropped = 0, dropped_pairs = 0;
};

void add_slice(CLI::App& app, std::function<void()>& action, int& workers) {
  auto opt = std::make_shared<SliceOptions>();
  auto* cmd = app.add_subcommand("slice", "Tile images into overlapping patches with clipped annotations");
  cmd->add_option("--in", opt->in, "Directory holding the images named in --ann (omit for annotations only)");
  cmd->add_option("--ann", opt->ann, "Input COCO JSON")->required();
  cmd->add_option("--out", opt->out, "Output directory (patch PNGs and annotations.json)")->required();
  cmd->add_option("--patch", opt->spec.patch, "Patch side in pixels")->capture_default_str();
  cmd->add_option("--overlap", opt->spec.overlap, "Overlap between neighbouring patches")->capture_default_str();
  cmd->add_option("--keep-fraction", opt->spec.keep_fraction,
                  "Minimum clipped/original area ratio for an instance to stay in a patch")
      ->capture_default_str();
  cmd->add_option("--min-area", opt->spec.min_area, "Minimum clipped box area in pixels")->capture_default_str();
  cmd->add_option("--scales", opt->scales, "Comma-separated rescale factors")->capture_default_str();
  cmd->callback([opt, &action, &workers] {
    action = [opt, &workers] {
      msfa::SliceSpec spec = opt->spec;
      spec.scales.clear();
      for (const auto& s : split_list(opt->scales)) spec.scales.push_back(std::stod(s));
      spec.validate();
      const auto d = msfa::from_coco(opt->ann);
      std::map<int, std::vector<msfa::Instance>> by_image;
      for (const auto& a : d.annotations) by_image[a.image_id].push_back(a);
      const fs::path out(opt->out);
      fs::create_directories(out);

      const auto results = msfa::parallel_map(d.images.size(), workers, [&](std::size_t i) {
        const msfa::ImageRecord& im = d.images[i];
        const auto& insts = by_image[im.id];
        std::optional<msfa::Raster> pixels;
        if (!opt->in.empty()) pixels = msfa::load_grayscale(fs::path(opt->in) / im.file_name);
        const auto report = msfa::multi_scale_slice(im.width, im.height, insts, spec,
                                                    pixels ? &*pixels : nullptr);
        SlicedImage r;
        r.kept = report.kept;
        r.dropped = report.dropped;
        r.dropped_pairs = report.dropped_pairs;
        const std::string stem = fs::path(im.file_name).stem().string();
        for (const auto& p : report.patches) {
          msfa::ImageRecord rec = im;
          rec.file_name = msfa::patch_file_name(stem, p.scale, p.window.x, p.window.y);
          rec.width = p.window.w;
          rec.height = p.window.h;
          if (p.pixels) msfa::save_png(*p.pixels, out / rec.file_name);
          r.images.push_back(std::move(rec));
          r.instances.push_back(p.instances);
        }
        return r;
      });

      msfa::AnnotatedDataset sliced;
      sliced.categories = d.categories;
      std::size_t kept = 0, dropped = 0, dropped_pairs = 0;
      for (const auto& r : results) {
        kept += r.kept;
        dropped += r.dropped;
        dropped_pairs += r.dropped_pairs;
        for (std::size_t p = 0; p < r.images.size(); ++p) {
          msfa::ImageRecord rec = r.images[p];
          rec.id = static_cast<int>(sliced.images.size()) + 1;
          for (msfa::Instance inst : r.instances[p]) {
            inst.id = static_cast<int>(sliced.annotations.size()) + 1;
            inst.image_id = rec.id;
            sliced.annotations.push_back(inst);
          }
          sliced.images.push_back(std::move(rec));
        }
      }
      msfa::to_coco(sliced, out / "annotations.json");
      const ordered_json report{{"images", d.images.size()},
                                {"patches", sliced.images.size()},
                                {"instances_in", d.annotations.size()},
                                {"kept", kept},
                                {"dropped", dropped},
                                {"dropped_pairs", dropped_pairs}};
      write_json(report, (out / "slice_report.json").string());
      log_info("wrote " + std::to_string(sliced.images.size()) + " patches; kept " + std::to_string(kept) +
               ", dropped " + std::to_string(dropped));
    };
  });
}

// ------------------------------------------------------------------- merge

struct MergeOptions {
  std::vector<std::string> inputs;
  std::vector<std::string> sources;
  std::string out;
};

void add_merge(CLI::App& app, std::function<void()>& action) {
  auto opt = std::make_shared<MergeOptions>();
  auto* cmd = app.add_subcommand("merge", "Merge COCO datasets with unified categories");
  cmd->add_option("inputs", opt->inputs, "Input COCO JSON files")->required();
  cmd->add_option("--source", opt->sources,
                  "Source name per input for images without one (default: the file stem)");
  cmd->add_option("--out", opt->out, "Output COCO JSON")->required();
  cmd->callback([opt, &action] {
    action = [opt] {
      if (!opt->sources.empty() && opt->sources.size() != opt->inputs.size()) {
        throw msfa::Error(msfa::Errc::invalid_argument, "--source must be given once per input");
      }
      std::vector<msfa::AnnotatedDataset> parts;
      for (std::size_t i = 0; i < opt->inputs.size(); ++i) {
        auto d = msfa::from_coco(opt->inputs[i]);
        const std::string source =
            opt->sources.empty() ? fs::path(opt->inputs[i]).stem().string() : opt->sources[i];
        for (auto& im : d.images) {
          if (im.source_dataset.empty()) im.source_dataset = source;
        }
        parts.push_back(std::move(d));
      }
      const auto merged = msfa::merge(parts);
      msfa::to_coco(merged, opt->out);
      log_info("merged " + std::to_string(parts.size()) + " datasets: " +
               std::to_string(merged.images.size()) + " images, " +
               std::to_string(merged.annotations.size()) + " instances");
    };
  });
}

// ----------------------------------------------------------------- convert

struct ConvertOptions {
  std::string from = "coco";
  std::string to = "plain-txt";
  std::string in;
  std::string out;
  std::string source;
  std::string mapping;
};

void add_convert(CLI::App& app, std::function<void()>& action) {
  auto opt = std::make_shared<ConvertOptions>();
  auto* cmd = app.add_subcommand("convert", "Convert annotations between COCO, VOC XML and plain txt");
  cmd->add_option("--from", opt->from, "Input format: coco, voc-xml, plain-txt")
      ->capture_default_str()
      ->check(CLI::IsMember({"coco", "voc-xml", "voc", "plain-txt", "txt"}));
  cmd->add_option("--to", opt->to, "Output format: coco or plain-txt")
      ->capture_default_str()
      ->check(CLI::IsMember({"coco", "plain-txt", "txt"}));
  cmd->add_option("--in", opt->in, "Input file or dataset root")->required();
  cmd->add_option("--out", opt->out, "Output COCO file or label directory")->required();
  cmd->add_option("--source", opt->source, "Source dataset name");
  cmd->add_option("--mapping", opt->mapping, "Category mapping file");
  cmd->callback([opt, &action] {
    action = [opt] {
      const auto d = msfa::ingest(msfa::parse_source_format(opt->from), opt->in,
                                  category_mapping(opt->mapping), opt->source, msfa::probe_image_size);
      if (opt->to == "coco") {
        msfa::to_coco(d, opt->out);
        return;
      }
      for (const auto& [name, content] : msfa::to_plain_txt(d)) {
        msfa::write_file_atomic(fs::path(opt->out) / name, content);
      }
    };
  });
}

// ------------------------------------------------------------------- stats

struct StatsOptions {
  std::vector<std::string> ann;
  std::vector<std::string> names;
  std::string json;
};

std::string stats_table(const std::vector<msfa::DatasetStats>& rows) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %9s %9s %9s %9s %10s %10s %10s %10s %8s\n", "Dataset", "Train-Img",
                "Val-Img", "Test-Img", "All-Img", "Train-Ins", "Val-Ins", "Test-Ins", "All-Ins", "Ins/Img");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-16s %9zu %9zu %9zu %9zu %10zu %10zu %10zu %10zu %8s\n", r.name.c_str(),
                  r.train.images, r.val.images, r.test.images, r.all.images, r.train.instances,
                  r.val.instances, r.test.instances, r.all.instances, r.ins_per_img_text().c_str());
    os << line;
  }
  return os.str();
}

ordered_json tally_json(const msfa::SplitTally& t) {
  return {{"images", t.images}, {"instances", t.instances}};
}

void add_stats(CLI::App& app, std::function<void()>& action) {
  auto opt = std::make_shared<StatsOptions>();
  auto* cmd = app.add_subcommand("stats", "Image/instance table and per-category statistics");
  cmd->add_option("--ann", opt->ann, "COCO JSON files, one table row each")->required();
  cmd->add_option("--name", opt->names, "Row names (default: the file stem)");
  cmd->add_option("--json", opt->json, "Also write a JSON report to this path");
  cmd->callback([opt, &action] {
    action = [opt] {
      if (!opt->names.empty() && opt->names.size() != opt->ann.size()) {
        throw msfa::Error(msfa::Errc::invalid_argument, "--name must be given once per --ann");
      }
      std::vector<msfa::DatasetStats> rows;
      std::vector<msfa::AnnotatedDataset> sets;
      for (std::size_t i = 0; i < opt->ann.size(); ++i) {
        sets.push_back(msfa::from_coco(opt->ann[i]));
        rows.push_back(msfa::dataset_stats(
            sets.back(), opt->names.empty() ? fs::path(opt->ann[i]).stem().string() : opt->names[i]));
      }
      if (rows.size() > 1) {
        msfa::DatasetStats total;
        total.name = "Total";
        for (const auto& r : rows) {
          for (auto [dst, src] : {std::pair{&total.train, &r.train}, std::pair{&total.val, &r.val},
                                  std::pair{&total.test, &r.test}, std::pair{&total.all, &r.all}}) {
            dst->images += src->images;
            dst->instances += src->instances;
          }
        }
        rows.push_back(total);
      }
      std::cout << stats_table(rows);

      const auto categories = msfa::category_stats(sets.size() == 1 ? sets.front() : msfa::merge(sets));
      std::cout << "\n";
      char line[160];
      std::snprintf(line, sizeof line, "%-12s %10s %10s %12s\n", "Category", "Instances", "Percent", "Mean-Area");
      std::cout << line;
      for (const auto& c : categories) {
        std::snprintf(line, sizeof line, "%-12s %10zu %10s %12s\n", c.name.c_str(), c.count,
                      fixed(c.percentage, 2).c_str(), fixed(c.mean_area, 1).c_str());
        std::cout << line;
      }

      if (!opt->json.empty()) {
        ordered_json j{{"datasets", ordered_json::array()}, {"categories", ordered_json::array()}};
        for (const auto& r : rows) {
          j["datasets"].push_back({{"name", r.name},
                                   {"train", tally_json(r.train)},
                                   {"val", tally_json(r.val)},
                                   {"test", tally_json(r.test)},
                                   {"all", tally_json(r.all)},
                                   {"ins_per_img", msfa::round2(r.ins_per_img())}});
        }
        for (const auto& c : categories) {
          j["categories"].push_back(
              {{"name", c.name}, {"count", c.count}, {"percentage", c.percentage}, {"mean_area", c.mean_area}});
        }
        write_json(j, opt->json);
      }
    };
  });
}

// ----------------------------------------------------------------- filters

struct FiltersOptions {
  std::string descriptor = "wst";
  std::string in;
  std::string out;
  std::string config;
  std::string normalize = "minmax";
  bool pooled = false;
};

void add_filters(CLI::App& app, std::function<void()>& action) {
  auto opt = std::make_shared<FiltersOptions>();
  auto* cmd = app.add_subcommand("filters", "Descriptor inspection");
  cmd->require_subcommand(1);
  auto* dump = cmd->add_subcommand("dump", "Write a descriptor's feature stack as a multi-page float TIFF");
  dump->add_option("--descriptor", opt->descriptor, "hog, canny, haar, wst or gre")->capture_default_str();
  dump->add_option("--in", opt->in, "Input image")->required();
  dump->add_option("--out", opt->out, "Output TIFF path")->required();
  dump->add_option("--config", opt->config, "Descriptor parameter file (INI)");
  dump->add_option("--normalize", opt->normalize, "minmax or percentile")
      ->capture_default_str()
      ->check(CLI::IsMember({"minmax", "percentile"}));
  dump->add_flag("--pooled", opt->pooled, "Write only the pooled single channel");
  dump->callback([opt, &action] {
    action = [opt] {
      const auto params = descriptor_params(opt->config);
      const auto kind = msfa::parse_descriptor(opt->descriptor);
      const auto x = msfa::normalize(msfa::load_grayscale(opt->in), parse_normalize(opt->normalize));
      auto stack = msfa::run_descriptor(x, kind, params);
      if (opt->pooled) stack = msfa::pool_to_channel(stack, x.width(), x.height());
      msfa::save_multipage_tiff(stack, opt->out);
      log_info("wrote " + std::to_string(stack.channels()) + " channel(s)");
    };
  });
}

// ----------------------------------------------------------------- augment

struct AugmentOptions {
  std::string descriptors = "wst";
  std::string in;
  std::string out;
  std::string layout = "chw";
  std::string policy = "one-per-descriptor";
  std::string normalize = "minmax";
  std::string config;
};

void add_augment(CLI::App& app, std::function<void()>& action, int& workers) {
  auto opt = std::make_shared<AugmentOptions>();
  auto* cmd = app.add_subcommand("augment", "Build filter-augmented input tensors for a directory of images");
  cmd->add_option("--descriptors", opt->descriptors,
                  "Comma-separated descriptors; 'none' gives the 3-channel SAR baseline")
      ->capture_default_str();
  cmd->add_option("--in", opt->in, "Input image directory")->required();
  cmd->add_option("--out", opt->out, "Output directory for .tensor files and .json sidecars")->required();
  cmd->add_option("--layout", opt->layout, "chw or hwc")
      ->capture_default_str()
      ->check(CLI::IsMember({"chw", "hwc", "channel-first", "channel-last"}));
  cmd->add_option("--policy", opt->policy, "one-per-descriptor or pad-to-three")
      ->capture_default_str()
      ->check(CLI::IsMember({"one-per-descriptor", "pad-to-three"}));
  cmd->add_option("--normalize", opt->normalize, "minmax or percentile")
      ->capture_default_str()
      ->check(CLI::IsMember({"minmax", "percentile"}));
  cmd->add_option("--config", opt->config, "Descriptor parameter file (INI)");
  cmd->callback([opt, &action, &workers] {
    action = [opt, &workers] {
      const auto params = descriptor_params(opt->config);
      const auto kinds = opt->descriptors == "none" ? std::vector<msfa::DescriptorKind>{}
                                                    : msfa::parse_descriptor_list(opt->descriptors);
      const auto layout = msfa::parse_layout(opt->layout);
      const auto policy = opt->policy == "pad-to-three" ? msfa::ChannelPolicy::pad_to_three
                                                        : msfa::ChannelPolicy::one_per_descriptor;
      const auto norm = parse_normalize(opt->normalize);
      const auto files = msfa::list_images(opt->in);
      std::set<std::string> stems;
      for (const auto& f : files) {
        if (!stems.insert(f.stem().string()).second) {
          throw msfa::Error(msfa::Errc::invalid_argument, "two input images share the stem '" +
                                                              f.stem().string() + "'");
        }
      }
      msfa::parallel_map(files.size(), workers, [&](std::size_t i) {
        const auto x = msfa::normalize(msfa::load_grayscale(files[i]), norm);
        const auto a = msfa::compose(x, kinds, params, policy);
        msfa::export_tensor(a, layout, fs::path(opt->out) / (files[i].stem().string() + ".tensor"));
        log_debug("augmented " + files[i].filename().string());
        return 0;
      });
      log_info("wrote " + std::to_string(files.size()) + " tensors");
    };
  });
}

// --------------------------------------------------------------------- pcc

struct PccOptions {
  std::string space = "all";
  std::string a, b;
  std::size_t bins = 256;
  std::string json;
  std::string chart;
  std::string config;
};

void add_pcc(CLI::App& app, std::function<void()>& action, int& workers) {
  auto opt = std::make_shared<PccOptions>();
  auto* cmd = app.add_subcommand("pcc", "Pearson correlation of two corpora's value histograms per feature space");
  cmd->add_option("corpus_a", opt->a, "First image directory")->required();
  cmd->add_option("corpus_b", opt->b, "Second image directory")->required();
  cmd->add_option("--space", opt->space, "pixel, hog, canny, haar, wst, gre, a comma list, or all")
      ->capture_default_str();
  cmd->add_option("--bins", opt->bins, "Histogram bins")->capture_default_str()->check(CLI::Range(2, 1 << 20));
  cmd->add_option("--json", opt->json, "Write the report here instead of stdout");
  cmd->add_option("--chart", opt->chart, "Also draw a bar chart PNG");
  cmd->add_option("--config", opt->config, "Descriptor parameter file (INI)");
  cmd->callback([opt, &action, &workers] {
    action = [opt, &workers] {
      std::vector<msfa::FeatureSpace> spaces;
      if (opt->space == "all") {
        spaces = msfa::all_feature_spaces();
      } else {
        for (const auto& s : split_list(opt->space)) spaces.push_back(msfa::parse_feature_space(s));
      }
      auto load_dir = [&](const std::string& dir) {
        const auto files = msfa::list_images(dir);
        return msfa::parallel_map(files.size(), workers, [&](std::size_t i) { return msfa::load_grayscale(files[i]); });
      };
      const auto a = load_dir(opt->a), b = load_dir(opt->b);
      auto report = msfa::pcc_report(a, b, spaces, opt->bins, descriptor_params(opt->config), workers);
      report.corpus_a = opt->a;
      report.corpus_b = opt->b;
      write_json(report.to_json(), opt->json);
      if (!opt->chart.empty()) {
        std::vector<std::pair<std::string, double>> bars;
        for (const auto& [space, v] : report.values) bars.emplace_back(space.name(), v);
        const double lo = std::min(0.0, std::min_element(bars.begin(), bars.end(), [](auto& x, auto& y) {
                                          return x.second < y.second;
                                        })->second);
        msfa::save_bar_chart(bars, opt->chart, "PCC per feature space", lo < 0.0 ? -1.0 : 0.0, 1.0);
      }
    };
  });
}

// -------------------------------------------------------------------- plan

struct PlanOptions {
  std::string plan;
  std::string out;
  bool relaxed = false;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<std::string> optimizer;
};

void add_plan(CLI::App& app, std::function<void()>& action, int& exit_code) {
  auto opt = std::make_shared<PlanOptions>();
  auto* cmd = app.add_subcommand("plan", "Multi-stage pretrain plans");
  cmd->require_subcommand(1);
  auto* validate = cmd->add_subcommand("validate", "Check a plan file; exits 1 when it has violations");
  validate->add_option("plan", opt->plan, "Plan JSON")->required();
  validate->add_flag("--allow-backbone-after-det", opt->relaxed,
                     "Accept backbone-only transfer out of a det stage");
  validate->callback([opt, &action, &exit_code] {
    action = [opt, &exit_code] {
      const auto report = msfa::validate_plan(msfa::load_plan(opt->plan), {opt->relaxed});
      write_json(report.to_json(), "");
      if (!report.ok()) exit_code = 1;
    };
  });

  auto* emit = cmd->add_subcommand("emit", "Write one training config per stage");
  emit->add_option("plan", opt->plan, "Plan JSON")->required();
  emit->add_option("--out", opt->out, "Output directory")->required();
  emit->add_flag("--allow-backbone-after-det", opt->relaxed,
                 "Accept backbone-only transfer out of a det stage");
  emit->add_option("--epochs", opt->epochs, "Override epochs for every stage");
  emit->add_option("--lr", opt->lr, "Override learning rate for every stage");
  emit->add_option("--batch-size", opt->batch_size, "Override batch size for every stage");
  emit->add_option("--optimizer", opt->optimizer, "Override optimizer name for every stage");
  emit->callback([opt, &action] {
    action = [opt] {
      const msfa::HyperOverrides ov{opt->epochs, opt->lr, opt->batch_size, opt->optimizer};
      const auto manifests =
          msfa::emit_stage_manifests(msfa::load_plan(opt->plan), msfa::default_hyper_table(), ov, {opt->relaxed});
      for (const auto& m : manifests) msfa::write_file_atomic(fs::path(opt->out) / m.file_name, m.content);
      log_info("wrote " + std::to_string(manifests.size()) + " stage configs");
    };
  });
}

// ----------------------------------------------------------------- weights

struct WeightsOptions {
  std::string src, dst, out;
  std::string mode = "framework";
  std::string prefix = "backbone.";
  std::string report;
};

void add_weights(CLI::App& app, std::function<void()>& action) {
  auto opt = std::make_shared<WeightsOptions>();
  auto* cmd = app.add_subcommand("weights", "Weight archive surgery");
  cmd->require_subcommand(1);
  auto* transfer = cmd->add_subcommand("transfer", "Initialise a destination skeleton from a source archive");
  transfer->add_option("--src", opt->src, "Source archive")->required();
  transfer->add_option("--dst", opt->dst, "Destination skeleton archive")->required();
  transfer->add_option("--out", opt->out, "Output archive")->required();
  transfer->add_option("--mode", opt->mode, "backbone or framework")
      ->capture_default_str()
      ->check(CLI::IsMember({"backbone", "framework"}));
  transfer->add_option("--backbone-prefix", opt->prefix, "Key prefix of backbone tensors")->capture_default_str();
  transfer->add_option("--report", opt->report, "Write the transfer report here instead of stdout");
  transfer->callback([opt, &action] {
    action = [opt] {
      const auto r = msfa::transfer_weights(msfa::read_archive(opt->src), msfa::read_archive(opt->dst),
                                            msfa::parse_transfer_mode(opt->mode), opt->prefix);
      msfa::write_archive(r.archive, opt->out);
      write_json(r.report.to_json(), opt->report);
    };
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"msfa: SAR image preprocessing and dataset toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  int workers = msfa::default_workers();
  std::string log_level = "info";
  app.add_option("--workers", workers, "Worker threads (default from MSFA_WORKERS, else 1)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level, "quiet, info or debug")
      ->capture_default_str()
      ->check(CLI::IsMember({"quiet", "info", "debug"}));

  std::function<void()> action;
  int exit_code = 0;
  add_ingest(app, action);
  add_split(app, action);
  add_slice(app, action, workers);
  add_merge(app, action);
  add_convert(app, action);
  add_stats(app, action);
  add_filters(app, action);
  add_augment(app, action, workers);
  add_pcc(app, action, workers);
  add_plan(app, action, exit_code);
  add_weights(app, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  g_log = log_level == "quiet" ? LogLevel::quiet : log_level == "debug" ? LogLevel::debug : LogLevel::info;

  try {
    if (action) action();
  } catch (const msfa::Error& e) {
    std::cerr << "msfa: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "msfa: error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
