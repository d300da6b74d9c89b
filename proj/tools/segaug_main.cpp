#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "segaug/augment.hpp"
#include "segaug/distribution.hpp"
#include "segaug/errors.hpp"
#include "segaug/eval.hpp"
#include "segaug/experiment.hpp"
#include "segaug/fsio.hpp"
#include "segaug/generator.hpp"
#include "segaug/json_util.hpp"
#include "segaug/mixer.hpp"
#include "segaug/pnm.hpp"
#include "segaug/rng.hpp"
#include "segaug/segmenter.hpp"
#include "segaug/synthworld.hpp"

namespace fs = std::filesystem;
using namespace segaug;

namespace {

ClassTable load_table(const std::string& classes_path) {
  if (classes_path.empty()) return ClassTable::cityscapes19();
  return ClassTable::from_json(
      parse_json(read_text(classes_path), "classes file"));
}

Palette load_palette(const std::string& palette_path, const ClassTable& table) {
  if (palette_path.empty()) return Palette::defaults_for(table);
  return Palette::from_json(parse_json(read_text(palette_path), "palette file"));
}

fs::path resolve(const fs::path& base, const std::string& path) {
  fs::path p(path);
  return p.is_absolute() ? p : base / p;
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

// `--labels` accepts either a directory of .pgm files or a manifest.jsonl.
std::vector<SourceMap> load_label_maps(const std::string& labels_arg) {
  std::vector<SourceMap> maps;
  fs::path path(labels_arg);
  if (fs::is_directory(path)) {
    for (const auto& file : list_files(path, ".pgm")) {
      maps.push_back({file.stem().string(), load_pgm_file(file)});
    }
  } else {
    DatasetManifest manifest = read_manifest(path);
    const fs::path base = path.parent_path();
    for (const auto& e : manifest.entries) {
      maps.push_back({e.label_path, load_pgm_file(resolve(base, e.label_path))});
    }
  }
  if (maps.empty()) {
    throw ValidationError("no label maps found under " + labels_arg);
  }
  return maps;
}

// Loads image/label pairs behind manifest entries, caching by label path so
// repeated entries share one decode.
class FilePairStore {
 public:
  explicit FilePairStore(fs::path base) : base_(std::move(base)) {}

  const SamplePair& get(const ManifestEntry& entry) {
    auto it = cache_.find(entry.label_path);
    if (it != cache_.end()) return it->second;
    if (entry.image_path.empty()) {
      throw ValidationError("manifest entry for " + entry.label_path +
                            " has no image; run `render` first");
    }
    SamplePair pair{load_ppm_file(resolve(base_, entry.image_path)),
                    load_pgm_file(resolve(base_, entry.label_path))};
    return cache_.emplace(entry.label_path, std::move(pair)).first->second;
  }

 private:
  fs::path base_;
  std::unordered_map<std::string, SamplePair> cache_;
};

void write_json_output(const std::string& out_path, const Json& j) {
  std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

std::string sanitize_component(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == ' ') c = '_';
  }
  return s;
}

struct SynthArgs {
  std::string out, world_path;
  std::uint64_t seed = 0;
  std::size_t count = 0, test_count = 0;
  double noise_sigma = -1.0;
};

void cmd_synth(const SynthArgs& args) {
  WorldConfig world = args.world_path.empty()
                          ? WorldConfig::default_world()
                          : WorldConfig::from_json(parse_json(
                                read_text(args.world_path), "world config"));
  if (args.count > 0) world.count = args.count;
  if (args.noise_sigma >= 0.0) world.noise_sigma = args.noise_sigma;
  const std::size_t test_count = args.test_count > 0 ? args.test_count : 50;

  const fs::path out(args.out);
  write_text(out / "classes.json", world.table.to_json().dump(2) + "\n");
  write_text(out / "palette.json", world.palette.to_json().dump(2) + "\n");

  struct Split {
    const char* name;
    std::string stage;
    std::size_t count;
  };
  for (const Split& split : {Split{"train", "synth.train", world.count},
                             Split{"test", "synth.test", test_count}}) {
    WorldConfig cfg = world;
    cfg.seed = derive_seed(args.seed, split.stage);
    cfg.count = split.count;
    if (split.name == std::string("train")) {
      write_text(out / "world.json", cfg.to_json().dump(2) + "\n");
    }
    DatasetManifest manifest;
    const fs::path split_dir = out / split.name;
    for (const auto& sample : generate_dataset(cfg)) {
      const std::string label_rel = "labels/" + sample.id + ".pgm";
      const std::string image_rel = "images/" + sample.id + ".ppm";
      save_pgm_file(split_dir / label_rel, sample.labels);
      save_ppm_file(split_dir / image_rel, sample.image);
      manifest.entries.push_back({image_rel, label_rel, Origin::kOriginal, ""});
    }
    write_manifest(split_dir / "manifest.jsonl", manifest);
    std::cerr << "synth: wrote " << manifest.entries.size() << " " << split.name
              << " pairs under " << split_dir << "\n";
  }
}

struct AnalyzeArgs {
  std::string labels, classes, accuracy, out;
  std::size_t select_k = 0;
  double select_threshold = 0.0;
};

void cmd_analyze(const AnalyzeArgs& args) {
  ClassTable table = load_table(args.classes);
  auto maps = load_label_maps(args.labels);
  std::vector<LabelMap> views;
  for (auto& m : maps) views.push_back(std::move(m.map));

  FrequencyReport freq = appearance_frequency(views, table);
  Json out = freq.to_json();

  if (!args.accuracy.empty()) {
    Json aj = parse_json(read_text(args.accuracy), "accuracy file");
    std::map<std::uint8_t, double> accuracy;
    if (aj.is_object() && aj.contains("classes")) {
      IoUReport r = IoUReport::from_json(aj);
      for (const auto& c : r.classes) {
        if (c.iou) accuracy[c.id] = *c.iou;
      }
    } else {
      for (const auto& [key, value] : aj.items()) {
        accuracy[static_cast<std::uint8_t>(std::stoi(key))] = value.get<double>();
      }
    }
    out["correlation"] = rank_correlation(freq, accuracy).to_json();
  }
  if (args.select_k > 0) {
    auto ids = select_target_classes(freq, CountK{args.select_k});
    if (args.select_k > freq.classes.size()) {
      std::cerr << "warning: k=" << args.select_k << " clipped to "
                << ids.size() << " classes\n";
    }
    out["targets"] = ids;
  } else if (args.select_threshold > 0.0) {
    out["targets"] = select_target_classes(freq, Threshold{args.select_threshold});
  }
  write_json_output(args.out, out);
}

struct ExtractArgs {
  std::string labels, classes, out;
  std::size_t min_pixels = 64;
};

void cmd_extract_masks(const ExtractArgs& args) {
  ClassTable table = load_table(args.classes);
  auto maps = load_label_maps(args.labels);
  MaskLibrary library = build_mask_library(maps, table, args.min_pixels);
  if (library.empty()) {
    std::cerr << "warning: mask library is empty (min-pixels "
              << args.min_pixels << ")\n";
  }
  write_text(args.out, library.to_json().dump() + "\n");
  std::cerr << "extract-masks: " << library.total_masks() << " masks across "
            << library.by_class.size() << " classes -> " << args.out << "\n";
}

struct AugmentArgs {
  std::string library, labels, classes, out, strategy;
  std::string target_class;
  std::vector<std::string> multi_classes;
  std::size_t labels_per_image = 3;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  int width = 0, height = 0;
};

std::uint8_t parse_class(const std::string& text, const ClassTable& table) {
  if (auto id = table.id_of(text)) return *id;
  try {
    int v = std::stoi(text);
    if (v >= 0 && v <= 255 && table.contains(static_cast<std::uint8_t>(v))) {
      return static_cast<std::uint8_t>(v);
    }
  } catch (const std::exception&) {
  }
  throw ValidationError("unknown class \"" + text + "\"");
}

void cmd_augment(const AugmentArgs& args) {
  ClassTable table = load_table(args.classes);
  MaskLibrary library =
      MaskLibrary::from_json(parse_json(read_text(args.library), "library"), table);
  auto dataset = load_label_maps(args.labels);

  AugmentationPlan plan;
  if (args.strategy == "single") {
    plan.strategy = SingleLabelStrategy{parse_class(args.target_class, table)};
  } else if (args.strategy == "multi") {
    MultiLabelStrategy m;
    for (const auto& c : args.multi_classes) {
      m.classes.push_back(parse_class(c, table));
    }
    plan.strategy = std::move(m);
  } else if (args.strategy == "reconstruction") {
    ReconstructionStrategy r;
    r.layout = BasicLayout::defaults_for(table);
    r.labels_per_image = args.labels_per_image;
    plan.strategy = std::move(r);
  } else {
    throw ValidationError("unknown strategy \"" + args.strategy +
                          "\" (single|multi|reconstruction)");
  }
  plan.count = args.count;
  plan.seed = derive_seed(args.seed, "augment");

  const int width = args.width > 0 ? args.width : dataset.front().map.width;
  const int height = args.height > 0 ? args.height : dataset.front().map.height;
  auto records = run_plan(plan, dataset, library, table, width, height);

  const fs::path out(args.out);
  DatasetManifest manifest;
  std::string provenance;
  for (const auto& rec : records) {
    const std::string rel = "labels/" + sanitize_component(rec.id) + ".pgm";
    save_pgm_file(out / rel, rec.label_map);
    manifest.entries.push_back({"", rel, Origin::kSupplementary, rec.strategy});
    provenance += rec.provenance_json().dump() + "\n";
  }
  write_text(out / "provenance.jsonl", provenance);
  write_manifest(out / "manifest.jsonl", manifest);
  std::cerr << "augment: wrote " << records.size() << " synthetic label maps under "
            << out << "\n";
}

struct RenderArgs {
  std::string manifest, labels, palette, classes, out, generator_cmd;
  double noise_sigma = 0.0;
  double generator_timeout_s = 300.0;
  std::uint64_t seed = 0;
  int jobs = 1;
};

void cmd_render(const RenderArgs& args) {
  ClassTable table = load_table(args.classes);
  Palette palette = load_palette(args.palette, table);

  struct Item {
    fs::path label_abs;
    std::string label_out;  // path to record in the output manifest
    std::string image_rel;
    std::string strategy_tag;
  };
  std::vector<Item> items;
  const fs::path out(args.out);

  if (!args.manifest.empty()) {
    DatasetManifest manifest = read_manifest(args.manifest);
    const fs::path base = fs::path(args.manifest).parent_path();
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const auto& e = manifest.entries[i];
      fs::path abs = fs::weakly_canonical(resolve(base, e.label_path));
      items.push_back({abs, abs.string(),
                       "images/" + sanitize_component(fs::path(e.label_path).stem().string()) + ".ppm",
                       e.strategy_tag});
    }
  } else {
    for (const auto& file : list_files(args.labels, ".pgm")) {
      fs::path abs = fs::weakly_canonical(file);
      items.push_back(
          {abs, abs.string(), "images/" + file.stem().string() + ".ppm", ""});
    }
  }
  if (items.empty()) {
    throw ValidationError("render: nothing to render");
  }

  const std::uint64_t stage_seed = derive_seed(args.seed, "render");
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(items.size());
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        LabelMap map = load_pgm_file(items[i].label_abs);
        RenderedImage image;
        if (!args.generator_cmd.empty()) {
          image = render_external(
              map, {args.generator_cmd, args.generator_timeout_s});
        } else {
          image = render_palette(map, palette, args.noise_sigma,
                                 derive_seed(stage_seed, i));
        }
        save_ppm_file(out / items[i].image_rel, image);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int jobs = std::max(1, args.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!errors[i].empty()) {
      // First failure wins; the generator contract is all-or-nothing.
      throw GeneratorError("render: " + items[i].label_abs.string() + ": " +
                           errors[i]);
    }
  }

  DatasetManifest manifest;
  for (const auto& item : items) {
    manifest.entries.push_back({item.image_rel, item.label_out,
                                item.strategy_tag.empty() ? Origin::kOriginal
                                                          : Origin::kSupplementary,
                                item.strategy_tag});
  }
  write_manifest(out / "manifest.jsonl", manifest);
  std::cerr << "render: wrote " << items.size() << " images under " << out << "\n";
}

struct MixArgs {
  std::string original, supplementary, out;
  double ratio = 0.0;
  std::uint64_t seed = 0;
};

std::vector<ManifestEntry> absolute_entries(const std::string& manifest_path) {
  DatasetManifest m = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  for (auto& e : m.entries) {
    if (!e.image_path.empty()) {
      e.image_path = fs::weakly_canonical(resolve(base, e.image_path)).string();
    }
    e.label_path = fs::weakly_canonical(resolve(base, e.label_path)).string();
  }
  return std::move(m.entries);
}

void cmd_mix(const MixArgs& args) {
  auto original = absolute_entries(args.original);
  std::vector<ManifestEntry> supplementary;
  if (!args.supplementary.empty()) {
    supplementary = absolute_entries(args.supplementary);
  }
  DatasetManifest mixed = mix_manifest(original, supplementary, args.ratio,
                                       derive_seed(args.seed, "mix"));
  if (mixed.with_replacement) {
    std::cerr << "warning: supplementary pool smaller than requested draw; "
                 "sampled with replacement\n";
  }
  write_manifest(args.out, mixed);
  std::cerr << "mix: " << mixed.entries.size() << " entries, achieved ratio "
            << mixed.achieved_ratio << " -> " << args.out << "\n";
}

struct TrainArgs {
  std::string manifest, classes, schedule = "mixed", out, trace;
  TrainConfig config;
};

void cmd_train(const TrainArgs& args) {
  ClassTable table = load_table(args.classes);
  DatasetManifest manifest = read_manifest(args.manifest);
  TrainingSchedule schedule =
      build_schedule(manifest, schedule_mode_from_string(args.schedule),
                     derive_seed(args.config.seed, "schedule"));
  if (schedule.degenerate) {
    std::cerr << "warning: no supplementary entries; pretrain-finetune "
                 "degenerates to a single phase\n";
  }

  FilePairStore store(fs::path(args.manifest).parent_path());
  PairLoader loader = [&store](const ManifestEntry& e) -> const SamplePair& {
    return store.get(e);
  };
  TrainResult result = train(schedule, loader, table, args.config);
  write_text(args.out, result.model.to_json().dump(2) + "\n");
  if (!args.trace.empty()) {
    write_text(args.trace, result.trace_csv());
  }
  std::cerr << "train: " << result.trace.size() << " epochs -> " << args.out
            << " (final loss " << result.trace.back().loss << ")\n";
}

struct EvalArgs {
  std::string model, manifest, pred, gt, classes, out;
};

void cmd_eval(const EvalArgs& args) {
  ClassTable table = load_table(args.classes);
  ConfusionMatrix matrix(table);

  if (!args.model.empty()) {
    SoftmaxModel model =
        SoftmaxModel::from_json(parse_json(read_text(args.model), "model"));
    if (model.table_hash != table.content_hash()) {
      throw ValidationError("eval: model was trained against a different class table");
    }
    DatasetManifest manifest = read_manifest(args.manifest);
    FilePairStore store(fs::path(args.manifest).parent_path());
    for (const auto& e : manifest.entries) {
      const SamplePair& pair = store.get(e);
      matrix.accumulate(predict(model, pair.image), pair.labels);
    }
  } else {
    auto pred_files = list_files(args.pred, ".pgm");
    auto gt_files = list_files(args.gt, ".pgm");
    if (pred_files.size() != gt_files.size() || pred_files.empty()) {
      throw ValidationError("eval: prediction/ground-truth file counts differ");
    }
    for (std::size_t i = 0; i < pred_files.size(); ++i) {
      matrix.accumulate(load_pgm_file(pred_files[i]), load_pgm_file(gt_files[i]));
    }
  }
  write_json_output(args.out, iou_report(matrix).to_json());
}

struct ReportArgs {
  std::string baseline, labels, format = "text", out;
  std::vector<std::string> candidates;
};

void cmd_report(const ReportArgs& args) {
  IoUReport baseline =
      IoUReport::from_json(parse_json(read_text(args.baseline), "baseline report"));
  std::vector<IoUReport> candidates;
  for (const auto& path : args.candidates) {
    candidates.push_back(
        IoUReport::from_json(parse_json(read_text(path), "candidate report")));
  }

  std::vector<std::string> labels;
  if (!args.labels.empty()) {
    std::string current;
    for (char c : args.labels + ",") {
      if (c == ',') {
        labels.push_back(current);
        current.clear();
      } else {
        current += c;
      }
    }
  } else {
    labels.push_back(fs::path(args.baseline).stem().string());
    for (const auto& path : args.candidates) {
      labels.push_back(fs::path(path).stem().string());
    }
  }

  ComparisonTable table = compare_reports(baseline, candidates, labels);
  std::string text;
  if (args.format == "text") {
    text = render_comparison_text(table);
  } else if (args.format == "csv") {
    text = render_comparison_csv(table);
  } else if (args.format == "json") {
    text = render_comparison_json(table).dump(2) + "\n";
  } else {
    throw CLI::ValidationError("--format", "unknown format \"" + args.format + "\"");
  }
  if (args.out.empty()) {
    std::cout << text;
  } else {
    write_text(args.out, text);
  }
}

struct ExperimentArgs {
  std::string config_path, out, schedule;
  std::vector<std::uint64_t> seeds;
  std::vector<double> ratios;
  std::vector<std::string> strategies;
  int jobs = 0;
};

void cmd_experiment(const ExperimentArgs& args) {
  ExperimentConfig config;
  if (!args.config_path.empty()) {
    config = ExperimentConfig::from_json(
        parse_json(read_text(args.config_path), "experiment config"));
  }
  if (!args.seeds.empty()) config.seeds = args.seeds;
  if (!args.ratios.empty()) config.ratios = args.ratios;
  if (!args.strategies.empty()) config.strategies = args.strategies;
  if (!args.schedule.empty()) {
    config.schedule = schedule_mode_from_string(args.schedule);
  }
  if (args.jobs > 0) config.jobs = args.jobs;
  config.validate();

  ExperimentReport report = run_experiment(config);

  const fs::path out(args.out);
  write_text(out / "report.json", report_json(report));
  write_text(out / "tables.txt", report_text(report));
  write_text(out / "ratio_miou.csv", report_csv(report));
  for (const auto& cell : report.cells) {
    if (!cell.ok) continue;
    char name[128];
    std::snprintf(name, sizeof(name), "seed%llu_ratio%.2f_%s.manifest.jsonl",
                  static_cast<unsigned long long>(cell.seed), cell.ratio,
                  cell.strategy.c_str());
    write_manifest(out / "cells" / name, cell.manifest);
  }
  std::cout << report_text(report);
  std::cerr << "experiment: report written under " << out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GAN-style data augmentation toolkit for semantic segmentation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand(
      "synth", "Generate a procedural imbalanced dataset (labels + images)");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--world", synth.world_path, "World config JSON");
  synth_cmd->add_option("--seed", synth.seed, "Master seed");
  synth_cmd->add_option("--count", synth.count, "Training images");
  synth_cmd->add_option("--test-count", synth.test_count, "Test images");
  synth_cmd->add_option("--noise-sigma", synth.noise_sigma, "Render noise sigma");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand(
      "analyze", "Appearance frequency / pixel share statistics");
  analyze_cmd->add_option("--labels", analyze.labels, "Label dir or manifest")
      ->required();
  analyze_cmd->add_option("--classes", analyze.classes, "Class table JSON");
  analyze_cmd->add_option("--accuracy", analyze.accuracy,
                          "Per-class accuracy JSON for correlation");
  analyze_cmd->add_option("--select-k", analyze.select_k,
                          "Also report the k rarest classes");
  analyze_cmd->add_option("--select-threshold", analyze.select_threshold,
                          "Also report classes below this frequency");
  analyze_cmd->add_option("--out", analyze.out, "Output file (default stdout)");

  ExtractArgs extract;
  auto* extract_cmd =
      app.add_subcommand("extract-masks", "Build a mask library from label maps");
  extract_cmd->add_option("--labels", extract.labels, "Label dir or manifest")
      ->required();
  extract_cmd->add_option("--classes", extract.classes, "Class table JSON");
  extract_cmd->add_option("--min-pixels", extract.min_pixels,
                          "Minimum mask size in pixels");
  extract_cmd->add_option("--out", extract.out, "Library JSON path")->required();

  AugmentArgs augment;
  auto* augment_cmd =
      app.add_subcommand("augment", "Synthesize label maps from a mask library");
  augment_cmd->add_option("--library", augment.library, "Mask library JSON")
      ->required();
  augment_cmd->add_option("--labels", augment.labels, "Base label dir or manifest")
      ->required();
  augment_cmd->add_option("--classes", augment.classes, "Class table JSON");
  augment_cmd
      ->add_option("--strategy", augment.strategy, "single|multi|reconstruction")
      ->required();
  augment_cmd->add_option("--class", augment.target_class,
                          "Target class (single strategy)");
  augment_cmd->add_option("--multi-classes", augment.multi_classes,
                          "Target classes (multi strategy)");
  augment_cmd->add_option("--labels-per-image", augment.labels_per_image,
                          "Masks per reconstructed map");
  augment_cmd->add_option("--count", augment.count, "Images to synthesize")
      ->required();
  augment_cmd->add_option("--seed", augment.seed, "Master seed");
  augment_cmd->add_option("--width", augment.width, "Frame width (reconstruction)");
  augment_cmd->add_option("--height", augment.height,
                          "Frame height (reconstruction)");
  augment_cmd->add_option("--out", augment.out, "Output directory")->required();

  RenderArgs render;
  auto* render_cmd =
      app.add_subcommand("render", "Render label maps to images");
  render_cmd->add_option("--manifest", render.manifest, "Manifest of label maps");
  render_cmd->add_option("--labels", render.labels, "Label directory");
  render_cmd->add_option("--palette", render.palette, "Palette JSON");
  render_cmd->add_option("--classes", render.classes, "Class table JSON");
  render_cmd->add_option("--noise-sigma", render.noise_sigma,
                         "Gaussian noise sigma for the palette renderer");
  render_cmd->add_option("--seed", render.seed, "Master seed");
  render_cmd->add_option("--generator-cmd", render.generator_cmd,
                         "External generator template with {in} and {out}");
  render_cmd->add_option("--generator-timeout-s", render.generator_timeout_s,
                         "External generator timeout (seconds)");
  render_cmd->add_option("--jobs", render.jobs, "Concurrent renders");
  render_cmd->add_option("--out", render.out, "Output directory")->required();

  MixArgs mix;
  auto* mix_cmd = app.add_subcommand(
      "mix", "Mix original and supplementary manifests at a ratio");
  mix_cmd->add_option("--original", mix.original, "Original manifest")->required();
  mix_cmd->add_option("--supplementary", mix.supplementary,
                      "Supplementary manifest");
  mix_cmd->add_option("--ratio", mix.ratio, "Supplementary ratio in [0,1)")
      ->required();
  mix_cmd->add_option("--seed", mix.seed, "Master seed");
  mix_cmd->add_option("--out", mix.out, "Mixed manifest path")->required();

  TrainArgs train_args;
  auto* train_cmd =
      app.add_subcommand("train", "Train the per-pixel softmax segmenter");
  train_cmd->add_option("--manifest", train_args.manifest, "Training manifest")
      ->required();
  train_cmd->add_option("--classes", train_args.classes, "Class table JSON");
  train_cmd->add_option("--schedule", train_args.schedule,
                        "mixed|pretrain-finetune");
  train_cmd->add_option("--lr", train_args.config.learning_rate, "Learning rate");
  train_cmd->add_option("--epochs", train_args.config.epochs, "Epochs per phase");
  train_cmd->add_option("--batch", train_args.config.batch, "Pixels per step");
  train_cmd->add_option("--l2", train_args.config.l2, "L2 penalty");
  train_cmd->add_option("--subsample", train_args.config.pixel_subsample,
                        "Pixel fraction per epoch");
  train_cmd->add_option("--seed", train_args.config.seed, "Master seed");
  train_cmd->add_option("--out", train_args.out, "Model JSON path")->required();
  train_cmd->add_option("--trace", train_args.trace, "Loss trace CSV path");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate per-class IoU / mIoU");
  eval_cmd->add_option("--model", eval_args.model, "Model JSON");
  eval_cmd->add_option("--manifest", eval_args.manifest,
                       "Manifest with images + ground truth");
  eval_cmd->add_option("--pred", eval_args.pred, "Directory of predicted maps");
  eval_cmd->add_option("--gt", eval_args.gt, "Directory of ground-truth maps");
  eval_cmd->add_option("--classes", eval_args.classes, "Class table JSON");
  eval_cmd->add_option("--out", eval_args.out, "Output file (default stdout)");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand(
      "report", "Compare IoU reports in the value/+delta table format");
  report_cmd->add_option("--baseline", report_args.baseline, "Baseline report")
      ->required();
  report_cmd->add_option("--candidate", report_args.candidates,
                         "Candidate report (repeatable)");
  report_cmd->add_option("--labels", report_args.labels,
                         "Comma-separated method names (baseline first)");
  report_cmd->add_option("--format", report_args.format, "text|csv|json");
  report_cmd->add_option("--out", report_args.out, "Output file (default stdout)");

  ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand(
      "experiment", "Run the full seed x ratio x strategy study");
  exp_cmd->add_option("--config", exp.config_path, "Experiment config JSON");
  exp_cmd->add_option("--seeds", exp.seeds, "Seeds to run");
  exp_cmd->add_option("--ratios", exp.ratios, "Supplementary ratios");
  exp_cmd->add_option("--strategies", exp.strategies,
                      "baseline|single_label|multi_label|reconstruction");
  exp_cmd->add_option("--schedule", exp.schedule, "mixed|pretrain-finetune");
  exp_cmd->add_option("--jobs", exp.jobs, "Parallel cells");
  exp_cmd->add_option("--out", exp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
    if (*synth_cmd) cmd_synth(synth);
    if (*analyze_cmd) cmd_analyze(analyze);
    if (*extract_cmd) cmd_extract_masks(extract);
    if (*augment_cmd) cmd_augment(augment);
    if (*render_cmd) cmd_render(render);
    if (*mix_cmd) cmd_mix(mix);
    if (*train_cmd) cmd_train(train_args);
    if (*eval_cmd) cmd_eval(eval_args);
    if (*report_cmd) cmd_report(report_args);
    if (*exp_cmd) cmd_experiment(exp);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const GeneratorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
