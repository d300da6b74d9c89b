#include "segaug/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "segaug/augment.hpp"
#include "segaug/distribution.hpp"
#include "segaug/errors.hpp"
#include "segaug/rng.hpp"

namespace segaug {

namespace {

const std::set<std::string> kKnownStrategies = {"baseline", "single_label",
                                                "multi_label", "reconstruction"};

}  // namespace

void ExperimentConfig::validate() const {
  world.validate();
  train.validate();
  if (test_count < 1) {
    throw ValidationError("experiment config: test_count must be >= 1");
  }
  if (seeds.empty()) {
    throw ValidationError("experiment config: needs at least one seed");
  }
  if (ratios.empty()) {
    throw ValidationError("experiment config: needs at least one ratio");
  }
  for (double r : ratios) {
    if (!(r >= 0.0 && r < 1.0)) {
      throw ValidationError("experiment config: ratios must be in [0, 1)");
    }
  }
  if (strategies.empty()) {
    throw ValidationError("experiment config: needs at least one strategy");
  }
  std::set<std::string> seen;
  for (const auto& s : strategies) {
    if (!kKnownStrategies.count(s)) {
      throw ValidationError("experiment config: unknown strategy \"" + s + "\"");
    }
    if (!seen.insert(s).second) {
      throw ValidationError("experiment config: duplicate strategy \"" + s + "\"");
    }
  }
  if (jobs < 1) {
    throw ValidationError("experiment config: jobs must be >= 1");
  }
}

Json ExperimentConfig::to_json() const {
  return Json{{"world", world.to_json()},
              {"test_count", test_count},
              {"seeds", seeds},
              {"ratios", ratios},
              {"strategies", strategies},
              {"schedule", to_string(schedule)},
              {"train", train.to_json()},
              {"mask_min_pixels", mask_min_pixels},
              {"recon_labels_per_image", recon_labels_per_image},
              {"multi_label_k", multi_label_k},
              {"supplementary_noise_sigma", supplementary_noise_sigma},
              {"jobs", jobs}};
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  ExperimentConfig c;
  if (j.contains("world")) c.world = WorldConfig::from_json(j.at("world"));
  c.test_count = j.value("test_count", c.test_count);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("ratios")) c.ratios = j.at("ratios").get<std::vector<double>>();
  if (j.contains("strategies")) {
    c.strategies = j.at("strategies").get<std::vector<std::string>>();
  }
  if (j.contains("schedule")) {
    c.schedule = schedule_mode_from_string(j.at("schedule").get<std::string>());
  }
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  c.mask_min_pixels = j.value("mask_min_pixels", c.mask_min_pixels);
  c.recon_labels_per_image = j.value("recon_labels_per_image", c.recon_labels_per_image);
  c.multi_label_k = j.value("multi_label_k", c.multi_label_k);
  c.supplementary_noise_sigma =
      j.value("supplementary_noise_sigma", c.supplementary_noise_sigma);
  c.jobs = j.value("jobs", c.jobs);
  c.validate();
  return c;
}

namespace {

struct StrategyPool {
  std::vector<ManifestEntry> entries;
  std::string error;  // non-empty when pool synthesis failed
};

// Everything derived once per seed and shared read-only by that seed's cells.
struct SeedContext {
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> original_entries;
  std::unordered_map<std::string, SamplePair> store;  // label path -> pair
  std::vector<WorldSample> test_samples;
  std::vector<std::uint8_t> targets;
  std::map<std::string, StrategyPool> pools;  // per non-baseline strategy
};

std::size_t supplementary_need(double ratio, std::size_t originals) {
  return static_cast<std::size_t>(
      std::llround(ratio * double(originals) / (1.0 - ratio)));
}

SeedContext build_seed_context(const ExperimentConfig& config,
                               std::uint64_t seed) {
  SeedContext ctx;
  ctx.seed = seed;

  WorldConfig train_world = config.world;
  train_world.seed = derive_seed(seed, "world.train");
  auto train_samples = generate_dataset(train_world);

  WorldConfig test_world = config.world;
  test_world.seed = derive_seed(seed, "world.test");
  test_world.count = config.test_count;
  ctx.test_samples = generate_dataset(test_world);

  std::vector<SourceMap> train_maps;
  std::vector<LabelMap> label_views;
  for (auto& s : train_samples) {
    const std::string label_path = "train/" + s.id + ".pgm";
    ctx.original_entries.push_back(
        {"train/" + s.id + ".ppm", label_path, Origin::kOriginal, ""});
    train_maps.push_back({s.id, s.labels});
    label_views.push_back(s.labels);
    ctx.store.emplace(label_path,
                      SamplePair{std::move(s.image), std::move(s.labels)});
  }

  FrequencyReport freq = appearance_frequency(label_views, config.world.table);
  ctx.targets = select_target_classes(freq, CountK{config.world.table.size()});

  MaskLibrary library =
      build_mask_library(train_maps, config.world.table, config.mask_min_pixels);

  std::size_t pool_size = 0;
  for (double r : config.ratios) {
    pool_size = std::max(pool_size,
                         supplementary_need(r, ctx.original_entries.size()));
  }

  for (const auto& strategy : config.strategies) {
    if (strategy == "baseline") continue;
    StrategyPool pool;
    if (pool_size == 0) {
      ctx.pools.emplace(strategy, std::move(pool));
      continue;  // every requested ratio is 0, nothing to synthesize
    }
    try {
      AugmentationPlan plan;
      if (strategy == "single_label") {
        plan.strategy = SingleLabelStrategy{ctx.targets.at(0)};
      } else if (strategy == "multi_label") {
        MultiLabelStrategy m;
        const std::size_t k = std::min(config.multi_label_k, ctx.targets.size());
        m.classes.assign(ctx.targets.begin(), ctx.targets.begin() + k);
        plan.strategy = std::move(m);
      } else {
        ReconstructionStrategy r;
        r.layout = config.world.background;
        r.labels_per_image = config.recon_labels_per_image;
        plan.strategy = std::move(r);
      }
      plan.count = pool_size;
      plan.seed = derive_seed(seed, "augment." + strategy);

      auto records = run_plan(plan, train_maps, library, config.world.table,
                              config.world.width, config.world.height);
      const double supp_sigma = config.supplementary_noise_sigma >= 0.0
                                    ? config.supplementary_noise_sigma
                                    : config.world.noise_sigma;
      const std::uint64_t render_seed = derive_seed(seed, "render." + strategy);
      for (std::size_t i = 0; i < records.size(); ++i) {
        auto& rec = records[i];
        const std::string label_path = rec.id + ".pgm";
        RenderedImage image =
            render_palette(rec.label_map, config.world.palette, supp_sigma,
                           derive_seed(render_seed, i));
        pool.entries.push_back({rec.id + ".ppm", label_path,
                                Origin::kSupplementary, strategy});
        ctx.store.emplace(label_path, SamplePair{std::move(image),
                                                 std::move(rec.label_map)});
      }
    } catch (const Error& e) {
      pool.error = e.what();
    }
    ctx.pools.emplace(strategy, std::move(pool));
  }
  return ctx;
}

CellResult run_cell(const ExperimentConfig& config, const SeedContext& ctx,
                    double ratio, const std::string& strategy) {
  CellResult cell;
  cell.seed = ctx.seed;
  cell.ratio = ratio;
  cell.strategy = strategy;
  cell.rare_class_id = ctx.targets.at(0);
  try {
    std::span<const ManifestEntry> pool;
    if (strategy != "baseline") {
      const StrategyPool& sp = ctx.pools.at(strategy);
      if (!sp.error.empty()) {
        throw ValidationError("supplementary pool: " + sp.error);
      }
      pool = sp.entries;
    }
    const double effective_ratio = strategy == "baseline" ? 0.0 : ratio;
    // Stage seeds depend only on the experiment seed, so equal manifests
    // train identically regardless of which strategy produced them.
    DatasetManifest manifest =
        mix_manifest(ctx.original_entries, pool, effective_ratio,
                     derive_seed(ctx.seed, "mix"));
    TrainingSchedule schedule =
        build_schedule(manifest, config.schedule, derive_seed(ctx.seed, "schedule"));

    TrainConfig train_config = config.train;
    train_config.seed = derive_seed(ctx.seed, "train");
    PairLoader loader = [&ctx](const ManifestEntry& entry) -> const SamplePair& {
      auto it = ctx.store.find(entry.label_path);
      if (it == ctx.store.end()) {
        throw ValidationError("experiment: no stored pair for " + entry.label_path);
      }
      return it->second;
    };
    TrainResult trained =
        train(schedule, loader, config.world.table, train_config);

    ConfusionMatrix matrix(config.world.table);
    for (const auto& sample : ctx.test_samples) {
      LabelMap pred = predict(trained.model, sample.image);
      matrix.accumulate(pred, sample.labels);
    }
    cell.report = iou_report(matrix);
    cell.rare_class_iou = cell.report.iou_of(cell.rare_class_id);
    cell.achieved_ratio = manifest.achieved_ratio;
    cell.train_entries = manifest.entries.size();
    cell.manifest = std::move(manifest);
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();

  ExperimentReport report;
  report.config = config;

  std::vector<SeedContext> contexts;
  contexts.reserve(config.seeds.size());
  for (std::uint64_t seed : config.seeds) {
    contexts.push_back(build_seed_context(config, seed));
    report.seeds.push_back({seed, contexts.back().targets});
  }

  struct CellKey {
    std::size_t context_index;
    double ratio;
    std::string strategy;
  };
  std::vector<CellKey> keys;
  for (std::size_t s = 0; s < contexts.size(); ++s) {
    for (double ratio : config.ratios) {
      for (const auto& strategy : config.strategies) {
        keys.push_back({s, ratio, strategy});
      }
    }
  }

  report.cells.resize(keys.size());
  const int jobs = std::max(1, std::min<int>(config.jobs, int(keys.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      report.cells[i] = run_cell(config, contexts[keys[i].context_index],
                                 keys[i].ratio, keys[i].strategy);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int t = 0; t < jobs; ++t) {
      workers.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= keys.size()) return;
          report.cells[i] = run_cell(config, contexts[keys[i].context_index],
                                     keys[i].ratio, keys[i].strategy);
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  return report;
}

Json ExperimentReport::to_json() const {
  Json j;
  j["config"] = config.to_json();
  Json seeds_json = Json::array();
  for (const auto& s : seeds) {
    seeds_json.push_back({{"seed", s.seed}, {"targets", s.targets}});
  }
  j["seeds"] = std::move(seeds_json);

  Json cells_json = Json::array();
  for (const auto& c : cells) {
    Json cj{{"seed", c.seed},
            {"ratio", c.ratio},
            {"strategy", c.strategy},
            {"ok", c.ok}};
    if (c.ok) {
      cj["achieved_ratio"] = c.achieved_ratio;
      cj["train_entries"] = c.train_entries;
      cj["rare_class_id"] = c.rare_class_id;
      cj["rare_class_iou"] =
          c.rare_class_iou ? Json(*c.rare_class_iou) : Json(nullptr);
      cj["report"] = c.report.to_json();
    } else {
      cj["error"] = c.error;
    }
    cells_json.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells_json);
  return j;
}

namespace {

// Mean-over-seeds pseudo-report for one (ratio, strategy) aggregate.
std::optional<IoUReport> aggregate_report(const ExperimentReport& report,
                                          double ratio,
                                          const std::string& strategy) {
  std::vector<const CellResult*> picked;
  for (const auto& c : report.cells) {
    if (c.ok && c.strategy == strategy && c.ratio == ratio) picked.push_back(&c);
  }
  if (picked.empty()) return std::nullopt;

  IoUReport agg;
  const auto& classes = picked.front()->report.classes;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    ClassIoU c;
    c.id = classes[i].id;
    c.name = classes[i].name;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto* cell : picked) {
      if (cell->report.classes[i].iou) {
        sum += *cell->report.classes[i].iou;
        ++n;
      }
    }
    if (n > 0) c.iou = sum / double(n);
    agg.classes.push_back(std::move(c));
  }
  double mean_sum = 0.0;
  std::size_t mean_n = 0;
  for (const auto* cell : picked) {
    if (cell->report.mean_iou) {
      mean_sum += *cell->report.mean_iou;
      ++mean_n;
    }
  }
  if (mean_n > 0) agg.mean_iou = mean_sum / double(mean_n);
  return agg;
}

}  // namespace

std::string report_text(const ExperimentReport& report) {
  std::ostringstream out;
  out << "Experiment: " << report.config.seeds.size() << " seed(s), "
      << report.config.world.count << " train / " << report.config.test_count
      << " test images, schedule " << to_string(report.config.schedule) << "\n";
  for (const auto& s : report.seeds) {
    out << "seed " << s.seed << " targets (rarest first):";
    for (std::uint8_t id : s.targets) {
      out << " " << report.config.world.table.name_of(id);
    }
    out << "\n";
  }
  out << "\n";

  const bool have_baseline =
      std::find(report.config.strategies.begin(), report.config.strategies.end(),
                "baseline") != report.config.strategies.end();

  for (double ratio : report.config.ratios) {
    char head[96];
    std::snprintf(head, sizeof(head),
                  "-- supplementary ratio %.2f (IoU %%, mean over seeds) --",
                  ratio);
    out << head << "\n";

    std::optional<IoUReport> baseline =
        have_baseline ? aggregate_report(report, ratio, "baseline") : std::nullopt;
    std::vector<IoUReport> candidates;
    std::vector<std::string> labels;
    for (const auto& strategy : report.config.strategies) {
      if (strategy == "baseline") continue;
      if (auto agg = aggregate_report(report, ratio, strategy)) {
        candidates.push_back(std::move(*agg));
        labels.push_back(strategy);
      }
    }
    if (baseline) {
      std::vector<std::string> method_labels{"baseline"};
      method_labels.insert(method_labels.end(), labels.begin(), labels.end());
      out << render_comparison_text(
          compare_reports(*baseline, candidates, method_labels));
    } else if (!candidates.empty()) {
      // No baseline requested: lead with the first strategy, no deltas vs it
      // are meaningful but the table shape stays the same.
      std::vector<IoUReport> rest(candidates.begin() + 1, candidates.end());
      out << render_comparison_text(compare_reports(candidates.front(), rest, labels));
    } else {
      out << "(no successful cells)\n";
    }
    out << "\n";
  }

  std::size_t failures = 0;
  for (const auto& c : report.cells) {
    if (!c.ok) ++failures;
  }
  if (failures > 0) {
    out << failures << " failed cell(s):\n";
    for (const auto& c : report.cells) {
      if (!c.ok) {
        out << "  seed " << c.seed << " ratio " << c.ratio << " " << c.strategy
            << ": " << c.error << "\n";
      }
    }
  }
  return out.str();
}

namespace {

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "seed,ratio,strategy,ok,achieved_ratio,train_entries,mean_iou,"
         "rare_class_id,rare_class_iou\n";
  for (const auto& c : report.cells) {
    out << c.seed << ',' << csv_double(c.ratio) << ',' << c.strategy << ','
        << (c.ok ? 1 : 0) << ',';
    if (c.ok) {
      out << csv_double(c.achieved_ratio) << ',' << c.train_entries << ',';
      if (c.report.mean_iou) out << csv_double(*c.report.mean_iou);
      out << ',' << int(c.rare_class_id) << ',';
      if (c.rare_class_iou) out << csv_double(*c.rare_class_iou);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
  return out.str();
}

std::string report_json(const ExperimentReport& report) {
  return report.to_json().dump(2) + "\n";
}

std::string emit_report(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kText:
      return report_text(report);
    case ReportFormat::kCsv:
      return report_csv(report);
    case ReportFormat::kJson:
      return report_json(report);
  }
  throw ValidationError("emit_report: unknown format");
}

}  // namespace segaug
