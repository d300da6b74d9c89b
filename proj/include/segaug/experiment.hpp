#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segaug/eval.hpp"
#include "segaug/json_util.hpp"
#include "segaug/mixer.hpp"
#include "segaug/segmenter.hpp"
#include "segaug/synthworld.hpp"

namespace segaug {

// The full desk-scale study: for every seed x ratio x strategy, synthesize
// supplementary data, mix it into the training set at the requested ratio,
// train the pixel classifier, and evaluate on a held-out split.
struct ExperimentConfig {
  // Training-world template; its count is the train-split size.
  WorldConfig world = WorldConfig::default_world();
  std::size_t test_count = 50;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<double> ratios = {0.5};
  // Any of "baseline", "single_label", "multi_label", "reconstruction".
  std::vector<std::string> strategies = {"baseline", "single_label",
                                         "multi_label", "reconstruction"};
  ScheduleMode schedule = ScheduleMode::kMixed;
  TrainConfig train;
  std::size_t mask_min_pixels = 16;
  std::size_t recon_labels_per_image = 4;
  std::size_t multi_label_k = 3;  // how many low-frequency classes multi targets
  // Noise sigma for rendering supplementary images; negative means "same as
  // the world". Real generators are noisier than real data, and that
  // imperfection is what makes very high supplementary ratios hurt.
  double supplementary_noise_sigma = 12.0;
  int jobs = 1;

  void validate() const;
  Json to_json() const;
  static ExperimentConfig from_json(const Json& j);
};

struct CellResult {
  std::uint64_t seed = 0;
  double ratio = 0.0;
  std::string strategy;
  bool ok = false;
  std::string error;  // set when !ok
  double achieved_ratio = 0.0;
  std::size_t train_entries = 0;
  IoUReport report;  // empty when !ok
  // IoU of the seed's lowest-appearance-frequency class.
  std::uint8_t rare_class_id = 0;
  std::optional<double> rare_class_iou;
  // The exact training set of this cell, auditable (baseline cells carry
  // zero SUPPLEMENTARY entries). Not part of the JSON report.
  DatasetManifest manifest;
};

struct SeedInfo {
  std::uint64_t seed = 0;
  // Classes by ascending measured appearance frequency; [0] is the rare
  // class, the first multi_label_k are the multi-label targets.
  std::vector<std::uint8_t> targets;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<SeedInfo> seeds;
  std::vector<CellResult> cells;  // ordered by (seed, ratio, strategy)

  Json to_json() const;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

// Table-style text (per-ratio method columns with "/+delta" against the
// baseline), a ratio-vs-mIoU CSV, and the raw JSON. The CSV and JSON carry
// the same numbers.
std::string report_text(const ExperimentReport& report);
std::string report_csv(const ExperimentReport& report);
std::string report_json(const ExperimentReport& report);

enum class ReportFormat { kText, kCsv, kJson };
std::string emit_report(const ExperimentReport& report, ReportFormat format);

}  // namespace segaug
