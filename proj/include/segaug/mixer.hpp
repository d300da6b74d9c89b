#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "segaug/json_util.hpp"

namespace segaug {

enum class Origin { kOriginal, kSupplementary };

std::string to_string(Origin origin);
Origin origin_from_string(const std::string& s);

struct ManifestEntry {
  std::string image_path;
  std::string label_path;
  Origin origin = Origin::kOriginal;
  std::string strategy_tag;

  bool operator==(const ManifestEntry&) const = default;
};

// A training set assembled at a requested supplementary ratio. All original
// entries are kept; supplementary entries are drawn from a pool, without
// replacement unless the pool is too small (then `with_replacement` flags
// the duplicates).
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  double requested_ratio = 0.0;
  double achieved_ratio = 0.0;
  std::uint64_t seed = 0;
  bool with_replacement = false;

  std::size_t supplementary_count() const;

  // JSON-lines: one header record, then one record per entry.
  std::string to_jsonl() const;
  static DatasetManifest from_jsonl(const std::string& text);
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Supplementary count s = round(r * |original| / (1 - r)), so that
// s / (|original| + s) tracks r to within 1/|entries|.
DatasetManifest mix_manifest(std::span<const ManifestEntry> original,
                             std::span<const ManifestEntry> supplementary,
                             double ratio, std::uint64_t seed);

enum class ScheduleMode { kMixed, kPretrainFinetune };

std::string to_string(ScheduleMode mode);
ScheduleMode schedule_mode_from_string(const std::string& s);

// MIXED: one shuffled phase over everything. PRETRAIN_FINETUNE: supplementary
// first (the initialization pass), originals second. A pretrain-finetune
// request without supplementary entries degenerates to a single phase.
struct TrainingSchedule {
  ScheduleMode mode = ScheduleMode::kMixed;
  std::vector<std::vector<ManifestEntry>> phases;
  bool degenerate = false;
};

TrainingSchedule build_schedule(const DatasetManifest& manifest,
                                ScheduleMode mode, std::uint64_t seed);

}  // namespace segaug
