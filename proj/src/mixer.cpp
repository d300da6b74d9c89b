#include "segaug/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "segaug/errors.hpp"
#include "segaug/fsio.hpp"
#include "segaug/rng.hpp"

namespace segaug {

std::string to_string(Origin origin) {
  return origin == Origin::kOriginal ? "ORIGINAL" : "SUPPLEMENTARY";
}

Origin origin_from_string(const std::string& s) {
  if (s == "ORIGINAL") return Origin::kOriginal;
  if (s == "SUPPLEMENTARY") return Origin::kSupplementary;
  throw ValidationError("manifest: unknown origin \"" + s + "\"");
}

std::string to_string(ScheduleMode mode) {
  return mode == ScheduleMode::kMixed ? "mixed" : "pretrain-finetune";
}

ScheduleMode schedule_mode_from_string(const std::string& s) {
  if (s == "mixed") return ScheduleMode::kMixed;
  if (s == "pretrain-finetune") return ScheduleMode::kPretrainFinetune;
  throw ValidationError("schedule: unknown mode \"" + s + "\"");
}

std::size_t DatasetManifest::supplementary_count() const {
  return std::size_t(std::count_if(entries.begin(), entries.end(),
                                   [](const ManifestEntry& e) {
                                     return e.origin == Origin::kSupplementary;
                                   }));
}

std::string DatasetManifest::to_jsonl() const {
  std::ostringstream out;
  Json header{{"type", "manifest"},
              {"requested_ratio", requested_ratio},
              {"achieved_ratio", achieved_ratio},
              {"seed", seed},
              {"with_replacement", with_replacement},
              {"count", entries.size()}};
  out << header.dump() << '\n';
  for (const auto& e : entries) {
    Json line{{"image", e.image_path},
              {"label", e.label_path},
              {"origin", to_string(e.origin)},
              {"strategy", e.strategy_tag}};
    out << line.dump() << '\n';
  }
  return out.str();
}

DatasetManifest DatasetManifest::from_jsonl(const std::string& text) {
  DatasetManifest m;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j = parse_json(line, "manifest line");
    if (!have_header && j.value("type", "") == "manifest") {
      m.requested_ratio = j.value("requested_ratio", 0.0);
      m.achieved_ratio = j.value("achieved_ratio", 0.0);
      m.seed = j.value("seed", std::uint64_t{0});
      m.with_replacement = j.value("with_replacement", false);
      have_header = true;
      continue;
    }
    have_header = true;  // header is optional for hand-written manifests
    ManifestEntry e;
    e.image_path = j.value("image", "");
    e.label_path = require_key(j, "label", "manifest entry").get<std::string>();
    e.origin = origin_from_string(j.value("origin", "ORIGINAL"));
    e.strategy_tag = j.value("strategy", "");
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  write_text(path, m.to_jsonl());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return DatasetManifest::from_jsonl(read_text(path));
}

DatasetManifest mix_manifest(std::span<const ManifestEntry> original,
                             std::span<const ManifestEntry> supplementary,
                             double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ValidationError("mix_manifest: ratio must be in [0, 1), got " +
                          std::to_string(ratio));
  }
  if (original.empty()) {
    throw ValidationError("mix_manifest: original dataset is empty");
  }

  const auto n = static_cast<double>(original.size());
  const auto s = static_cast<std::size_t>(std::llround(ratio * n / (1.0 - ratio)));
  if (s > 0 && supplementary.empty()) {
    throw ValidationError("mix_manifest: ratio " + std::to_string(ratio) +
                          " needs supplementary entries but the pool is empty");
  }

  DatasetManifest m;
  m.requested_ratio = ratio;
  m.seed = seed;
  m.entries.reserve(original.size() + s);
  for (const auto& e : original) {
    ManifestEntry copy = e;
    copy.origin = Origin::kOriginal;
    m.entries.push_back(std::move(copy));
  }

  Rng rng(derive_seed(seed, "mix"));
  std::vector<std::size_t> picks;
  if (s <= supplementary.size()) {
    std::vector<std::size_t> indices(supplementary.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    rng.shuffle(indices);
    picks.assign(indices.begin(), indices.begin() + s);
  } else {
    // Pool too small: fall back to drawing with replacement and say so,
    // since duplicated synthetic images change epoch statistics.
    m.with_replacement = true;
    for (std::size_t i = 0; i < s; ++i) {
      picks.push_back(rng.uniform_index(supplementary.size()));
    }
  }
  for (std::size_t idx : picks) {
    ManifestEntry copy = supplementary[idx];
    copy.origin = Origin::kSupplementary;
    m.entries.push_back(std::move(copy));
  }

  m.achieved_ratio = double(s) / double(original.size() + s);
  return m;
}

TrainingSchedule build_schedule(const DatasetManifest& manifest,
                                ScheduleMode mode, std::uint64_t seed) {
  if (manifest.entries.empty()) {
    throw ValidationError("build_schedule: manifest is empty");
  }
  TrainingSchedule schedule;
  schedule.mode = mode;

  if (mode == ScheduleMode::kMixed) {
    std::vector<ManifestEntry> all = manifest.entries;
    Rng rng(derive_seed(seed, "schedule.mixed"));
    rng.shuffle(all);
    schedule.phases.push_back(std::move(all));
    return schedule;
  }

  std::vector<ManifestEntry> supplementary, original;
  for (const auto& e : manifest.entries) {
    (e.origin == Origin::kSupplementary ? supplementary : original).push_back(e);
  }
  Rng rng0(derive_seed(seed, "schedule.pretrain"));
  Rng rng1(derive_seed(seed, "schedule.finetune"));
  rng0.shuffle(supplementary);
  rng1.shuffle(original);

  if (supplementary.empty()) {
    schedule.degenerate = true;
    schedule.phases.push_back(std::move(original));
  } else {
    schedule.phases.push_back(std::move(supplementary));
    schedule.phases.push_back(std::move(original));
  }
  return schedule;
}

}  // namespace segaug
