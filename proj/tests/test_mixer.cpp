#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "segaug/errors.hpp"
#include "segaug/mixer.hpp"

using namespace segaug;

namespace {

std::vector<ManifestEntry> make_entries(int n, const std::string& prefix,
                                        Origin origin) {
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < n; ++i) {
    entries.push_back({prefix + std::to_string(i) + ".ppm",
                       prefix + std::to_string(i) + ".pgm", origin,
                       origin == Origin::kSupplementary ? "synth" : ""});
  }
  return entries;
}

std::map<std::string, int> multiset_of(const std::vector<ManifestEntry>& entries) {
  std::map<std::string, int> counts;
  for (const auto& e : entries) counts[e.label_path]++;
  return counts;
}

}  // namespace

TEST_SUITE("mixer") {

TEST_CASE("ratio zero keeps originals only") {
  auto original = make_entries(10, "o", Origin::kOriginal);
  auto pool = make_entries(5, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.0, 1);
  CHECK(m.entries.size() == 10);
  CHECK(m.achieved_ratio == 0.0);
  CHECK(m.supplementary_count() == 0);
}

TEST_CASE("ratio 0.5 doubles a 100-image set") {
  auto original = make_entries(100, "o", Origin::kOriginal);
  auto pool = make_entries(150, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.5, 1);
  CHECK(m.entries.size() == 200);
  CHECK(m.supplementary_count() == 100);
  CHECK(m.achieved_ratio == doctest::Approx(0.5));
  CHECK(!m.with_replacement);
}

TEST_CASE("rounding rule: 7 originals at 0.3 take 3 supplementary") {
  auto original = make_entries(7, "o", Origin::kOriginal);
  auto pool = make_entries(10, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.3, 1);
  CHECK(m.supplementary_count() == 3);
  CHECK(m.achieved_ratio == doctest::Approx(0.3));
}

TEST_CASE("invalid ratios and empty originals are errors") {
  auto original = make_entries(4, "o", Origin::kOriginal);
  auto pool = make_entries(4, "s", Origin::kSupplementary);
  CHECK_THROWS_AS(mix_manifest(original, pool, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(mix_manifest(original, pool, 1.5, 1), ValidationError);
  CHECK_THROWS_AS(mix_manifest(original, pool, -0.1, 1), ValidationError);
  CHECK_THROWS_AS(mix_manifest({}, pool, 0.5, 1), ValidationError);
  CHECK_THROWS_AS(mix_manifest(original, {}, 0.5, 1), ValidationError);
}

TEST_CASE("small pool falls back to replacement and flags it") {
  auto original = make_entries(20, "o", Origin::kOriginal);
  auto pool = make_entries(3, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.5, 9);
  CHECK(m.supplementary_count() == 20);
  CHECK(m.with_replacement);
}

TEST_CASE("no original entry is ever dropped") {
  auto original = make_entries(13, "o", Origin::kOriginal);
  auto pool = make_entries(40, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.6, 3);
  auto counts = multiset_of(m.entries);
  for (const auto& e : original) {
    CHECK(counts[e.label_path] == 1);
  }
}

TEST_CASE("achieved ratio bound holds across the grid") {
  for (int size : {1, 7, 100}) {
    auto original = make_entries(size, "o", Origin::kOriginal);
    auto pool = make_entries(size * 10, "s", Origin::kSupplementary);
    for (int i = 0; i <= 9; ++i) {
      double r = 0.1 * i;
      DatasetManifest m = mix_manifest(original, pool, r, 5);
      CHECK(std::abs(m.achieved_ratio - r) <= 1.0 / double(m.entries.size()));
    }
  }
}

TEST_CASE("supplementary draw is uniform without replacement") {
  auto original = make_entries(6, "o", Origin::kOriginal);
  auto pool = make_entries(60, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.5, 77);
  auto counts = multiset_of(m.entries);
  for (const auto& [path, n] : counts) {
    CHECK(n == 1);  // no duplicates in the without-replacement path
  }
  CHECK(m.supplementary_count() == 6);
}

TEST_CASE("mixed schedule is one permutation of all entries") {
  auto original = make_entries(6, "o", Origin::kOriginal);
  auto pool = make_entries(10, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.4, 2);
  TrainingSchedule s = build_schedule(m, ScheduleMode::kMixed, 5);
  REQUIRE(s.phases.size() == 1);
  CHECK(multiset_of(s.phases[0]) == multiset_of(m.entries));
  CHECK(!s.degenerate);
}

TEST_CASE("pretrain-finetune puts supplementary first") {
  auto original = make_entries(8, "o", Origin::kOriginal);
  auto pool = make_entries(12, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.5, 2);
  TrainingSchedule s = build_schedule(m, ScheduleMode::kPretrainFinetune, 5);
  REQUIRE(s.phases.size() == 2);
  for (const auto& e : s.phases[0]) CHECK(e.origin == Origin::kSupplementary);
  for (const auto& e : s.phases[1]) CHECK(e.origin == Origin::kOriginal);
  CHECK(s.phases[0].size() == 8);
  CHECK(s.phases[1].size() == 8);

  // Multiset of both phases equals the manifest.
  auto all = s.phases[0];
  all.insert(all.end(), s.phases[1].begin(), s.phases[1].end());
  CHECK(multiset_of(all) == multiset_of(m.entries));
}

TEST_CASE("pretrain-finetune without supplementary degenerates") {
  auto original = make_entries(5, "o", Origin::kOriginal);
  DatasetManifest m = mix_manifest(original, {}, 0.0, 2);
  TrainingSchedule s = build_schedule(m, ScheduleMode::kPretrainFinetune, 5);
  CHECK(s.degenerate);
  REQUIRE(s.phases.size() == 1);
  CHECK(s.phases[0].size() == 5);
}

TEST_CASE("schedules are deterministic per seed") {
  auto original = make_entries(9, "o", Origin::kOriginal);
  auto pool = make_entries(9, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.4, 2);
  TrainingSchedule a = build_schedule(m, ScheduleMode::kMixed, 5);
  TrainingSchedule b = build_schedule(m, ScheduleMode::kMixed, 5);
  CHECK(a.phases == b.phases);
  TrainingSchedule c = build_schedule(m, ScheduleMode::kMixed, 6);
  CHECK(a.phases != c.phases);
}

TEST_CASE("manifest jsonl roundtrip") {
  auto original = make_entries(3, "o", Origin::kOriginal);
  auto pool = make_entries(5, "s", Origin::kSupplementary);
  DatasetManifest m = mix_manifest(original, pool, 0.4, 11);
  DatasetManifest back = DatasetManifest::from_jsonl(m.to_jsonl());
  CHECK(back.entries == m.entries);
  CHECK(back.requested_ratio == m.requested_ratio);
  CHECK(back.achieved_ratio == m.achieved_ratio);
  CHECK(back.with_replacement == m.with_replacement);
  // Two serializations are byte-identical.
  CHECK(m.to_jsonl() == back.to_jsonl());
}

TEST_CASE("manifest without header is accepted") {
  std::string text =
      "{\"image\":\"a.ppm\",\"label\":\"a.pgm\",\"origin\":\"ORIGINAL\"}\n"
      "{\"image\":\"b.ppm\",\"label\":\"b.pgm\",\"origin\":\"SUPPLEMENTARY\","
      "\"strategy\":\"x\"}\n";
  DatasetManifest m = DatasetManifest::from_jsonl(text);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[1].origin == Origin::kSupplementary);
  CHECK(m.entries[1].strategy_tag == "x");
}

}  // TEST_SUITE
