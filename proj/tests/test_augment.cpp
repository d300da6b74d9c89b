#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "segaug/augment.hpp"
#include "segaug/distribution.hpp"
#include "segaug/errors.hpp"
#include "test_helpers.hpp"

using namespace segaug;
using segaug::testing::random_labelmap;
using segaug::testing::small_table;

namespace {

std::vector<SourceMap> random_dataset(Rng& rng, const ClassTable& table, int n,
                                      int w = 12, int h = 12) {
  std::vector<SourceMap> maps;
  for (int i = 0; i < n; ++i) {
    maps.push_back({"map" + std::to_string(i), random_labelmap(rng, table, w, h)});
  }
  return maps;
}

bool contains_class(const LabelMap& m, std::uint8_t c) {
  return std::find(m.data.begin(), m.data.end(), c) != m.data.end();
}

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("library from one uniform map") {
  ClassTable table = small_table();
  std::vector<SourceMap> maps{{"only", LabelMap::filled(4, 4, 3)}};
  MaskLibrary lib = build_mask_library(maps, table, 1);
  REQUIRE(lib.by_class.size() == 1);
  REQUIRE(lib.by_class.count(3) == 1);
  CHECK(lib.by_class.at(3).size() == 1);
  CHECK(lib.by_class.at(3)[0].pixel_count() == 16);
  CHECK(lib.by_class.at(3)[0].source_id == "only");
}

TEST_CASE("min_pixels larger than any region empties the library") {
  ClassTable table = small_table();
  std::vector<SourceMap> maps{{"only", LabelMap::filled(4, 4, 3)}};
  MaskLibrary lib = build_mask_library(maps, table, 17);
  CHECK(lib.empty());
  CHECK(lib.total_masks() == 0);
}

TEST_CASE("library equals separate-then-filter oracle") {
  ClassTable table = small_table();
  Rng rng(31);
  auto maps = random_dataset(rng, table, 10);
  const std::size_t min_pixels = 30;
  MaskLibrary lib = build_mask_library(maps, table, min_pixels);

  std::map<std::uint8_t, std::vector<const Mask*>> expected;
  std::vector<std::vector<Mask>> keep_alive;
  for (const auto& src : maps) {
    keep_alive.push_back(separate(src.map, table, src.id));
    for (const auto& m : keep_alive.back()) {
      if (m.pixel_count() >= min_pixels) expected[m.class_id].push_back(&m);
    }
  }
  REQUIRE(lib.by_class.size() == expected.size());
  for (const auto& [id, masks] : expected) {
    REQUIRE(lib.by_class.count(id) == 1);
    const auto& got = lib.by_class.at(id);
    REQUIRE(got.size() == masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) {
      CHECK(got[i].pixels == masks[i]->pixels);
      CHECK(got[i].source_id == masks[i]->source_id);
    }
  }
}

TEST_CASE("library json roundtrip") {
  ClassTable table = small_table();
  Rng rng(37);
  auto maps = random_dataset(rng, table, 3, 6, 6);
  MaskLibrary lib = build_mask_library(maps, table, 2);
  MaskLibrary back = MaskLibrary::from_json(lib.to_json(), table);
  REQUIRE(back.by_class.size() == lib.by_class.size());
  CHECK(back.min_pixels == lib.min_pixels);
  for (const auto& [id, masks] : lib.by_class) {
    const auto& other = back.by_class.at(id);
    REQUIRE(other.size() == masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) {
      CHECK(other[i].pixels == masks[i].pixels);
    }
  }
}

TEST_CASE("sample_mask single candidate is deterministic") {
  ClassTable table = small_table();
  std::vector<SourceMap> maps{{"m", LabelMap::filled(3, 3, 7)}};
  MaskLibrary lib = build_mask_library(maps, table, 1);
  Rng rng(1);
  const Mask& m = sample_mask(lib, 7, rng);
  CHECK(m.source_id == "m");
}

TEST_CASE("sample_mask is uniform over candidates") {
  MaskLibrary lib;
  lib.min_pixels = 1;
  for (int i = 0; i < 4; ++i) {
    lib.by_class[1].push_back(
        {1, 4, 4, {{std::uint16_t(i), 0}}, "cand" + std::to_string(i)});
  }
  Rng rng(99);
  std::map<std::string, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    counts[sample_mask(lib, 1, rng).source_id]++;
  }
  for (const auto& [id, n] : counts) {
    CHECK(std::abs(double(n) / draws - 0.25) < 0.05);
  }
}

TEST_CASE("sample_mask same seed twice gives the same mask") {
  MaskLibrary lib;
  for (int i = 0; i < 7; ++i) {
    lib.by_class[1].push_back({1, 4, 4, {{std::uint16_t(i % 4), 0}}, std::to_string(i)});
  }
  Rng a(123), b(123);
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_mask(lib, 1, a).source_id == sample_mask(lib, 1, b).source_id);
  }
}

TEST_CASE("sample_mask names the missing class") {
  MaskLibrary lib;
  Rng rng(1);
  try {
    sample_mask(lib, 42, rng);
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("42") != std::string::npos);
  }
}

TEST_CASE("basic map single band is uniform") {
  BasicLayout layout{{{2, 1.0}}};
  CHECK(make_basic_map(layout, 5, 4) == LabelMap::filled(5, 4, 2));
}

TEST_CASE("default layout at h=100 follows cumulative floors") {
  ClassTable table = ClassTable::cityscapes19();
  BasicLayout layout = BasicLayout::defaults_for(table);
  LabelMap m = make_basic_map(layout, 2, 100);
  const std::uint8_t sky = *table.id_of("sky");
  const std::uint8_t building = *table.id_of("building");
  const std::uint8_t road = *table.id_of("road");
  for (int y = 0; y <= 34; ++y) CHECK(m.at(0, y) == sky);
  for (int y = 35; y <= 69; ++y) CHECK(m.at(0, y) == building);
  for (int y = 70; y <= 99; ++y) CHECK(m.at(0, y) == road);
}

TEST_CASE("basic map never contains ignore") {
  ClassTable table = ClassTable::cityscapes19();
  BasicLayout layout{{{0, 0.3333333333}, {2, 0.3333333333}, {10, 0.3333333334}}};
  for (int h : {1, 3, 7, 64, 101}) {
    LabelMap m = make_basic_map(layout, 4, h);
    CHECK(std::count(m.data.begin(), m.data.end(), table.ignore_id()) == 0);
  }
}

TEST_CASE("layout invariants") {
  CHECK_THROWS_AS(BasicLayout{}.validate(), ValidationError);
  CHECK_THROWS_AS((BasicLayout{{{0, 0.5}, {1, 0.4}}}).validate(), ValidationError);
  CHECK_THROWS_AS((BasicLayout{{{0, 1.5}, {1, -0.5}}}).validate(), ValidationError);
  CHECK_NOTHROW((BasicLayout{{{0, 0.5}, {1, 0.5}}}).validate());
}

TEST_CASE("default z-order puts backgrounds before objects") {
  ClassTable table = ClassTable::cityscapes19();
  auto z = default_z_order(table);
  REQUIRE(z.size() == table.size());
  auto pos = [&](const char* name) {
    return std::find(z.begin(), z.end(), *table.id_of(name)) - z.begin();
  };
  CHECK(pos("road") < pos("pole"));
  CHECK(pos("sky") < pos("person"));
  CHECK(pos("building") < pos("train"));
}

TEST_CASE("single-label augmentation adds the missing class") {
  ClassTable table = small_table();
  // Bases: uniform class 0 (lack 3 and 7). Donor map supplies class 3.
  std::vector<SourceMap> dataset;
  for (int i = 0; i < 5; ++i) {
    dataset.push_back({"base" + std::to_string(i), LabelMap::filled(8, 8, 0)});
  }
  LabelMap donor = LabelMap::filled(8, 8, 0);
  for (int y = 2; y < 5; ++y) {
    for (int x = 3; x < 6; ++x) donor.at(x, y) = 3;
  }
  dataset.push_back({"donor", donor});

  MaskLibrary lib = build_mask_library(dataset, table, 4);
  auto records = augment_single_label(dataset, lib, 3, 10, 77);
  REQUIRE(records.size() == 10);
  for (const auto& rec : records) {
    CHECK(contains_class(rec.label_map, 3));
    CHECK(rec.strategy == "single_label");
    CHECK(rec.applied.size() == 1);
    CHECK(rec.applied[0].class_id == 3);
    // Base was sampled among maps lacking class 3.
    CHECK(rec.base_id != "donor");
  }
}

TEST_CASE("single-label position preservation") {
  ClassTable table = small_table();
  std::vector<SourceMap> dataset{{"base", LabelMap::filled(8, 8, 0)}};
  LabelMap donor = LabelMap::filled(8, 8, 0);
  donor.at(5, 6) = 3;
  donor.at(6, 6) = 3;
  donor.at(5, 7) = 3;
  donor.at(6, 7) = 3;
  dataset.push_back({"donor", donor});
  MaskLibrary lib = build_mask_library(dataset, table, 4);

  auto records = augment_single_label(dataset, lib, 3, 3, 5);
  for (const auto& rec : records) {
    CHECK(rec.label_map.at(5, 6) == 3);
    CHECK(rec.label_map.at(6, 7) == 3);
    CHECK(rec.label_map.at(0, 0) == 0);
  }
}

TEST_CASE("single-label raises appearance frequency strictly") {
  ClassTable table = small_table();
  Rng rng(71);
  std::vector<SourceMap> dataset;
  for (int i = 0; i < 12; ++i) {
    LabelMap m = LabelMap::filled(10, 10, 0);
    if (i % 3 == 0) {
      for (int k = 0; k < 9; ++k) m.at(k % 3 + 2, k / 3 + 2) = 7;
    }
    dataset.push_back({"m" + std::to_string(i), m});
  }
  MaskLibrary lib = build_mask_library(dataset, table, 4);

  std::vector<LabelMap> original;
  for (const auto& s : dataset) original.push_back(s.map);
  FrequencyReport before = appearance_frequency(original, table);

  auto records = augment_single_label(dataset, lib, 7, 6, 3);
  std::vector<LabelMap> with_supp = original;
  for (const auto& rec : records) with_supp.push_back(rec.label_map);
  FrequencyReport after = appearance_frequency(with_supp, table);

  // Exact rational comparison: n1/d1 > n0/d0  <=>  n1*d0 > n0*d1.
  const auto& b = before.for_class(7);
  const auto& a = after.for_class(7);
  CHECK(a.image_count * before.dataset_size > b.image_count * after.dataset_size);
}

TEST_CASE("single-label requires an eligible base") {
  ClassTable table = small_table();
  std::vector<SourceMap> dataset{{"m", LabelMap::filled(4, 4, 3)}};
  MaskLibrary lib = build_mask_library(dataset, table, 1);
  CHECK_THROWS_AS(augment_single_label(dataset, lib, 3, 1, 0), ValidationError);
}

TEST_CASE("plan rejects count zero") {
  ClassTable table = small_table();
  Json j{{"strategy", "single_label"}, {"class", 3}, {"count", 0}};
  CHECK_THROWS_AS(AugmentationPlan::from_json(j, table), ValidationError);
}

TEST_CASE("multi-label overlays every listed class") {
  ClassTable table = small_table();
  std::vector<SourceMap> dataset;
  for (int i = 0; i < 4; ++i) {
    dataset.push_back({"b" + std::to_string(i), LabelMap::filled(10, 10, 0)});
  }
  LabelMap donor = LabelMap::filled(10, 10, 0);
  for (int x = 0; x < 4; ++x) donor.at(x, 1) = 3;
  for (int x = 4; x < 8; ++x) donor.at(x, 1) = 7;
  dataset.push_back({"donor", donor});
  MaskLibrary lib = build_mask_library(dataset, table, 4);

  std::vector<std::uint8_t> classes{3, 7};
  auto records = augment_multi_label(dataset, lib, classes, 8, 11);
  for (const auto& rec : records) {
    CHECK(contains_class(rec.label_map, 3));
    CHECK(contains_class(rec.label_map, 7));
    CHECK(rec.applied.size() == 2);
    CHECK(rec.applied[0].class_id == 3);
    CHECK(rec.applied[1].class_id == 7);
  }
}

TEST_CASE("multi-label overlap carries the later class") {
  ClassTable table = small_table();
  std::vector<SourceMap> dataset{{"b", LabelMap::filled(6, 6, 0)}};
  LabelMap donor = LabelMap::filled(6, 6, 0);
  // Identical 2x2 regions for class 3 and 7 in two donors.
  for (int y = 1; y < 3; ++y) {
    for (int x = 1; x < 3; ++x) donor.at(x, y) = 3;
  }
  dataset.push_back({"d1", donor});
  LabelMap donor2 = LabelMap::filled(6, 6, 0);
  for (int y = 1; y < 3; ++y) {
    for (int x = 1; x < 3; ++x) donor2.at(x, y) = 7;
  }
  dataset.push_back({"d2", donor2});
  MaskLibrary lib = build_mask_library(dataset, table, 4);

  std::vector<std::uint8_t> classes{3, 7};
  auto records = augment_multi_label(dataset, lib, classes, 4, 2);
  for (const auto& rec : records) {
    CHECK(rec.label_map.at(1, 1) == 7);  // later class wins the overlap
    CHECK(rec.label_map.at(2, 2) == 7);
  }
}

TEST_CASE("reconstruction with n=0 is the basic map") {
  ClassTable table = small_table();
  BasicLayout layout{{{0, 0.5}, {3, 0.5}}};
  MaskLibrary lib;
  lib.by_class[7].push_back({7, 8, 8, {{0, 0}}, "x"});
  SyntheticRecord rec = reconstruct_map(lib, layout, 0, {}, 8, 8, 9);
  CHECK(rec.label_map == make_basic_map(layout, 8, 8));
  CHECK(rec.applied.empty());
}

TEST_CASE("reconstruction never emits ignore pixels") {
  ClassTable table = small_table();
  Rng rng(53);
  auto dataset = random_dataset(rng, table, 6, 10, 10);
  MaskLibrary lib = build_mask_library(dataset, table, 4);
  REQUIRE(!lib.empty());
  BasicLayout layout{{{0, 0.4}, {3, 0.6}}};
  auto z = default_z_order(table);
  for (int i = 0; i < 50; ++i) {
    SyntheticRecord rec =
        reconstruct_map(lib, layout, 3, z, 10, 10, derive_seed(1000, i));
    CHECK(std::count(rec.label_map.data.begin(), rec.label_map.data.end(),
                     table.ignore_id()) == 0);
  }
}

TEST_CASE("reconstruction equals manual compose oracle") {
  ClassTable table = small_table();
  Rng rng(67);
  auto dataset = random_dataset(rng, table, 5, 9, 9);
  MaskLibrary lib = build_mask_library(dataset, table, 3);
  REQUIRE(!lib.empty());
  BasicLayout layout{{{0, 1.0}}};
  std::vector<std::uint8_t> z{0, 3, 7};

  const std::uint64_t seed = 4242;
  SyntheticRecord rec = reconstruct_map(lib, layout, 3, z, 9, 9, seed);

  // Oracle: replay the exact sampling procedure, then compose.
  Rng replay(seed);
  auto ids = lib.class_ids();
  std::vector<std::pair<std::uint8_t, const Mask*>> picks;
  for (int i = 0; i < 3; ++i) {
    std::uint8_t c = ids[replay.uniform_index(ids.size())];
    const auto& pool = lib.by_class.at(c);
    picks.emplace_back(c, &pool[replay.uniform_index(pool.size())]);
  }
  std::stable_sort(picks.begin(), picks.end(), [&](const auto& a, const auto& b) {
    auto rank = [&](std::uint8_t c) {
      return std::find(z.begin(), z.end(), c) - z.begin();
    };
    return rank(a.first) < rank(b.first);
  });
  LabelMap expected = make_basic_map(layout, 9, 9);
  std::vector<Mask> overlays;
  for (const auto& [c, mask] : picks) overlays.push_back(*mask);
  for (const auto& m : overlays) expected = overlay(expected, m);

  CHECK(rec.label_map == expected);
  REQUIRE(rec.applied.size() == picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    CHECK(rec.applied[i].class_id == picks[i].first);
    CHECK(rec.applied[i].source_id == picks[i].second->source_id);
  }
}

TEST_CASE("weighted reconstruction skews class choice") {
  MaskLibrary lib;
  lib.by_class[1].push_back({1, 4, 4, {{0, 0}}, "a"});
  lib.by_class[2].push_back({2, 4, 4, {{1, 0}}, "b"});
  std::map<std::uint8_t, double> weights{{1, 1.0}, {2, 0.0}};
  BasicLayout layout{{{1, 1.0}}};
  for (int i = 0; i < 20; ++i) {
    SyntheticRecord rec =
        reconstruct_map(lib, layout, 2, {}, 4, 4, derive_seed(5, i), weights);
    for (const auto& a : rec.applied) CHECK(a.class_id == 1);
  }
}

TEST_CASE("synthesis is deterministic per (plan, seed)") {
  ClassTable table = small_table();
  Rng rng(29);
  auto dataset = random_dataset(rng, table, 2, 8, 8);
  for (int i = 0; i < 4; ++i) {
    // Bases that lack both target classes keep multi-label eligible.
    dataset.push_back({"blank" + std::to_string(i), LabelMap::filled(8, 8, 0)});
  }
  MaskLibrary lib = build_mask_library(dataset, table, 2);

  auto once = augment_multi_label(dataset, lib, std::vector<std::uint8_t>{3, 7},
                                  5, 999);
  auto twice = augment_multi_label(dataset, lib, std::vector<std::uint8_t>{3, 7},
                                   5, 999);
  REQUIRE(once.size() == twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(once[i].label_map == twice[i].label_map);
    CHECK(once[i].base_id == twice[i].base_id);
    CHECK(once[i].item_seed == twice[i].item_seed);
  }
  // Different seed changes at least one output.
  auto other = augment_multi_label(dataset, lib, std::vector<std::uint8_t>{3, 7},
                                   5, 1000);
  bool any_diff = false;
  for (std::size_t i = 0; i < once.size(); ++i) {
    any_diff = any_diff || !(once[i].label_map == other[i].label_map) ||
               once[i].base_id != other[i].base_id;
  }
  CHECK(any_diff);
}

TEST_CASE("plan json roundtrip") {
  ClassTable table = ClassTable::cityscapes19();
  Json j{{"strategy", "multi_label"},
         {"classes", {"wall", "fence", "pole", "traffic light", "train"}},
         {"count", 4},
         {"seed", 9}};
  AugmentationPlan plan = AugmentationPlan::from_json(j, table);
  const auto& multi = std::get<MultiLabelStrategy>(plan.strategy);
  CHECK(multi.classes == std::vector<std::uint8_t>{3, 4, 5, 6, 16});
  CHECK(plan.strategy_name() == "multi_label");
  AugmentationPlan back =
      AugmentationPlan::from_json(plan.to_json(), table);
  CHECK(std::get<MultiLabelStrategy>(back.strategy).classes == multi.classes);
}

}  // TEST_SUITE
