#include <doctest.h>

#include <algorithm>
#include <set>

#include "segaug/errors.hpp"
#include "segaug/labelmap.hpp"
#include "segaug/pnm.hpp"
#include "segaug/rng.hpp"
#include "test_helpers.hpp"

using namespace segaug;
using segaug::testing::random_labelmap;
using segaug::testing::small_table;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) {
  return {s.begin(), s.end()};
}

}  // namespace

TEST_SUITE("labelmap") {

TEST_CASE("pgm decodes single-space header") {
  auto data = bytes_of("P5 2 1 255 ");
  data.pop_back();
  data.push_back(' ');
  data.push_back(7);
  data.push_back(255);
  LabelMap m = load_pgm(data);
  CHECK(m.width == 2);
  CHECK(m.height == 1);
  CHECK(m.data == std::vector<std::uint8_t>{7, 255});
}

TEST_CASE("pgm decodes 1x1 identity") {
  auto data = bytes_of("P5\n1 1\n255\n");
  data.push_back(0);
  LabelMap m = load_pgm(data);
  CHECK(m.width == 1);
  CHECK(m.height == 1);
  CHECK(m.data[0] == 0);
}

TEST_CASE("pgm decode accepts comments") {
  auto data = bytes_of("P5\n# a comment\n2 2\n255\n");
  for (int i = 0; i < 4; ++i) data.push_back(std::uint8_t(i));
  LabelMap m = load_pgm(data);
  CHECK(m.width == 2);
  CHECK(m.at(1, 1) == 3);
}

TEST_CASE("pgm save is canonical and deterministic") {
  LabelMap m = LabelMap::filled(1, 1, 3);
  auto expected = bytes_of("P5\n1 1\n255\n");
  expected.push_back(3);
  CHECK(save_pgm(m) == expected);
  CHECK(save_pgm(m) == save_pgm(m));
}

TEST_CASE("pgm roundtrip on random maps") {
  Rng rng(11);
  ClassTable table = ClassTable::cityscapes19();
  for (int i = 0; i < 50; ++i) {
    int w = 1 + int(rng.uniform_index(40));
    int h = 1 + int(rng.uniform_index(40));
    LabelMap m = random_labelmap(rng, table, w, h);
    auto saved = save_pgm(m);
    CHECK(load_pgm(saved) == m);
    // save(load(x)) == x holds for canonical streams
    CHECK(save_pgm(load_pgm(saved)) == saved);
  }
}

TEST_CASE("pgm decode errors carry byte offsets") {
  SUBCASE("bad magic") {
    auto data = bytes_of("P6\n1 1\n255\n");
    data.push_back(0);
    CHECK_THROWS_AS(load_pgm(data), DecodeError);
    try {
      load_pgm(data);
    } catch (const DecodeError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("maxval not 255") {
    auto data = bytes_of("P5\n1 1\n65535\n");
    data.push_back(0);
    data.push_back(0);
    try {
      load_pgm(data);
      FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
      CHECK(e.offset() == 6);
      CHECK(std::string(e.what()).find("maxval") != std::string::npos);
    }
  }
  SUBCASE("truncated payload") {
    auto data = bytes_of("P5\n2 2\n255\n");
    data.push_back(1);  // 3 bytes missing
    try {
      load_pgm(data);
      FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
      CHECK(e.offset() == data.size());
    }
  }
  SUBCASE("trailing bytes rejected") {
    auto data = bytes_of("P5\n1 1\n255\n");
    data.push_back(0);
    data.push_back(0);
    CHECK_THROWS_AS(load_pgm(data), DecodeError);
  }
}

TEST_CASE("validate_labelmap lists unknown ids") {
  ClassTable table = small_table();
  LabelMap m = LabelMap::filled(2, 2, 0);
  m.data[1] = 9;
  m.data[2] = 42;
  try {
    validate_labelmap(m, table);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("9") != std::string::npos);
    CHECK(msg.find("42") != std::string::npos);
  }
}

TEST_CASE("separate uniform map yields one full mask") {
  ClassTable table = ClassTable::cityscapes19();
  LabelMap m = LabelMap::filled(6, 4, 5);
  auto masks = separate(m, table, "src");
  REQUIRE(masks.size() == 1);
  CHECK(masks[0].class_id == 5);
  CHECK(masks[0].pixel_count() == 24);
  CHECK(masks[0].source_id == "src");
}

TEST_CASE("separate all-ignore map yields nothing") {
  ClassTable table = ClassTable::cityscapes19();
  LabelMap m = LabelMap::filled(4, 4, table.ignore_id());
  CHECK(separate(m, table).empty());
}

TEST_CASE("separate satisfies disjointness and coverage") {
  // Oracle: per-pixel scan with independent bookkeeping.
  ClassTable table = small_table();
  Rng rng(5);
  LabelMap m = random_labelmap(rng, table, 16, 16, false);
  auto masks = separate(m, table);
  CHECK(masks.size() == 3);

  std::set<std::pair<int, int>> seen;
  std::size_t total = 0;
  for (const auto& mask : masks) {
    for (const Coord& c : mask.pixels) {
      CHECK(m.at(c.x, c.y) == mask.class_id);
      CHECK(seen.emplace(c.x, c.y).second);  // disjoint
      ++total;
    }
  }
  CHECK(total == m.pixel_count());  // coverage (no ignore present)
}

TEST_CASE("compose inverts separate") {
  ClassTable table = ClassTable::cityscapes19();
  Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    LabelMap m = random_labelmap(rng, table, 12, 9);
    auto masks = separate(m, table);
    CHECK(compose(masks, 12, 9, table.ignore_id()) == m);
  }
}

TEST_CASE("compose of nothing is uniform fill") {
  LabelMap m = compose({}, 3, 2, 7);
  CHECK(m == LabelMap::filled(3, 2, 7));
}

TEST_CASE("compose precedence is last-wins") {
  Mask a{1, 4, 4, {{0, 0}, {1, 0}}, "a"};
  Mask b{2, 4, 4, {{1, 0}, {2, 0}}, "b"};
  LabelMap m = compose(std::vector<Mask>{a, b}, 4, 4, 0);
  CHECK(m.at(0, 0) == 1);
  CHECK(m.at(1, 0) == 2);  // overlap carries B
  CHECK(m.at(2, 0) == 2);
  CHECK(m.at(3, 0) == 0);
}

TEST_CASE("compose rejects frame mismatch") {
  Mask a{1, 3, 3, {{0, 0}}, "a"};
  CHECK_THROWS_AS(compose(std::vector<Mask>{a}, 4, 4, 0), ValidationError);
}

TEST_CASE("overlay changes exactly the mask pixels") {
  LabelMap base = LabelMap::filled(5, 5, 0);
  Mask one{3, 5, 5, {{2, 2}}, "m"};
  LabelMap out = overlay(base, one);
  CHECK(base.at(2, 2) == 0);  // base untouched
  int changed = 0;
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      if (out.at(x, y) != base.at(x, y)) ++changed;
    }
  }
  CHECK(changed == 1);
  CHECK(out.at(2, 2) == 3);
}

TEST_CASE("full-frame overlay makes a uniform map") {
  LabelMap base = LabelMap::filled(3, 3, 0);
  Mask full{4, 3, 3, {}, "m"};
  for (std::uint16_t y = 0; y < 3; ++y) {
    for (std::uint16_t x = 0; x < 3; ++x) full.pixels.push_back({x, y});
  }
  CHECK(overlay(base, full) == LabelMap::filled(3, 3, 4));
}

TEST_CASE("overlaying a wall mask adds the class") {
  ClassTable table = ClassTable::cityscapes19();
  const std::uint8_t wall = *table.id_of("wall");
  LabelMap base = LabelMap::filled(8, 8, *table.id_of("road"));
  REQUIRE(std::count(base.data.begin(), base.data.end(), wall) == 0);

  Mask wall_mask{wall, 8, 8, {{1, 1}, {2, 1}, {1, 2}}, "donor"};
  LabelMap out = overlay(base, wall_mask);
  CHECK(std::count(out.data.begin(), out.data.end(), wall) == 3);
}

TEST_CASE("overlay is idempotent") {
  ClassTable table = small_table();
  Rng rng(23);
  LabelMap base = random_labelmap(rng, table, 10, 10);
  Mask m{7, 10, 10, {{0, 0}, {5, 5}, {9, 9}, {3, 7}}, "m"};
  LabelMap once = overlay(base, m);
  CHECK(overlay(once, m) == once);
}

TEST_CASE("overlay rejects frame mismatch") {
  LabelMap base = LabelMap::filled(4, 4, 0);
  Mask m{1, 3, 3, {{0, 0}}, "m"};
  CHECK_THROWS_AS(overlay(base, m), ValidationError);
}

TEST_CASE("class table invariants") {
  CHECK_THROWS_AS(ClassTable({{1, "a"}, {1, "b"}}, 255), ValidationError);
  CHECK_THROWS_AS(ClassTable({{1, "a"}, {2, "a"}}, 255), ValidationError);
  CHECK_THROWS_AS(ClassTable({{255, "a"}}, 255), ValidationError);
  CHECK_THROWS_AS(ClassTable({}, 255), ValidationError);
}

TEST_CASE("class table json roundtrip") {
  ClassTable table = ClassTable::cityscapes19();
  ClassTable back = ClassTable::from_json(table.to_json());
  CHECK(back == table);
  CHECK(back.content_hash() == table.content_hash());
  CHECK(table.size() == 19);
  CHECK(*table.id_of("train") == 16);
  CHECK(table.name_of(10) == "sky");
}

}  // TEST_SUITE
