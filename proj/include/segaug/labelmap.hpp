#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segaug/class_table.hpp"

namespace segaug {

// Dense per-pixel class-id raster, row-major.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  static LabelMap filled(int width, int height, std::uint8_t value);

  std::uint8_t at(int x, int y) const { return data[std::size_t(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[std::size_t(y) * width + x]; }
  std::size_t pixel_count() const { return data.size(); }

  bool operator==(const LabelMap&) const = default;
};

struct Coord {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  auto operator<=>(const Coord&) const = default;
};

// The pixel set of one class cut out of a label map. Coordinates stay in the
// source frame so overlays preserve the object's original position.
struct Mask {
  std::uint8_t class_id = 0;
  int width = 0;   // source frame size
  int height = 0;
  std::vector<Coord> pixels;  // sorted row-major, unique
  std::string source_id;

  std::size_t pixel_count() const { return pixels.size(); }
};

// Throws ValidationError listing every id that is neither a table class nor
// the ignore id. Unknown ids are never silently remapped.
void validate_labelmap(const LabelMap& map, const ClassTable& table);

// Split a map into per-class masks (ignore pixels excluded), one mask per
// class present, ordered by ascending class id. Masks are pairwise disjoint
// and together cover exactly the non-ignore pixels.
std::vector<Mask> separate(const LabelMap& map, const ClassTable& table,
                           const std::string& source_id = "");

// Paint masks over a `fill`-initialized frame in list order; later masks win
// on overlap. compose(separate(m), w, h, ignore_id) == m.
LabelMap compose(std::span<const Mask> masks, int width, int height,
                 std::uint8_t fill);

// Copy of `base` with the mask's pixels set to the mask's class.
LabelMap overlay(const LabelMap& base, const Mask& mask);

}  // namespace segaug
