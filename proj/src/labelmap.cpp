#include "segaug/labelmap.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

#include "segaug/errors.hpp"

namespace segaug {

LabelMap LabelMap::filled(int width, int height, std::uint8_t value) {
  if (width < 1 || height < 1) {
    throw ValidationError("label map: width and height must be >= 1");
  }
  LabelMap m;
  m.width = width;
  m.height = height;
  m.data.assign(std::size_t(width) * height, value);
  return m;
}

void validate_labelmap(const LabelMap& map, const ClassTable& table) {
  if (map.width < 1 || map.height < 1 ||
      map.data.size() != std::size_t(map.width) * map.height) {
    throw ValidationError("label map: inconsistent dimensions");
  }
  std::array<bool, 256> known{};
  for (const auto& e : table.entries()) known[e.id] = true;
  known[table.ignore_id()] = true;

  std::set<int> offenders;
  for (std::uint8_t v : map.data) {
    if (!known[v]) offenders.insert(v);
  }
  if (!offenders.empty()) {
    std::ostringstream msg;
    msg << "label map: unknown class ids:";
    for (int v : offenders) msg << ' ' << v;
    throw ValidationError(msg.str());
  }
}

std::vector<Mask> separate(const LabelMap& map, const ClassTable& table,
                           const std::string& source_id) {
  validate_labelmap(map, table);

  std::array<std::vector<Coord>, 256> buckets;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      std::uint8_t v = map.at(x, y);
      if (v == table.ignore_id()) continue;
      buckets[v].push_back({std::uint16_t(x), std::uint16_t(y)});
    }
  }

  std::vector<Mask> masks;
  for (const auto& e : table.entries()) {
    auto& pixels = buckets[e.id];
    if (pixels.empty()) continue;
    Mask m;
    m.class_id = e.id;
    m.width = map.width;
    m.height = map.height;
    m.pixels = std::move(pixels);  // already sorted: row-major scan order
    m.source_id = source_id;
    masks.push_back(std::move(m));
  }
  std::sort(masks.begin(), masks.end(),
            [](const Mask& a, const Mask& b) { return a.class_id < b.class_id; });
  return masks;
}

LabelMap compose(std::span<const Mask> masks, int width, int height,
                 std::uint8_t fill) {
  LabelMap out = LabelMap::filled(width, height, fill);
  for (const auto& m : masks) {
    if (m.width != width || m.height != height) {
      throw ValidationError(
          "compose: mask frame " + std::to_string(m.width) + "x" +
          std::to_string(m.height) + " does not match target " +
          std::to_string(width) + "x" + std::to_string(height));
    }
    for (const Coord& c : m.pixels) {
      out.at(c.x, c.y) = m.class_id;
    }
  }
  return out;
}

LabelMap overlay(const LabelMap& base, const Mask& mask) {
  if (mask.width != base.width || mask.height != base.height) {
    throw ValidationError(
        "overlay: mask frame " + std::to_string(mask.width) + "x" +
        std::to_string(mask.height) + " does not match base " +
        std::to_string(base.width) + "x" + std::to_string(base.height));
  }
  LabelMap out = base;
  for (const Coord& c : mask.pixels) {
    out.at(c.x, c.y) = mask.class_id;
  }
  return out;
}

}  // namespace segaug
