#include "segaug/class_table.hpp"

#include <algorithm>
#include <set>

#include "segaug/errors.hpp"
#include "segaug/rng.hpp"

namespace segaug {

ClassTable::ClassTable(std::vector<ClassEntry> entries, std::uint8_t ignore_id)
    : entries_(std::move(entries)), ignore_id_(ignore_id) {
  if (entries_.empty()) {
    throw ValidationError("class table: no classes");
  }
  std::set<std::uint8_t> ids;
  std::set<std::string> names;
  for (const auto& e : entries_) {
    if (e.id == ignore_id_) {
      throw ValidationError("class table: class id " + std::to_string(e.id) +
                            " collides with the ignore id");
    }
    if (!ids.insert(e.id).second) {
      throw ValidationError("class table: duplicate class id " +
                            std::to_string(e.id));
    }
    if (e.name.empty() || !names.insert(e.name).second) {
      throw ValidationError("class table: duplicate or empty class name \"" +
                            e.name + "\"");
    }
  }
}

ClassTable ClassTable::cityscapes19() {
  return ClassTable(
      {{0, "road"},
       {1, "sidewalk"},
       {2, "building"},
       {3, "wall"},
       {4, "fence"},
       {5, "pole"},
       {6, "traffic light"},
       {7, "traffic sign"},
       {8, "vegetation"},
       {9, "terrain"},
       {10, "sky"},
       {11, "person"},
       {12, "rider"},
       {13, "car"},
       {14, "truck"},
       {15, "bus"},
       {16, "train"},
       {17, "motorcycle"},
       {18, "bicycle"}},
      255);
}

ClassTable ClassTable::from_json(const Json& j) {
  std::uint8_t ignore = 255;
  if (j.contains("ignore_id")) {
    int v = j.at("ignore_id").get<int>();
    if (v < 0 || v > 255) {
      throw ValidationError("class table: ignore_id out of range");
    }
    ignore = static_cast<std::uint8_t>(v);
  }
  std::vector<ClassEntry> entries;
  for (const auto& c : require_key(j, "classes", "class table")) {
    int id = require_key(c, "id", "class table entry").get<int>();
    if (id < 0 || id > 254) {
      throw ValidationError("class table: class id out of range 0..254: " +
                            std::to_string(id));
    }
    entries.push_back({static_cast<std::uint8_t>(id),
                       require_key(c, "name", "class table entry").get<std::string>()});
  }
  return ClassTable(std::move(entries), ignore);
}

Json ClassTable::to_json() const {
  Json j;
  j["ignore_id"] = ignore_id_;
  Json classes = Json::array();
  for (const auto& e : entries_) {
    classes.push_back({{"id", e.id}, {"name", e.name}});
  }
  j["classes"] = std::move(classes);
  return j;
}

bool ClassTable::contains(std::uint8_t id) const {
  return find_index(id).has_value();
}

std::optional<std::size_t> ClassTable::find_index(std::uint8_t id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].id == id) return i;
  }
  return std::nullopt;
}

std::size_t ClassTable::index_of(std::uint8_t id) const {
  if (auto idx = find_index(id)) return *idx;
  throw ValidationError("class table: unknown class id " + std::to_string(id));
}

const std::string& ClassTable::name_of(std::uint8_t id) const {
  return entries_[index_of(id)].name;
}

std::optional<std::uint8_t> ClassTable::id_of(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.id;
  }
  return std::nullopt;
}

std::uint64_t ClassTable::content_hash() const {
  std::uint64_t h = fnv1a64("class-table");
  h = mix64(h ^ ignore_id_);
  for (const auto& e : entries_) {
    h = mix64(h ^ e.id);
    h = mix64(h ^ fnv1a64(e.name));
  }
  return h;
}

}  // namespace segaug
