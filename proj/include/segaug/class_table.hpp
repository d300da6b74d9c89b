#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segaug/json_util.hpp"

namespace segaug {

struct ClassEntry {
  std::uint8_t id = 0;
  std::string name;

  bool operator==(const ClassEntry&) const = default;
};

// The set of semantic classes a dataset is annotated with, plus the ignore
// id excluded from training and evaluation. Ids are in 0..254, unique, with
// unique names; the ignore id is never itself a class.
class ClassTable {
 public:
  ClassTable(std::vector<ClassEntry> entries, std::uint8_t ignore_id = 255);

  // The 19 Cityscapes evaluation classes with train ids 0..18, ignore 255.
  static ClassTable cityscapes19();

  static ClassTable from_json(const Json& j);
  Json to_json() const;

  const std::vector<ClassEntry>& entries() const { return entries_; }
  std::uint8_t ignore_id() const { return ignore_id_; }
  std::size_t size() const { return entries_.size(); }

  bool contains(std::uint8_t id) const;
  // Position of `id` within entries(); throws ValidationError if absent.
  std::size_t index_of(std::uint8_t id) const;
  std::optional<std::size_t> find_index(std::uint8_t id) const;
  const std::string& name_of(std::uint8_t id) const;
  std::optional<std::uint8_t> id_of(std::string_view name) const;

  // Stable content hash (ids, names, ignore id); ties serialized models to
  // the table they were trained against.
  std::uint64_t content_hash() const;

  bool operator==(const ClassTable& other) const = default;

 private:
  std::vector<ClassEntry> entries_;
  std::uint8_t ignore_id_;
};

}  // namespace segaug
