#pragma once

#include <string>

#include <json.hpp>

#include "segaug/errors.hpp"

namespace segaug {

// Insertion-ordered JSON everywhere so serialized artifacts are byte-stable.
using Json = nlohmann::ordered_json;

inline const Json& require_key(const Json& j, const std::string& key,
                               const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError(context + ": missing required key \"" + key + "\"");
  }
  return *it;
}

Json parse_json(const std::string& text, const std::string& context);

}  // namespace segaug
