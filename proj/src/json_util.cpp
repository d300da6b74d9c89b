#include "segaug/json_util.hpp"

namespace segaug {

Json parse_json(const std::string& text, const std::string& context) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw ValidationError(context + ": invalid JSON");
  }
  return j;
}

}  // namespace segaug
