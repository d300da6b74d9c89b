#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "segaug/class_table.hpp"
#include "segaug/json_util.hpp"
#include "segaug/labelmap.hpp"

namespace segaug {

struct ClassFrequency {
  std::uint8_t id = 0;
  std::string name;
  // Fraction of images containing at least one pixel of the class.
  double appearance_frequency = 0.0;
  // Fraction of all non-ignore pixels belonging to the class.
  double pixel_share = 0.0;
  // Raw counts behind the fractions, for exact comparisons.
  std::uint64_t image_count = 0;
  std::uint64_t pixel_count = 0;
};

struct FrequencyReport {
  std::uint64_t dataset_size = 0;
  std::vector<ClassFrequency> classes;  // table order

  const ClassFrequency& for_class(std::uint8_t id) const;

  Json to_json() const;
  static FrequencyReport from_json(const Json& j);
};

// Per-class appearance frequency and pixel share over a dataset. Every map
// must validate against `table`; an empty sequence is an error.
FrequencyReport appearance_frequency(std::span<const LabelMap> maps,
                                     const ClassTable& table);

struct CorrelationReport {
  double pearson = 0.0;
  double spearman = 0.0;
  // (class id, appearance frequency, accuracy) for each paired class.
  struct Pair {
    std::uint8_t id;
    double frequency;
    double accuracy;
  };
  std::vector<Pair> pairs;

  Json to_json() const;
};

// Pearson and Spearman correlation between appearance frequency and per-class
// accuracy, over the classes present in both inputs. Spearman uses average
// ranks for ties. Fewer than 2 pairs or zero variance on either axis is an
// error (the coefficients would be undefined).
CorrelationReport rank_correlation(const FrequencyReport& freq,
                                   const std::map<std::uint8_t, double>& accuracy);

struct CountK {
  std::size_t value = 1;
};
struct Threshold {
  double value = 0.5;
};

// The k lowest-appearance-frequency classes, ascending by frequency, ties by
// ascending class id. k larger than the report is clipped, not an error.
std::vector<std::uint8_t> select_target_classes(const FrequencyReport& freq,
                                                CountK k);
// All classes with appearance frequency strictly below the threshold, same
// ordering.
std::vector<std::uint8_t> select_target_classes(const FrequencyReport& freq,
                                                Threshold threshold);

}  // namespace segaug
