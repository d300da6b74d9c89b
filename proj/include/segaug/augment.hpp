#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "segaug/class_table.hpp"
#include "segaug/json_util.hpp"
#include "segaug/labelmap.hpp"
#include "segaug/rng.hpp"

namespace segaug {

struct SourceMap {
  std::string id;
  LabelMap map;
};

// Per-class pools of masks extracted from a dataset, the raw material the
// synthesis strategies sample from.
struct MaskLibrary {
  std::map<std::uint8_t, std::vector<Mask>> by_class;
  std::size_t min_pixels = 0;

  bool empty() const { return by_class.empty(); }
  std::size_t total_masks() const;
  std::vector<std::uint8_t> class_ids() const;

  Json to_json() const;
  static MaskLibrary from_json(const Json& j, const ClassTable& table);
};

// Separate every map and keep masks with at least `min_pixels` pixels,
// tagged with their source id.
MaskLibrary build_mask_library(std::span<const SourceMap> maps,
                               const ClassTable& table, std::size_t min_pixels);

// Uniform draw over the stored masks of one class.
const Mask& sample_mask(const MaskLibrary& library, std::uint8_t class_id,
                        Rng& rng);

// Horizontal background bands, top to bottom; fractions sum to 1.
struct Band {
  std::uint8_t class_id = 0;
  double fraction = 0.0;
};

struct BasicLayout {
  std::vector<Band> bands;

  void validate() const;
  // sky 0.35 / building 0.35 / road 0.30 where those names exist in the
  // table, otherwise the first three (or fewer) table classes evenly.
  static BasicLayout defaults_for(const ClassTable& table);

  Json to_json() const;
  static BasicLayout from_json(const Json& j);
};

// Band k fills rows [floor(h*cum_{k-1}), floor(h*cum_k)); every pixel gets a
// band label, never the ignore id.
LabelMap make_basic_map(const BasicLayout& layout, int width, int height);

// Overlap precedence for reconstruction: classes listed earlier are painted
// earlier (so later classes win). Classes not listed come after all listed
// ones, by ascending id.
std::vector<std::uint8_t> default_z_order(const ClassTable& table);

struct AppliedMask {
  std::uint8_t class_id = 0;
  std::string source_id;
};

// One synthesized label map plus everything needed to reproduce it.
struct SyntheticRecord {
  std::string id;
  LabelMap label_map;
  std::string strategy;            // "single_label" | "multi_label" | "reconstruction"
  std::string base_id;             // empty for reconstruction
  std::vector<AppliedMask> applied;  // application order
  std::uint64_t item_seed = 0;

  Json provenance_json() const;
};

// Overlay one sampled mask of `class_id` onto a uniformly sampled base map
// that contains no pixel of that class. Every output contains the class.
std::vector<SyntheticRecord> augment_single_label(std::span<const SourceMap> dataset,
                                                  const MaskLibrary& library,
                                                  std::uint8_t class_id,
                                                  std::size_t count,
                                                  std::uint64_t seed);

// One mask per listed class, overlaid in list order (later wins), onto a base
// sampled uniformly from maps missing at least one of the classes.
std::vector<SyntheticRecord> augment_multi_label(std::span<const SourceMap> dataset,
                                                 const MaskLibrary& library,
                                                 std::span<const std::uint8_t> classes,
                                                 std::size_t count,
                                                 std::uint64_t seed);

// A fully synthetic map: basic background bands, then `n_labels` sampled
// masks overlaid in z-order. Classes are drawn uniformly over the library
// (or proportionally to `class_weights` when given), masks uniformly within
// class. The result never contains ignore pixels.
SyntheticRecord reconstruct_map(
    const MaskLibrary& library, const BasicLayout& layout, std::size_t n_labels,
    std::span<const std::uint8_t> z_order, int width, int height,
    std::uint64_t seed,
    const std::optional<std::map<std::uint8_t, double>>& class_weights = std::nullopt);

std::vector<SyntheticRecord> reconstruct_many(
    const MaskLibrary& library, const BasicLayout& layout, std::size_t n_labels,
    std::span<const std::uint8_t> z_order, int width, int height,
    std::size_t count, std::uint64_t seed,
    const std::optional<std::map<std::uint8_t, double>>& class_weights = std::nullopt);

// Declarative synthesis request, the JSON surface of the three strategies.
struct SingleLabelStrategy {
  std::uint8_t class_id = 0;
};
struct MultiLabelStrategy {
  std::vector<std::uint8_t> classes;
};
struct ReconstructionStrategy {
  BasicLayout layout;
  std::size_t labels_per_image = 3;
  std::vector<std::uint8_t> z_order;  // empty -> default_z_order(table)
  std::optional<std::map<std::uint8_t, double>> class_weights;
};

struct AugmentationPlan {
  std::variant<SingleLabelStrategy, MultiLabelStrategy, ReconstructionStrategy>
      strategy;
  std::size_t count = 1;
  std::uint64_t seed = 0;

  std::string strategy_name() const;
  void validate(const MaskLibrary& library) const;

  Json to_json() const;
  static AugmentationPlan from_json(const Json& j, const ClassTable& table);
};

// Dispatch a plan against a dataset + library. Frame size is taken from the
// dataset for overlay strategies and passed explicitly for reconstruction.
std::vector<SyntheticRecord> run_plan(const AugmentationPlan& plan,
                                      std::span<const SourceMap> dataset,
                                      const MaskLibrary& library,
                                      const ClassTable& table, int width,
                                      int height);

}  // namespace segaug
