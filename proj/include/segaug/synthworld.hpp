#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segaug/augment.hpp"
#include "segaug/class_table.hpp"
#include "segaug/generator.hpp"
#include "segaug/json_util.hpp"
#include "segaug/labelmap.hpp"

namespace segaug {

// One object class of the procedural world: drawn as an axis-aligned
// rectangle with the given per-image appearance probability and side range.
struct ObjectSpec {
  std::uint8_t class_id = 0;
  double appearance_prob = 0.0;
  int min_size = 1;
  int max_size = 1;
};

// Procedural mini-dataset with controllable class imbalance: background
// bands plus randomly placed rectangles, rendered through the palette with
// additive noise.
struct WorldConfig {
  int width = 64;
  int height = 64;
  ClassTable table = ClassTable::cityscapes19();
  BasicLayout background;
  std::vector<ObjectSpec> objects;
  Palette palette = Palette::defaults_for(ClassTable::cityscapes19());
  double noise_sigma = 8.0;
  std::uint64_t seed = 0;
  std::size_t count = 200;

  void validate() const;

  // 64x64, sky/building/road bands plus car (p=0.9), person (p=0.5) and
  // train (p=0.1) rectangles, noise sigma 8. Class ids follow the Cityscapes
  // train-id convention of ClassTable::cityscapes19().
  static WorldConfig default_world();

  Json to_json() const;
  static WorldConfig from_json(const Json& j);
};

struct WorldSample {
  std::string id;
  LabelMap labels;
  RenderedImage image;
};

// Deterministic per (config.seed, image index); label maps are ignore-free.
std::vector<WorldSample> generate_dataset(const WorldConfig& config);

}  // namespace segaug
