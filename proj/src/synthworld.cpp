#include "segaug/synthworld.hpp"

#include <cstdio>

#include "segaug/errors.hpp"
#include "segaug/rng.hpp"

namespace segaug {

void WorldConfig::validate() const {
  if (width < 1 || height < 1) {
    throw ValidationError("world config: width and height must be >= 1");
  }
  if (count < 1) {
    throw ValidationError("world config: count must be >= 1");
  }
  background.validate();
  for (const auto& b : background.bands) {
    if (!table.contains(b.class_id)) {
      throw ValidationError("world config: band class " +
                            std::to_string(b.class_id) + " not in table");
    }
  }
  for (const auto& o : objects) {
    if (!table.contains(o.class_id)) {
      throw ValidationError("world config: object class " +
                            std::to_string(o.class_id) + " not in table");
    }
    if (!(o.appearance_prob >= 0.0 && o.appearance_prob <= 1.0)) {
      throw ValidationError("world config: appearance probability out of [0,1]");
    }
    if (o.min_size < 1 || o.max_size < o.min_size) {
      throw ValidationError("world config: bad size range for class " +
                            std::to_string(o.class_id));
    }
    if (o.max_size > width || o.max_size > height) {
      throw ValidationError("world config: object of class " +
                            std::to_string(o.class_id) +
                            " can exceed the frame (max side " +
                            std::to_string(o.max_size) + ")");
    }
  }
}

WorldConfig WorldConfig::default_world() {
  // Cityscapes-convention subset: three background bands and three object
  // classes with appearance probabilities 0.9 / 0.5 / 0.1. The rare class
  // (train) is nearly the color of the medium one (bus), the classic
  // confusion pair: with too few samples its boundary never forms and bus
  // absorbs it.
  ClassTable table({{0, "road"},
                    {2, "building"},
                    {10, "sky"},
                    {13, "car"},
                    {15, "bus"},
                    {16, "train"}},
                   255);
  WorldConfig config;
  config.width = 64;
  config.height = 64;
  config.background = BasicLayout::defaults_for(table);
  config.objects = {
      {13, 0.9, 10, 22},  // car: common
      {15, 0.5, 8, 18},   // bus: medium
      {16, 0.1, 12, 24},  // train: rare but sizeable when present
  };
  config.palette = Palette::defaults_for(table);
  config.table = std::move(table);
  config.noise_sigma = 8.0;
  config.count = 200;
  return config;
}

Json WorldConfig::to_json() const {
  Json objects_json = Json::array();
  for (const auto& o : objects) {
    objects_json.push_back({{"class_id", o.class_id},
                            {"appearance_prob", o.appearance_prob},
                            {"min_size", o.min_size},
                            {"max_size", o.max_size}});
  }
  return Json{{"width", width},
              {"height", height},
              {"classes", table.to_json()},
              {"background", background.to_json()},
              {"objects", std::move(objects_json)},
              {"palette", palette.to_json()},
              {"noise_sigma", noise_sigma},
              {"seed", seed},
              {"count", count}};
}

WorldConfig WorldConfig::from_json(const Json& j) {
  WorldConfig config = default_world();
  if (j.contains("classes")) {
    config.table = ClassTable::from_json(j.at("classes"));
    config.background = BasicLayout::defaults_for(config.table);
    config.palette = Palette::defaults_for(config.table);
    config.objects.clear();
  }
  config.width = j.value("width", config.width);
  config.height = j.value("height", config.height);
  if (j.contains("background")) {
    config.background = BasicLayout::from_json(j.at("background"));
  }
  if (j.contains("objects")) {
    config.objects.clear();
    for (const auto& o : j.at("objects")) {
      config.objects.push_back(
          {static_cast<std::uint8_t>(require_key(o, "class_id", "object").get<int>()),
           require_key(o, "appearance_prob", "object").get<double>(),
           o.value("min_size", 1), o.value("max_size", 1)});
    }
  }
  if (j.contains("palette")) {
    config.palette = Palette::from_json(j.at("palette"));
  }
  config.noise_sigma = j.value("noise_sigma", config.noise_sigma);
  config.seed = j.value("seed", config.seed);
  config.count = j.value("count", config.count);
  config.validate();
  return config;
}

std::vector<WorldSample> generate_dataset(const WorldConfig& config) {
  config.validate();

  const LabelMap basic =
      make_basic_map(config.background, config.width, config.height);

  std::vector<WorldSample> samples;
  samples.reserve(config.count);
  for (std::size_t i = 0; i < config.count; ++i) {
    const std::uint64_t item_seed = derive_seed(config.seed, i);
    Rng rng(item_seed);

    LabelMap labels = basic;
    for (const auto& obj : config.objects) {
      if (rng.uniform_real() >= obj.appearance_prob) continue;
      const int side_range = obj.max_size - obj.min_size + 1;
      const int w = obj.min_size + int(rng.uniform_index(std::uint64_t(side_range)));
      const int h = obj.min_size + int(rng.uniform_index(std::uint64_t(side_range)));
      const int x0 = int(rng.uniform_index(std::uint64_t(config.width - w + 1)));
      const int y0 = int(rng.uniform_index(std::uint64_t(config.height - h + 1)));
      for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
          labels.at(x, y) = obj.class_id;
        }
      }
    }

    WorldSample sample;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06zu", i);
    sample.id = buf;
    sample.image = render_palette(labels, config.palette, config.noise_sigma,
                                  derive_seed(item_seed, "render"));
    sample.labels = std::move(labels);
    samples.push_back(std::move(sample));
  }
  return samples;
}

}  // namespace segaug
