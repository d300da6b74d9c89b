#include "segaug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "segaug/errors.hpp"

namespace segaug {

std::size_t MaskLibrary::total_masks() const {
  std::size_t n = 0;
  for (const auto& [id, masks] : by_class) n += masks.size();
  return n;
}

std::vector<std::uint8_t> MaskLibrary::class_ids() const {
  std::vector<std::uint8_t> ids;
  for (const auto& [id, masks] : by_class) ids.push_back(id);
  return ids;  // std::map keeps them ascending
}

Json MaskLibrary::to_json() const {
  Json j;
  j["min_pixels"] = min_pixels;
  Json classes = Json::array();
  for (const auto& [id, masks] : by_class) {
    Json ms = Json::array();
    for (const auto& m : masks) {
      Json pixels = Json::array();
      for (const Coord& c : m.pixels) pixels.push_back({c.x, c.y});
      ms.push_back({{"source", m.source_id},
                    {"width", m.width},
                    {"height", m.height},
                    {"pixels", std::move(pixels)}});
    }
    classes.push_back({{"id", id}, {"masks", std::move(ms)}});
  }
  j["classes"] = std::move(classes);
  return j;
}

MaskLibrary MaskLibrary::from_json(const Json& j, const ClassTable& table) {
  MaskLibrary lib;
  lib.min_pixels = require_key(j, "min_pixels", "mask library").get<std::size_t>();
  for (const auto& c : require_key(j, "classes", "mask library")) {
    int id = require_key(c, "id", "mask library class").get<int>();
    if (id < 0 || id > 255 || !table.contains(static_cast<std::uint8_t>(id))) {
      throw ValidationError("mask library: unknown class id " + std::to_string(id));
    }
    for (const auto& mj : require_key(c, "masks", "mask library class")) {
      Mask m;
      m.class_id = static_cast<std::uint8_t>(id);
      m.source_id = require_key(mj, "source", "mask").get<std::string>();
      m.width = require_key(mj, "width", "mask").get<int>();
      m.height = require_key(mj, "height", "mask").get<int>();
      for (const auto& p : require_key(mj, "pixels", "mask")) {
        int x = p.at(0).get<int>();
        int y = p.at(1).get<int>();
        if (x < 0 || y < 0 || x >= m.width || y >= m.height) {
          throw ValidationError("mask library: pixel out of frame");
        }
        m.pixels.push_back({std::uint16_t(x), std::uint16_t(y)});
      }
      if (m.pixels.empty()) {
        throw ValidationError("mask library: empty mask");
      }
      std::sort(m.pixels.begin(), m.pixels.end(), [](const Coord& a, const Coord& b) {
        return std::tie(a.y, a.x) < std::tie(b.y, b.x);
      });
      lib.by_class[m.class_id].push_back(std::move(m));
    }
  }
  return lib;
}

MaskLibrary build_mask_library(std::span<const SourceMap> maps,
                               const ClassTable& table, std::size_t min_pixels) {
  MaskLibrary lib;
  lib.min_pixels = min_pixels;
  for (const auto& src : maps) {
    for (auto& mask : separate(src.map, table, src.id)) {
      if (mask.pixel_count() >= min_pixels) {
        lib.by_class[mask.class_id].push_back(std::move(mask));
      }
    }
  }
  return lib;
}

const Mask& sample_mask(const MaskLibrary& library, std::uint8_t class_id,
                        Rng& rng) {
  auto it = library.by_class.find(class_id);
  if (it == library.by_class.end() || it->second.empty()) {
    throw ValidationError("sample_mask: no masks for class " +
                          std::to_string(class_id));
  }
  return it->second[rng.uniform_index(it->second.size())];
}

void BasicLayout::validate() const {
  if (bands.empty()) {
    throw ValidationError("basic layout: needs at least one band");
  }
  double sum = 0.0;
  for (const auto& b : bands) {
    if (!(b.fraction > 0.0)) {
      throw ValidationError("basic layout: band fractions must be > 0");
    }
    sum += b.fraction;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("basic layout: band fractions must sum to 1, got " +
                          std::to_string(sum));
  }
}

BasicLayout BasicLayout::defaults_for(const ClassTable& table) {
  auto sky = table.id_of("sky");
  auto building = table.id_of("building");
  auto road = table.id_of("road");
  if (sky && building && road) {
    return BasicLayout{{{*sky, 0.35}, {*building, 0.35}, {*road, 0.30}}};
  }
  // No recognizable scene classes; spread the first few evenly.
  std::size_t n = std::min<std::size_t>(3, table.size());
  BasicLayout layout;
  for (std::size_t i = 0; i < n; ++i) {
    layout.bands.push_back({table.entries()[i].id, 1.0 / double(n)});
  }
  return layout;
}

Json BasicLayout::to_json() const {
  Json bands_json = Json::array();
  for (const auto& b : bands) {
    bands_json.push_back({{"class_id", b.class_id}, {"fraction", b.fraction}});
  }
  return Json{{"bands", std::move(bands_json)}};
}

BasicLayout BasicLayout::from_json(const Json& j) {
  BasicLayout layout;
  for (const auto& b : require_key(j, "bands", "basic layout")) {
    layout.bands.push_back(
        {static_cast<std::uint8_t>(require_key(b, "class_id", "band").get<int>()),
         require_key(b, "fraction", "band").get<double>()});
  }
  layout.validate();
  return layout;
}

LabelMap make_basic_map(const BasicLayout& layout, int width, int height) {
  layout.validate();
  LabelMap map = LabelMap::filled(width, height, layout.bands.front().class_id);
  double cum = 0.0;
  int row_begin = 0;
  for (std::size_t k = 0; k < layout.bands.size(); ++k) {
    cum += layout.bands[k].fraction;
    // The last band always reaches the bottom row, so a fraction sum of
    // 1 - 1e-9 cannot leave an unlabeled strip.
    int row_end = (k + 1 == layout.bands.size())
                      ? height
                      : int(std::floor(double(height) * cum));
    for (int y = row_begin; y < std::min(row_end, height); ++y) {
      for (int x = 0; x < width; ++x) {
        map.at(x, y) = layout.bands[k].class_id;
      }
    }
    row_begin = std::max(row_begin, row_end);
  }
  return map;
}

std::vector<std::uint8_t> default_z_order(const ClassTable& table) {
  static const char* kBackgroundNames[] = {"road",  "sidewalk",   "building",
                                           "wall",  "fence",      "vegetation",
                                           "terrain", "sky"};
  std::vector<std::uint8_t> order;
  std::set<std::uint8_t> used;
  for (const char* name : kBackgroundNames) {
    if (auto id = table.id_of(name)) {
      order.push_back(*id);
      used.insert(*id);
    }
  }
  std::vector<std::uint8_t> rest;
  for (const auto& e : table.entries()) {
    if (!used.count(e.id)) rest.push_back(e.id);
  }
  std::sort(rest.begin(), rest.end());
  order.insert(order.end(), rest.begin(), rest.end());
  return order;
}

Json SyntheticRecord::provenance_json() const {
  Json applied_json = Json::array();
  for (const auto& a : applied) {
    applied_json.push_back({{"class_id", a.class_id}, {"source", a.source_id}});
  }
  return Json{{"id", id},
              {"strategy", strategy},
              {"base", base_id},
              {"applied", std::move(applied_json)},
              {"item_seed", item_seed}};
}

namespace {

std::string record_id(const std::string& strategy, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return strategy + "/" + buf;
}

bool map_contains(const LabelMap& map, std::uint8_t class_id) {
  return std::find(map.data.begin(), map.data.end(), class_id) != map.data.end();
}

}  // namespace

std::vector<SyntheticRecord> augment_single_label(
    std::span<const SourceMap> dataset, const MaskLibrary& library,
    std::uint8_t class_id, std::size_t count, std::uint64_t seed) {
  if (count < 1) {
    throw ValidationError("augment_single_label: count must be >= 1");
  }
  if (!library.by_class.count(class_id)) {
    throw ValidationError("augment_single_label: class " +
                          std::to_string(class_id) + " not in mask library");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!map_contains(dataset[i].map, class_id)) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw ValidationError(
        "augment_single_label: no base map lacks class " +
        std::to_string(class_id));
  }

  std::vector<SyntheticRecord> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t item_seed = derive_seed(seed, i);
    Rng rng(item_seed);
    const SourceMap& base = dataset[eligible[rng.uniform_index(eligible.size())]];
    const Mask& mask = sample_mask(library, class_id, rng);
    SyntheticRecord rec;
    rec.id = record_id("single_label", i);
    rec.label_map = overlay(base.map, mask);
    rec.strategy = "single_label";
    rec.base_id = base.id;
    rec.applied = {{class_id, mask.source_id}};
    rec.item_seed = item_seed;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<SyntheticRecord> augment_multi_label(
    std::span<const SourceMap> dataset, const MaskLibrary& library,
    std::span<const std::uint8_t> classes, std::size_t count,
    std::uint64_t seed) {
  if (count < 1) {
    throw ValidationError("augment_multi_label: count must be >= 1");
  }
  if (classes.empty()) {
    throw ValidationError("augment_multi_label: empty class list");
  }
  for (std::uint8_t c : classes) {
    if (!library.by_class.count(c)) {
      throw ValidationError("augment_multi_label: class " + std::to_string(c) +
                            " not in mask library");
    }
  }
  // A base is eligible when it misses at least one of the listed classes.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    bool missing_any = false;
    for (std::uint8_t c : classes) {
      if (!map_contains(dataset[i].map, c)) {
        missing_any = true;
        break;
      }
    }
    if (missing_any) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw ValidationError(
        "augment_multi_label: every base map already contains all listed classes");
  }

  std::vector<SyntheticRecord> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t item_seed = derive_seed(seed, i);
    Rng rng(item_seed);
    const SourceMap& base = dataset[eligible[rng.uniform_index(eligible.size())]];
    SyntheticRecord rec;
    rec.id = record_id("multi_label", i);
    rec.label_map = base.map;
    rec.strategy = "multi_label";
    rec.base_id = base.id;
    rec.item_seed = item_seed;
    for (std::uint8_t c : classes) {
      const Mask& mask = sample_mask(library, c, rng);
      rec.label_map = overlay(rec.label_map, mask);
      rec.applied.push_back({c, mask.source_id});
    }
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

std::uint8_t draw_class(const MaskLibrary& library,
                        const std::optional<std::map<std::uint8_t, double>>& weights,
                        Rng& rng) {
  auto ids = library.class_ids();
  if (!weights) {
    return ids[rng.uniform_index(ids.size())];
  }
  double total = 0.0;
  std::vector<double> cumulative;
  for (std::uint8_t id : ids) {
    auto it = weights->find(id);
    double w = it == weights->end() ? 0.0 : it->second;
    if (w < 0.0) {
      throw ValidationError("reconstruct_map: negative class weight");
    }
    total += w;
    cumulative.push_back(total);
  }
  if (total <= 0.0) {
    throw ValidationError("reconstruct_map: class weights sum to zero");
  }
  double u = rng.uniform_real() * total;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (u < cumulative[i]) return ids[i];
  }
  return ids.back();
}

}  // namespace

SyntheticRecord reconstruct_map(
    const MaskLibrary& library, const BasicLayout& layout, std::size_t n_labels,
    std::span<const std::uint8_t> z_order, int width, int height,
    std::uint64_t seed,
    const std::optional<std::map<std::uint8_t, double>>& class_weights) {
  if (library.empty() && n_labels > 0) {
    throw ValidationError("reconstruct_map: empty mask library");
  }

  Rng rng(seed);
  std::vector<std::pair<std::uint8_t, const Mask*>> picks;
  for (std::size_t i = 0; i < n_labels; ++i) {
    std::uint8_t c = draw_class(library, class_weights, rng);
    picks.emplace_back(c, &sample_mask(library, c, rng));
  }

  // Listed classes keep their z_order position; everything else goes after,
  // by ascending id. Stable sort keeps sampling order within a class.
  auto z_rank = [&](std::uint8_t c) -> std::size_t {
    for (std::size_t i = 0; i < z_order.size(); ++i) {
      if (z_order[i] == c) return i;
    }
    return z_order.size() + c;
  };
  std::stable_sort(picks.begin(), picks.end(),
                   [&](const auto& a, const auto& b) {
                     return z_rank(a.first) < z_rank(b.first);
                   });

  SyntheticRecord rec;
  rec.label_map = make_basic_map(layout, width, height);
  rec.strategy = "reconstruction";
  rec.item_seed = seed;
  for (const auto& [c, mask] : picks) {
    rec.label_map = overlay(rec.label_map, *mask);
    rec.applied.push_back({c, mask->source_id});
  }
  return rec;
}

std::vector<SyntheticRecord> reconstruct_many(
    const MaskLibrary& library, const BasicLayout& layout, std::size_t n_labels,
    std::span<const std::uint8_t> z_order, int width, int height,
    std::size_t count, std::uint64_t seed,
    const std::optional<std::map<std::uint8_t, double>>& class_weights) {
  if (count < 1) {
    throw ValidationError("reconstruct_many: count must be >= 1");
  }
  std::vector<SyntheticRecord> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticRecord rec =
        reconstruct_map(library, layout, n_labels, z_order, width, height,
                        derive_seed(seed, i), class_weights);
    rec.id = record_id("reconstruction", i);
    records.push_back(std::move(rec));
  }
  return records;
}

std::string AugmentationPlan::strategy_name() const {
  if (std::holds_alternative<SingleLabelStrategy>(strategy)) return "single_label";
  if (std::holds_alternative<MultiLabelStrategy>(strategy)) return "multi_label";
  return "reconstruction";
}

void AugmentationPlan::validate(const MaskLibrary& library) const {
  if (count < 1) {
    throw ValidationError("augmentation plan: count must be >= 1");
  }
  if (const auto* s = std::get_if<SingleLabelStrategy>(&strategy)) {
    if (!library.by_class.count(s->class_id)) {
      throw ValidationError("augmentation plan: class " +
                            std::to_string(s->class_id) + " not in library");
    }
  } else if (const auto* m = std::get_if<MultiLabelStrategy>(&strategy)) {
    if (m->classes.empty()) {
      throw ValidationError("augmentation plan: multi_label needs classes");
    }
    for (std::uint8_t c : m->classes) {
      if (!library.by_class.count(c)) {
        throw ValidationError("augmentation plan: class " + std::to_string(c) +
                              " not in library");
      }
    }
  } else {
    std::get<ReconstructionStrategy>(strategy).layout.validate();
  }
}

Json AugmentationPlan::to_json() const {
  Json j;
  if (const auto* s = std::get_if<SingleLabelStrategy>(&strategy)) {
    j["strategy"] = "single_label";
    j["class"] = s->class_id;
  } else if (const auto* m = std::get_if<MultiLabelStrategy>(&strategy)) {
    j["strategy"] = "multi_label";
    j["classes"] = m->classes;
  } else {
    const auto& r = std::get<ReconstructionStrategy>(strategy);
    j["strategy"] = "reconstruction";
    j["layout"] = r.layout.to_json();
    j["labels_per_image"] = r.labels_per_image;
    j["z_order"] = r.z_order;
    if (r.class_weights) {
      Json w = Json::object();
      for (const auto& [id, weight] : *r.class_weights) {
        w[std::to_string(id)] = weight;
      }
      j["class_weights"] = std::move(w);
    }
  }
  j["count"] = count;
  j["seed"] = seed;
  return j;
}

namespace {

std::uint8_t class_from_json(const Json& v, const ClassTable& table) {
  if (v.is_string()) {
    auto id = table.id_of(v.get<std::string>());
    if (!id) {
      throw ValidationError("augmentation plan: unknown class name \"" +
                            v.get<std::string>() + "\"");
    }
    return *id;
  }
  int id = v.get<int>();
  if (id < 0 || id > 255 || !table.contains(static_cast<std::uint8_t>(id))) {
    throw ValidationError("augmentation plan: unknown class id " +
                          std::to_string(id));
  }
  return static_cast<std::uint8_t>(id);
}

}  // namespace

AugmentationPlan AugmentationPlan::from_json(const Json& j, const ClassTable& table) {
  AugmentationPlan plan;
  std::string name = require_key(j, "strategy", "augmentation plan").get<std::string>();
  if (name == "single_label") {
    plan.strategy = SingleLabelStrategy{
        class_from_json(require_key(j, "class", "augmentation plan"), table)};
  } else if (name == "multi_label") {
    MultiLabelStrategy m;
    for (const auto& c : require_key(j, "classes", "augmentation plan")) {
      m.classes.push_back(class_from_json(c, table));
    }
    plan.strategy = std::move(m);
  } else if (name == "reconstruction") {
    ReconstructionStrategy r;
    r.layout = j.contains("layout") ? BasicLayout::from_json(j.at("layout"))
                                    : BasicLayout::defaults_for(table);
    r.labels_per_image = j.value("labels_per_image", std::size_t{3});
    if (j.contains("z_order")) {
      for (const auto& c : j.at("z_order")) {
        r.z_order.push_back(class_from_json(c, table));
      }
    }
    if (j.contains("class_weights")) {
      std::map<std::uint8_t, double> w;
      for (const auto& [key, value] : j.at("class_weights").items()) {
        w[static_cast<std::uint8_t>(std::stoi(key))] = value.get<double>();
      }
      r.class_weights = std::move(w);
    }
    plan.strategy = std::move(r);
  } else {
    throw ValidationError("augmentation plan: unknown strategy \"" + name + "\"");
  }
  plan.count = require_key(j, "count", "augmentation plan").get<std::size_t>();
  plan.seed = j.value("seed", std::uint64_t{0});
  if (plan.count < 1) {
    throw ValidationError("augmentation plan: count must be >= 1");
  }
  return plan;
}

std::vector<SyntheticRecord> run_plan(const AugmentationPlan& plan,
                                      std::span<const SourceMap> dataset,
                                      const MaskLibrary& library,
                                      const ClassTable& table, int width,
                                      int height) {
  plan.validate(library);
  if (const auto* s = std::get_if<SingleLabelStrategy>(&plan.strategy)) {
    return augment_single_label(dataset, library, s->class_id, plan.count,
                                plan.seed);
  }
  if (const auto* m = std::get_if<MultiLabelStrategy>(&plan.strategy)) {
    return augment_multi_label(dataset, library, m->classes, plan.count,
                               plan.seed);
  }
  const auto& r = std::get<ReconstructionStrategy>(plan.strategy);
  std::vector<std::uint8_t> z =
      r.z_order.empty() ? default_z_order(table) : r.z_order;
  return reconstruct_many(library, r.layout, r.labels_per_image, z, width,
                          height, plan.count, plan.seed, r.class_weights);
}

}  // namespace segaug
