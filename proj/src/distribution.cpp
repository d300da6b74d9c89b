#include "segaug/distribution.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "segaug/errors.hpp"

namespace segaug {

const ClassFrequency& FrequencyReport::for_class(std::uint8_t id) const {
  for (const auto& c : classes) {
    if (c.id == id) return c;
  }
  throw ValidationError("frequency report: no class with id " +
                        std::to_string(id));
}

Json FrequencyReport::to_json() const {
  Json j;
  j["dataset_size"] = dataset_size;
  Json cs = Json::array();
  for (const auto& c : classes) {
    cs.push_back({{"id", c.id},
                  {"name", c.name},
                  {"appearance_frequency", c.appearance_frequency},
                  {"pixel_share", c.pixel_share},
                  {"image_count", c.image_count},
                  {"pixel_count", c.pixel_count}});
  }
  j["classes"] = std::move(cs);
  return j;
}

FrequencyReport FrequencyReport::from_json(const Json& j) {
  FrequencyReport r;
  r.dataset_size = require_key(j, "dataset_size", "frequency report").get<std::uint64_t>();
  for (const auto& c : require_key(j, "classes", "frequency report")) {
    ClassFrequency f;
    f.id = static_cast<std::uint8_t>(require_key(c, "id", "frequency class").get<int>());
    f.name = require_key(c, "name", "frequency class").get<std::string>();
    f.appearance_frequency =
        require_key(c, "appearance_frequency", "frequency class").get<double>();
    f.pixel_share = require_key(c, "pixel_share", "frequency class").get<double>();
    f.image_count = c.value("image_count", std::uint64_t{0});
    f.pixel_count = c.value("pixel_count", std::uint64_t{0});
    r.classes.push_back(std::move(f));
  }
  return r;
}

FrequencyReport appearance_frequency(std::span<const LabelMap> maps,
                                     const ClassTable& table) {
  if (maps.empty()) {
    throw ValidationError("appearance_frequency: empty dataset");
  }

  std::array<std::uint64_t, 256> image_counts{};
  std::array<std::uint64_t, 256> pixel_counts{};
  std::uint64_t total_pixels = 0;

  for (const auto& map : maps) {
    validate_labelmap(map, table);
    std::array<bool, 256> seen{};
    for (std::uint8_t v : map.data) {
      if (v == table.ignore_id()) continue;
      seen[v] = true;
      ++pixel_counts[v];
      ++total_pixels;
    }
    for (const auto& e : table.entries()) {
      if (seen[e.id]) ++image_counts[e.id];
    }
  }

  FrequencyReport report;
  report.dataset_size = maps.size();
  for (const auto& e : table.entries()) {
    ClassFrequency f;
    f.id = e.id;
    f.name = e.name;
    f.image_count = image_counts[e.id];
    f.pixel_count = pixel_counts[e.id];
    f.appearance_frequency =
        static_cast<double>(f.image_count) / static_cast<double>(maps.size());
    f.pixel_share = total_pixels == 0
                        ? 0.0
                        : static_cast<double>(f.pixel_count) /
                              static_cast<double>(total_pixels);
    report.classes.push_back(std::move(f));
  }
  return report;
}

Json CorrelationReport::to_json() const {
  Json j;
  j["pearson"] = pearson;
  j["spearman"] = spearman;
  Json ps = Json::array();
  for (const auto& p : pairs) {
    ps.push_back({{"id", p.id}, {"frequency", p.frequency}, {"accuracy", p.accuracy}});
  }
  j["pairs"] = std::move(ps);
  return j;
}

namespace {

double pearson_of(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw ValidationError(
        "rank_correlation: zero variance, correlation undefined");
  }
  return sxy / std::sqrt(sxx * syy);
}

// Average ranks (1-based), ties share the mean of their rank range.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double mean_rank = (double(i + 1) + double(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

CorrelationReport rank_correlation(
    const FrequencyReport& freq, const std::map<std::uint8_t, double>& accuracy) {
  CorrelationReport report;
  std::vector<double> xs, ys;
  for (const auto& c : freq.classes) {
    auto it = accuracy.find(c.id);
    if (it == accuracy.end()) continue;
    report.pairs.push_back({c.id, c.appearance_frequency, it->second});
    xs.push_back(c.appearance_frequency);
    ys.push_back(it->second);
  }
  if (xs.size() < 2) {
    throw ValidationError(
        "rank_correlation: need at least 2 paired classes, got " +
        std::to_string(xs.size()));
  }
  report.pearson = pearson_of(xs, ys);
  report.spearman = pearson_of(average_ranks(xs), average_ranks(ys));
  return report;
}

namespace {

std::vector<std::uint8_t> sorted_by_frequency(const FrequencyReport& freq) {
  std::vector<const ClassFrequency*> cs;
  for (const auto& c : freq.classes) cs.push_back(&c);
  std::sort(cs.begin(), cs.end(), [](const ClassFrequency* a, const ClassFrequency* b) {
    if (a->appearance_frequency != b->appearance_frequency) {
      return a->appearance_frequency < b->appearance_frequency;
    }
    return a->id < b->id;
  });
  std::vector<std::uint8_t> ids;
  for (const auto* c : cs) ids.push_back(c->id);
  return ids;
}

}  // namespace

std::vector<std::uint8_t> select_target_classes(const FrequencyReport& freq,
                                                CountK k) {
  if (k.value < 1) {
    throw ValidationError("select_target_classes: k must be >= 1");
  }
  auto ids = sorted_by_frequency(freq);
  if (k.value < ids.size()) ids.resize(k.value);
  return ids;
}

std::vector<std::uint8_t> select_target_classes(const FrequencyReport& freq,
                                                Threshold threshold) {
  if (!(threshold.value > 0.0 && threshold.value < 1.0)) {
    throw ValidationError("select_target_classes: threshold must be in (0,1)");
  }
  auto ids = sorted_by_frequency(freq);
  std::vector<std::uint8_t> out;
  for (std::uint8_t id : ids) {
    if (freq.for_class(id).appearance_frequency < threshold.value) {
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace segaug
