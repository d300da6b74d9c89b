#include "segaug/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "segaug/errors.hpp"
#include "segaug/rng.hpp"

namespace segaug {

FeatureVec pixel_features(const RenderedImage& image, int x, int y) {
  const std::uint8_t* p = image.px(x, y);
  return {double(p[0]) / 255.0,
          double(p[1]) / 255.0,
          double(p[2]) / 255.0,
          (double(x) + 0.5) / double(image.width),
          (double(y) + 0.5) / double(image.height),
          1.0};
}

SoftmaxModel SoftmaxModel::zeros(const ClassTable& table) {
  SoftmaxModel m;
  for (const auto& e : table.entries()) m.class_ids.push_back(e.id);
  m.weights.assign(m.class_ids.size() * kFeatureDim, 0.0);
  m.table_hash = table.content_hash();
  return m;
}

Json SoftmaxModel::to_json() const {
  return Json{{"format", "segaug-softmax"},
              {"class_ids", class_ids},
              {"table_hash", table_hash},
              {"weights", weights}};
}

SoftmaxModel SoftmaxModel::from_json(const Json& j) {
  SoftmaxModel m;
  m.class_ids =
      require_key(j, "class_ids", "model").get<std::vector<std::uint8_t>>();
  m.table_hash = require_key(j, "table_hash", "model").get<std::uint64_t>();
  m.weights = require_key(j, "weights", "model").get<std::vector<double>>();
  if (m.class_ids.empty() ||
      m.weights.size() != m.class_ids.size() * kFeatureDim) {
    throw ValidationError("model: weight matrix shape mismatch");
  }
  for (double w : m.weights) {
    if (!std::isfinite(w)) {
      throw ValidationError("model: non-finite weight");
    }
  }
  return m;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw ValidationError("train config: learning_rate must be > 0");
  }
  if (epochs < 1) {
    throw ValidationError("train config: epochs must be >= 1");
  }
  if (batch < 1) {
    throw ValidationError("train config: batch must be >= 1");
  }
  if (l2 < 0.0) {
    throw ValidationError("train config: l2 must be >= 0");
  }
  if (!(pixel_subsample > 0.0 && pixel_subsample <= 1.0)) {
    throw ValidationError("train config: pixel_subsample must be in (0, 1]");
  }
}

Json TrainConfig::to_json() const {
  return Json{{"learning_rate", learning_rate}, {"epochs", epochs},
              {"batch", batch},                 {"l2", l2},
              {"seed", seed},                   {"pixel_subsample", pixel_subsample}};
}

TrainConfig TrainConfig::from_json(const Json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.l2 = j.value("l2", c.l2);
  c.seed = j.value("seed", c.seed);
  c.pixel_subsample = j.value("pixel_subsample", c.pixel_subsample);
  c.validate();
  return c;
}

std::pair<double, std::vector<double>> loss_and_grad(
    const SoftmaxModel& model, std::span<const TrainSample> batch, double l2) {
  if (batch.empty()) {
    throw ValidationError("loss_and_grad: empty batch");
  }
  const std::size_t k = model.num_classes();
  std::vector<double> grad(model.weights.size(), 0.0);
  std::vector<double> scores(k), probs(k);
  double loss = 0.0;
  const double inv_batch = 1.0 / double(batch.size());

  for (const auto& sample : batch) {
    if (sample.class_index >= k) {
      throw ValidationError("loss_and_grad: class index out of range");
    }
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double* w = model.row(c);
      double s = 0.0;
      for (int f = 0; f < kFeatureDim; ++f) s += w[f] * sample.x[f];
      scores[c] = s;
      max_score = std::max(max_score, s);
    }
    double sum_exp = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      probs[c] = std::exp(scores[c] - max_score);
      sum_exp += probs[c];
    }
    for (std::size_t c = 0; c < k; ++c) probs[c] /= sum_exp;

    loss -= std::log(probs[sample.class_index]);
    for (std::size_t c = 0; c < k; ++c) {
      double coeff = (probs[c] - (c == sample.class_index ? 1.0 : 0.0)) * inv_batch;
      double* g = grad.data() + c * kFeatureDim;
      for (int f = 0; f < kFeatureDim; ++f) g[f] += coeff * sample.x[f];
    }
  }

  loss *= inv_batch;
  double sq = 0.0;
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    sq += model.weights[i] * model.weights[i];
    grad[i] += l2 * model.weights[i];
  }
  loss += 0.5 * l2 * sq;

  if (!std::isfinite(loss)) {
    throw ValidationError("loss_and_grad: non-finite loss");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw ValidationError("loss_and_grad: non-finite gradient");
    }
  }
  return {loss, std::move(grad)};
}

double finite_diff_check(const SoftmaxModel& model,
                         std::span<const TrainSample> batch, double l2,
                         double epsilon) {
  if (!(epsilon > 0.0)) {
    throw ValidationError("finite_diff_check: epsilon must be > 0");
  }
  auto [loss, grad] = loss_and_grad(model, batch, l2);
  (void)loss;

  double max_err = 0.0;
  SoftmaxModel probe = model;
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    probe.weights[i] = model.weights[i] + epsilon;
    double plus = loss_and_grad(probe, batch, l2).first;
    probe.weights[i] = model.weights[i] - epsilon;
    double minus = loss_and_grad(probe, batch, l2).first;
    probe.weights[i] = model.weights[i];

    double numeric = (plus - minus) / (2.0 * epsilon);
    double denom = std::max(1e-12, std::abs(grad[i]) + std::abs(numeric));
    max_err = std::max(max_err, std::abs(grad[i] - numeric) / denom);
  }
  return max_err;
}

std::string TrainResult::trace_csv() const {
  std::ostringstream out;
  out << "phase,epoch,loss\n";
  char buf[64];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", e.phase, e.epoch, e.loss);
    out << buf;
  }
  return out.str();
}

namespace {

struct PhasePool {
  // One element per manifest entry occurrence, pointing at the shared pair
  // and that pair's valid (non-ignore) pixel list.
  struct EntryRef {
    const SamplePair* pair;
    const std::vector<std::uint32_t>* valid;
    std::uint64_t offset;  // first global sample index of this entry
  };
  std::vector<EntryRef> entries;
  std::uint64_t total = 0;
};

}  // namespace

TrainResult train(const TrainingSchedule& schedule, const PairLoader& loader,
                  const ClassTable& table, const TrainConfig& config) {
  config.validate();

  std::array<std::uint32_t, 256> class_index{};
  for (const auto& e : table.entries()) {
    class_index[e.id] = std::uint32_t(table.index_of(e.id));
  }

  // Valid-pixel lists are shared between repeated entries of the same pair.
  std::map<const LabelMap*, std::vector<std::uint32_t>> valid_cache;
  auto valid_pixels_of = [&](const SamplePair& pair)
      -> const std::vector<std::uint32_t>& {
    auto it = valid_cache.find(&pair.labels);
    if (it != valid_cache.end()) return it->second;
    if (pair.image.width != pair.labels.width ||
        pair.image.height != pair.labels.height) {
      throw ValidationError("train: image/label dimension mismatch");
    }
    validate_labelmap(pair.labels, table);
    std::vector<std::uint32_t> valid;
    for (std::uint32_t i = 0; i < pair.labels.data.size(); ++i) {
      if (pair.labels.data[i] != table.ignore_id()) valid.push_back(i);
    }
    return valid_cache.emplace(&pair.labels, std::move(valid)).first->second;
  };

  std::vector<PhasePool> pools;
  std::uint64_t grand_total = 0;
  for (const auto& phase : schedule.phases) {
    PhasePool pool;
    for (const auto& entry : phase) {
      const SamplePair& pair = loader(entry);
      const auto& valid = valid_pixels_of(pair);
      if (valid.empty()) continue;  // fully ignored image, no sample range
      pool.entries.push_back({&pair, &valid, pool.total});
      pool.total += valid.size();
    }
    grand_total += pool.total;
    pools.push_back(std::move(pool));
  }
  if (grand_total == 0) {
    throw ValidationError("train: every pixel is ignore-labeled, nothing to fit");
  }

  TrainResult result;
  result.model = SoftmaxModel::zeros(table);
  const std::uint64_t train_seed = derive_seed(config.seed, "train");

  std::vector<std::uint64_t> identity, order;
  std::vector<TrainSample> batch;
  batch.reserve(config.batch);

  for (std::size_t p = 0; p < pools.size(); ++p) {
    const PhasePool& pool = pools[p];
    if (pool.total == 0) continue;

    identity.resize(pool.total);
    for (std::uint64_t i = 0; i < pool.total; ++i) identity[i] = i;

    const auto n_sub = std::max<std::uint64_t>(
        1, std::uint64_t(std::llround(config.pixel_subsample * double(pool.total))));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      Rng rng(derive_seed(derive_seed(train_seed, p), std::uint64_t(epoch)));
      order = identity;
      // Partial Fisher-Yates: only the drawn prefix needs shuffling.
      for (std::uint64_t i = 0; i < n_sub && i + 1 < pool.total; ++i) {
        std::uint64_t j = i + rng.uniform_index(pool.total - i);
        std::swap(order[i], order[j]);
      }

      double loss_sum = 0.0;
      std::uint64_t seen = 0;
      std::size_t entry_hint = 0;
      for (std::uint64_t start = 0; start < n_sub; start += config.batch) {
        const std::uint64_t end = std::min<std::uint64_t>(start + config.batch, n_sub);
        batch.clear();
        for (std::uint64_t i = start; i < end; ++i) {
          const std::uint64_t g = order[i];
          // Entries are offset-sorted; binary search locates the owner.
          std::size_t lo = 0, hi = pool.entries.size() - 1;
          if (pool.entries[entry_hint].offset <= g &&
              (entry_hint + 1 == pool.entries.size() ||
               pool.entries[entry_hint + 1].offset > g)) {
            lo = hi = entry_hint;  // sequential batches often stay in one entry
          } else {
            while (lo < hi) {
              std::size_t mid = (lo + hi + 1) / 2;
              if (pool.entries[mid].offset <= g) {
                lo = mid;
              } else {
                hi = mid - 1;
              }
            }
          }
          entry_hint = lo;
          const auto& ref = pool.entries[lo];
          const std::uint32_t pixel = (*ref.valid)[g - ref.offset];
          const int x = int(pixel % std::uint32_t(ref.pair->labels.width));
          const int y = int(pixel / std::uint32_t(ref.pair->labels.width));
          TrainSample sample;
          sample.x = pixel_features(ref.pair->image, x, y);
          sample.class_index = class_index[ref.pair->labels.data[pixel]];
          batch.push_back(sample);
        }
        auto [loss, grad] = loss_and_grad(result.model, batch, config.l2);
        for (std::size_t i = 0; i < grad.size(); ++i) {
          result.model.weights[i] -= config.learning_rate * grad[i];
        }
        loss_sum += loss * double(batch.size());
        seen += batch.size();
      }
      result.trace.push_back({int(p), epoch, loss_sum / double(seen)});
    }
  }
  return result;
}

LabelMap predict(const SoftmaxModel& model, const RenderedImage& image) {
  if (image.width < 1 || image.height < 1 ||
      image.data.size() != 3 * std::size_t(image.width) * image.height) {
    throw ValidationError("predict: inconsistent image dimensions");
  }
  const std::size_t k = model.num_classes();
  LabelMap out;
  out.width = image.width;
  out.height = image.height;
  out.data.resize(std::size_t(image.width) * image.height);

  std::size_t i = 0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x, ++i) {
      FeatureVec f = pixel_features(image, x, y);
      double best_score = 0.0;
      std::uint8_t best_id = 0;
      bool first = true;
      for (std::size_t c = 0; c < k; ++c) {
        const double* w = model.row(c);
        double s = 0.0;
        for (int d = 0; d < kFeatureDim; ++d) s += w[d] * f[d];
        const std::uint8_t id = model.class_ids[c];
        if (first || s > best_score || (s == best_score && id < best_id)) {
          best_score = s;
          best_id = id;
          first = false;
        }
      }
      out.data[i] = best_id;
    }
  }
  return out;
}

}  // namespace segaug
