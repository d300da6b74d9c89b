#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "segaug/class_table.hpp"
#include "segaug/generator.hpp"
#include "segaug/json_util.hpp"
#include "segaug/labelmap.hpp"
#include "segaug/mixer.hpp"

namespace segaug {

// Per-pixel feature vector: RGB scaled to [0,1], pixel-center coordinates
// normalized to (0,1), and a bias term.
inline constexpr int kFeatureDim = 6;
using FeatureVec = std::array<double, kFeatureDim>;

FeatureVec pixel_features(const RenderedImage& image, int x, int y);

struct TrainSample {
  FeatureVec x{};
  std::uint32_t class_index = 0;  // index into the class table
};

// Per-pixel multinomial logistic classifier: K x 6 weights, argmax decision.
struct SoftmaxModel {
  std::vector<double> weights;        // K * kFeatureDim, row-major by class
  std::vector<std::uint8_t> class_ids;  // row -> class id, table order
  std::uint64_t table_hash = 0;

  std::size_t num_classes() const { return class_ids.size(); }
  double* row(std::size_t k) { return weights.data() + k * kFeatureDim; }
  const double* row(std::size_t k) const { return weights.data() + k * kFeatureDim; }

  static SoftmaxModel zeros(const ClassTable& table);

  Json to_json() const;
  static SoftmaxModel from_json(const Json& j);
};

struct TrainConfig {
  double learning_rate = 0.5;
  int epochs = 60;
  std::size_t batch = 256;
  double l2 = 1e-5;
  std::uint64_t seed = 0;
  double pixel_subsample = 0.25;  // fraction of pixels drawn per epoch

  void validate() const;
  Json to_json() const;
  static TrainConfig from_json(const Json& j);
};

// Mean softmax cross-entropy plus (l2/2)*||W||^2, with the matching gradient.
// Softmax is computed with max subtraction; a non-finite result is an error.
std::pair<double, std::vector<double>> loss_and_grad(
    const SoftmaxModel& model, std::span<const TrainSample> batch, double l2);

// Central-difference check of loss_and_grad: max over weights of
// |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
double finite_diff_check(const SoftmaxModel& model,
                         std::span<const TrainSample> batch, double l2,
                         double epsilon);

struct SamplePair {
  RenderedImage image;
  LabelMap labels;
};

// Resolves a manifest entry to its image/label pair; implementations load
// from disk or from memory.
using PairLoader = std::function<const SamplePair&(const ManifestEntry&)>;

struct EpochLoss {
  int phase = 0;
  int epoch = 0;
  double loss = 0.0;
};

struct TrainResult {
  SoftmaxModel model;
  std::vector<EpochLoss> trace;

  std::string trace_csv() const;
};

// Mini-batch gradient descent over the schedule's phases in order, weights
// carried across phases. Each epoch draws a seeded subsample of the phase's
// non-ignore pixels (epoch index folded into the seed), shuffles it, and
// steps per batch. Deterministic given (schedule, config).
TrainResult train(const TrainingSchedule& schedule, const PairLoader& loader,
                  const ClassTable& table, const TrainConfig& config);

// Per-pixel argmax of class scores; ties go to the lowest class id.
LabelMap predict(const SoftmaxModel& model, const RenderedImage& image);

}  // namespace segaug
