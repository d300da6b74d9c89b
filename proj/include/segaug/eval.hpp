#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segaug/class_table.hpp"
#include "segaug/json_util.hpp"
#include "segaug/labelmap.hpp"

namespace segaug {

// K x K counts indexed (ground truth, prediction) in table order. Matrices
// over the same table merge by element-wise addition, so per-image counts
// can be accumulated in any order.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(const ClassTable& table);

  // Counts every pixel with gt != ignore; gt-ignore pixels are tallied
  // separately. Prediction values must be table classes.
  void accumulate(const LabelMap& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);

  std::uint64_t at(std::size_t gt_index, std::size_t pred_index) const;
  std::uint64_t& at(std::size_t gt_index, std::size_t pred_index);
  std::uint64_t ignored_pixels() const { return ignored_pixels_; }
  std::uint64_t total_counted() const;
  const ClassTable& table() const { return table_; }

 private:
  ClassTable table_;
  std::vector<std::uint64_t> counts_;  // K*K, row = gt
  std::uint64_t ignored_pixels_ = 0;
};

struct ClassIoU {
  std::uint8_t id = 0;
  std::string name;
  // Absent when the class never occurs in gt or prediction.
  std::optional<double> iou;
};

struct IoUReport {
  std::vector<ClassIoU> classes;  // table order
  std::optional<double> mean_iou;  // over defined classes only
  double overall_accuracy = 0.0;   // bonus field: trace / total

  std::optional<double> iou_of(std::uint8_t id) const;

  Json to_json() const;
  // Accepts fractions in [0,1]; values above 1 are treated as percentages
  // and divided by 100 (so paper-style tables can be ingested directly).
  static IoUReport from_json(const Json& j);
};

// IoU_c = TP / (TP + FP + FN) from the confusion matrix; zero denominator
// means the class is absent and excluded from the mean.
IoUReport iou_report(const ConfusionMatrix& matrix);

// Per-class and mean deltas of each candidate against the baseline, in the
// paper's "value/+delta" table convention.
struct ComparisonCell {
  std::optional<double> value;  // fraction
  std::optional<double> delta;  // candidate - baseline; baseline column: none
};

struct ComparisonRow {
  std::string name;
  std::vector<ComparisonCell> cells;  // one per method
};

struct ComparisonTable {
  std::vector<std::string> methods;  // baseline label first
  std::vector<ComparisonRow> class_rows;
  ComparisonRow mean_row;
};

// labels.size() must equal candidates.size() + 1 (baseline label first);
// all reports must cover the same class set.
ComparisonTable compare_reports(const IoUReport& baseline,
                                std::span<const IoUReport> candidates,
                                std::span<const std::string> labels);

// "79.41/+2.1"-style rendering; values are percentages with 2 decimals,
// deltas drop trailing zeros like the paper's tables.
std::string render_comparison_text(const ComparisonTable& table);
std::string render_comparison_csv(const ComparisonTable& table);
Json render_comparison_json(const ComparisonTable& table);

}  // namespace segaug
