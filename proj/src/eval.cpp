#include "segaug/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "segaug/errors.hpp"

namespace segaug {

ConfusionMatrix::ConfusionMatrix(const ClassTable& table)
    : table_(table), counts_(table.size() * table.size(), 0) {}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw ValidationError("accumulate_confusion: prediction is " +
                          std::to_string(pred.width) + "x" +
                          std::to_string(pred.height) + " but ground truth is " +
                          std::to_string(gt.width) + "x" +
                          std::to_string(gt.height));
  }
  validate_labelmap(gt, table_);
  validate_labelmap(pred, table_);

  std::array<std::size_t, 256> index{};
  std::array<bool, 256> known{};
  for (const auto& e : table_.entries()) {
    index[e.id] = table_.index_of(e.id);
    known[e.id] = true;
  }

  const std::size_t k = table_.size();
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    std::uint8_t g = gt.data[i];
    if (g == table_.ignore_id()) {
      ++ignored_pixels_;
      continue;
    }
    std::uint8_t p = pred.data[i];
    if (!known[p]) {
      // A prediction of the ignore id over valid ground truth has no row to
      // land in; the model contract forbids it.
      throw ValidationError(
          "accumulate_confusion: prediction contains non-class id " +
          std::to_string(p));
    }
    ++counts_[index[g] * k + index[p]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.table_ != table_) {
    throw ValidationError("confusion matrix merge: class tables differ");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  ignored_pixels_ += other.ignored_pixels_;
}

std::uint64_t ConfusionMatrix::at(std::size_t gt_index,
                                  std::size_t pred_index) const {
  return counts_[gt_index * table_.size() + pred_index];
}

std::uint64_t& ConfusionMatrix::at(std::size_t gt_index, std::size_t pred_index) {
  return counts_[gt_index * table_.size() + pred_index];
}

std::uint64_t ConfusionMatrix::total_counted() const {
  std::uint64_t total = 0;
  for (auto c : counts_) total += c;
  return total;
}

std::optional<double> IoUReport::iou_of(std::uint8_t id) const {
  for (const auto& c : classes) {
    if (c.id == id) return c.iou;
  }
  throw ValidationError("iou report: no class with id " + std::to_string(id));
}

Json IoUReport::to_json() const {
  Json j;
  Json cs = Json::array();
  for (const auto& c : classes) {
    Json e{{"id", c.id}, {"name", c.name}};
    if (c.iou) {
      e["iou"] = *c.iou;
    } else {
      e["iou"] = nullptr;
    }
    cs.push_back(std::move(e));
  }
  j["classes"] = std::move(cs);
  if (mean_iou) {
    j["mean_iou"] = *mean_iou;
  } else {
    j["mean_iou"] = nullptr;
  }
  j["overall_accuracy"] = overall_accuracy;
  return j;
}

IoUReport IoUReport::from_json(const Json& j) {
  IoUReport r;
  double max_value = 0.0;
  if (j.contains("classes")) {
    for (const auto& c : j.at("classes")) {
      ClassIoU ci;
      ci.id = static_cast<std::uint8_t>(require_key(c, "id", "iou class").get<int>());
      ci.name = c.value("name", "");
      if (c.contains("iou") && !c.at("iou").is_null()) {
        ci.iou = c.at("iou").get<double>();
        max_value = std::max(max_value, *ci.iou);
      }
      r.classes.push_back(std::move(ci));
    }
  }
  if (j.contains("mean_iou") && !j.at("mean_iou").is_null()) {
    r.mean_iou = j.at("mean_iou").get<double>();
    max_value = std::max(max_value, *r.mean_iou);
  }
  r.overall_accuracy = j.value("overall_accuracy", 0.0);
  // Paper tables are percentages; normalize so both conventions ingest.
  if (max_value > 1.0) {
    for (auto& c : r.classes) {
      if (c.iou) *c.iou /= 100.0;
    }
    if (r.mean_iou) *r.mean_iou /= 100.0;
  }
  return r;
}

IoUReport iou_report(const ConfusionMatrix& matrix) {
  const auto& table = matrix.table();
  const std::size_t k = table.size();

  std::vector<std::uint64_t> gt_sum(k, 0), pred_sum(k, 0);
  std::uint64_t trace = 0, total = 0;
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t p = 0; p < k; ++p) {
      std::uint64_t c = matrix.at(g, p);
      gt_sum[g] += c;
      pred_sum[p] += c;
      total += c;
      if (g == p) trace += c;
    }
  }

  IoUReport report;
  double iou_sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t i = 0; i < k; ++i) {
    ClassIoU c;
    c.id = table.entries()[i].id;
    c.name = table.entries()[i].name;
    const std::uint64_t tp = matrix.at(i, i);
    const std::uint64_t denom = gt_sum[i] + pred_sum[i] - tp;  // TP+FP+FN
    if (denom > 0) {
      c.iou = double(tp) / double(denom);
      iou_sum += *c.iou;
      ++defined;
    }
    report.classes.push_back(std::move(c));
  }
  if (defined > 0) report.mean_iou = iou_sum / double(defined);
  report.overall_accuracy = total > 0 ? double(trace) / double(total) : 0.0;
  return report;
}

ComparisonTable compare_reports(const IoUReport& baseline,
                                std::span<const IoUReport> candidates,
                                std::span<const std::string> labels) {
  if (labels.size() != candidates.size() + 1) {
    throw ValidationError(
        "compare_reports: need one label per method (baseline first)");
  }
  for (const auto& cand : candidates) {
    if (cand.classes.size() != baseline.classes.size()) {
      throw ValidationError("compare_reports: class sets differ");
    }
    for (std::size_t i = 0; i < cand.classes.size(); ++i) {
      if (cand.classes[i].id != baseline.classes[i].id) {
        throw ValidationError("compare_reports: class sets differ");
      }
    }
  }

  ComparisonTable table;
  table.methods.assign(labels.begin(), labels.end());

  for (std::size_t i = 0; i < baseline.classes.size(); ++i) {
    ComparisonRow row;
    row.name = baseline.classes[i].name.empty()
                   ? "class " + std::to_string(baseline.classes[i].id)
                   : baseline.classes[i].name;
    row.cells.push_back({baseline.classes[i].iou, std::nullopt});
    for (const auto& cand : candidates) {
      ComparisonCell cell;
      cell.value = cand.classes[i].iou;
      if (cell.value && baseline.classes[i].iou) {
        cell.delta = *cell.value - *baseline.classes[i].iou;
      }
      row.cells.push_back(std::move(cell));
    }
    table.class_rows.push_back(std::move(row));
  }

  table.mean_row.name = "mIoU";
  table.mean_row.cells.push_back({baseline.mean_iou, std::nullopt});
  for (const auto& cand : candidates) {
    ComparisonCell cell;
    cell.value = cand.mean_iou;
    if (cell.value && baseline.mean_iou) {
      cell.delta = *cell.value - *baseline.mean_iou;
    }
    table.mean_row.cells.push_back(std::move(cell));
  }
  return table;
}

namespace {

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

// Paper-style delta: two decimals with trailing zeros dropped ("+2.1").
std::string format_delta(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f", fraction * 100.0);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

std::string format_cell(const ComparisonCell& cell) {
  if (!cell.value) return "-";
  std::string s = format_percent(*cell.value);
  if (cell.delta) s += "/" + format_delta(*cell.delta);
  return s;
}

}  // namespace

std::string render_comparison_text(const ComparisonTable& table) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Method"};
  header.insert(header.end(), table.methods.begin(), table.methods.end());
  rows.push_back(header);
  for (const auto& row : table.class_rows) {
    std::vector<std::string> r{row.name};
    for (const auto& cell : row.cells) r.push_back(format_cell(cell));
    rows.push_back(std::move(r));
  }
  {
    std::vector<std::string> r{table.mean_row.name};
    for (const auto& cell : table.mean_row.cells) r.push_back(format_cell(cell));
    rows.push_back(std::move(r));
  }

  std::vector<std::size_t> widths(rows[0].size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      widths[i] = std::max(widths[i], row[i].size());
    }
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      out << (i == 0 ? "" : "  ");
      out << rows[r][i];
      out << std::string(widths[i] - rows[r][i].size(), ' ');
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

std::string render_comparison_csv(const ComparisonTable& table) {
  std::ostringstream out;
  out << "row";
  for (const auto& m : table.methods) {
    out << ',' << m << ',' << m << "_delta";
  }
  out << '\n';
  auto emit = [&](const ComparisonRow& row) {
    out << row.name;
    for (const auto& cell : row.cells) {
      out << ',';
      if (cell.value) out << format_percent(*cell.value);
      out << ',';
      if (cell.delta) out << format_delta(*cell.delta);
    }
    out << '\n';
  };
  for (const auto& row : table.class_rows) emit(row);
  emit(table.mean_row);
  return out.str();
}

Json render_comparison_json(const ComparisonTable& table) {
  Json j;
  j["methods"] = table.methods;
  auto row_json = [](const ComparisonRow& row) {
    Json cells = Json::array();
    for (const auto& cell : row.cells) {
      Json c = Json::object();
      c["value"] = cell.value ? Json(*cell.value) : Json(nullptr);
      c["delta"] = cell.delta ? Json(*cell.delta) : Json(nullptr);
      cells.push_back(std::move(c));
    }
    return Json{{"name", row.name}, {"cells", std::move(cells)}};
  };
  Json rows = Json::array();
  for (const auto& row : table.class_rows) rows.push_back(row_json(row));
  j["classes"] = std::move(rows);
  j["mean"] = row_json(table.mean_row);
  return j;
}

}  // namespace segaug
