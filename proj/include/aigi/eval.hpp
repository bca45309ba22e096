#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aigi/classifier.hpp"
#include "aigi/registry.hpp"

namespace aigi {

/// K x K counts; rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {}
  /// Row-major counts; throws a shape error when not K*K.
  ConfusionMatrix(std::size_t classes, std::vector<long> counts);

  std::size_t classes() const noexcept { return k_; }
  long& at(std::size_t truth, std::size_t predicted) { return counts_.at(truth * k_ + predicted); }
  long at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * k_ + predicted); }
  const std::vector<long>& counts() const noexcept { return counts_; }

  long row_total(std::size_t truth) const;
  long column_total(std::size_t predicted) const;
  long total() const;
  long trace() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<long> counts_;
};

ConfusionMatrix build_confusion(std::span<const int> truths, std::span<const int> predictions, std::size_t classes);

/// A metric value; nullopt marks an undefined ratio (zero denominator).
using Metric = std::optional<double>;

struct ClassMetrics {
  std::vector<Metric> precision;
  std::vector<Metric> recall;
  std::vector<Metric> f1;
};

ClassMetrics per_class_metrics(const ConfusionMatrix& matrix);

/// Diagonal over row totals; undefined for classes with no examples.
std::vector<Metric> accuracy_by_class(const ConfusionMatrix& matrix);

/// Real/fake view of a multi-class matrix. Index 0 = real, 1 = fake; fake is
/// the positive class for precision and recall.
struct BinaryRollup {
  long counts[2][2] = {{0, 0}, {0, 0}};
  Metric accuracy;
  Metric precision;    // fake
  Metric recall;       // fake
  Metric real_recall;  // specificity
};

BinaryRollup binary_rollup(const ConfusionMatrix& matrix, const Registry& registry);

/// Per ground-truth class: how many images got the right real/fake verdict.
struct DetectionCounts {
  std::vector<long> totals;
  std::vector<long> correct;
  std::vector<Metric> accuracy;
};

DetectionCounts detection_by_class(std::span<const int> truths, std::span<const Verdict> verdicts,
                                   const Registry& registry);
/// Same, read off a confusion matrix (a prediction is correct when its class
/// has the truth's real/fake family).
DetectionCounts detection_by_class(const ConfusionMatrix& matrix, const Registry& registry);

/// Evaluation of one method. Verdict-only methods (e.g. a DIRE threshold) have
/// no confusion matrix and no multi-class metrics.
struct EvalReport {
  std::string method;
  std::vector<std::string> class_names;  // registry abbreviations, in order
  std::optional<ConfusionMatrix> confusion;
  std::optional<ClassMetrics> metrics;
  std::vector<Metric> per_class_accuracy;
  std::vector<long> correct_counts;
  std::vector<long> totals;
  Metric overall_accuracy;
  DetectionCounts detection;
  Metric binary_accuracy;
};

EvalReport make_report(std::string method, const ConfusionMatrix& matrix, const Registry& registry);
EvalReport make_verdict_report(std::string method, std::span<const int> truths, std::span<const Verdict> verdicts,
                               const Registry& registry);

enum class ReportFormat { Csv, Markdown };
ReportFormat report_format_from_string(std::string_view text);

/// Deterministic rendering. CSV columns are fixed:
///   method,record,class,predicted,value
/// with one row per number at full precision and "n/a" for undefined values.
/// Markdown rounds to three decimals and lays several methods side by side.
std::string render_report(std::span<const EvalReport> reports, ReportFormat format);
std::string render_report(const EvalReport& report, ReportFormat format);

/// Inverse of the CSV rendering.
std::vector<EvalReport> parse_report_csv(std::string_view text);

}  // namespace aigi

#include "aigi/data.hpp"

namespace aigi {

/// Joins a prediction file to ground truth by path. Files with a `predicted`
/// column give a full multi-class report; verdict-only files give detection
/// counts. Paths absent from the manifest or unknown class abbreviations are
/// data errors.
EvalReport evaluate_predictions(const PredictionFile& predictions, const DatasetManifest& truth,
                                const Registry& registry, std::string method);

}  // namespace aigi
