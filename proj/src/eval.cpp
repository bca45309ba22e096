#include "aigi/eval.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "aigi/common.hpp"

namespace aigi {

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<long> counts)
    : k_(classes), counts_(std::move(counts)) {
  if (counts_.size() != k_ * k_)
    fail(ErrorKind::Shape, "confusion matrix needs " + std::to_string(k_ * k_) + " counts, got " +
                               std::to_string(counts_.size()));
  for (long c : counts_)
    if (c < 0) fail(ErrorKind::InvalidArgument, "confusion counts must be non-negative");
}

long ConfusionMatrix::row_total(std::size_t truth) const {
  long s = 0;
  for (std::size_t p = 0; p < k_; ++p) s += at(truth, p);
  return s;
}

long ConfusionMatrix::column_total(std::size_t predicted) const {
  long s = 0;
  for (std::size_t t = 0; t < k_; ++t) s += at(t, predicted);
  return s;
}

long ConfusionMatrix::total() const {
  long s = 0;
  for (long c : counts_) s += c;
  return s;
}

long ConfusionMatrix::trace() const {
  long s = 0;
  for (std::size_t k = 0; k < k_; ++k) s += at(k, k);
  return s;
}

ConfusionMatrix build_confusion(std::span<const int> truths, std::span<const int> predictions, std::size_t classes) {
  if (truths.size() != predictions.size())
    fail(ErrorKind::Shape, "truth and prediction lists differ in length (" + std::to_string(truths.size()) + " vs " +
                               std::to_string(predictions.size()) + ")");
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    for (int id : {truths[i], predictions[i]})
      if (id < 0 || static_cast<std::size_t>(id) >= classes)
        fail(ErrorKind::Lookup, "class id " + std::to_string(id) + " out of range at position " + std::to_string(i));
    ++m.at(static_cast<std::size_t>(truths[i]), static_cast<std::size_t>(predictions[i]));
  }
  return m;
}

namespace {

Metric ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

Metric harmonic(const Metric& p, const Metric& r) {
  if (!p || !r) return std::nullopt;
  if (*p + *r == 0.0) return 0.0;
  return 2.0 * *p * *r / (*p + *r);
}

}  // namespace

ClassMetrics per_class_metrics(const ConfusionMatrix& m) {
  ClassMetrics out;
  for (std::size_t k = 0; k < m.classes(); ++k) {
    out.precision.push_back(ratio(m.at(k, k), m.column_total(k)));
    out.recall.push_back(ratio(m.at(k, k), m.row_total(k)));
    out.f1.push_back(harmonic(out.precision.back(), out.recall.back()));
  }
  return out;
}

std::vector<Metric> accuracy_by_class(const ConfusionMatrix& m) {
  std::vector<Metric> out;
  for (std::size_t k = 0; k < m.classes(); ++k) out.push_back(ratio(m.at(k, k), m.row_total(k)));
  return out;
}

BinaryRollup binary_rollup(const ConfusionMatrix& m, const Registry& registry) {
  if (m.classes() != registry.size()) fail(ErrorKind::Shape, "confusion matrix and registry sizes differ");
  BinaryRollup b;
  for (std::size_t t = 0; t < m.classes(); ++t)
    for (std::size_t p = 0; p < m.classes(); ++p)
      b.counts[registry.is_fake(static_cast<int>(t))][registry.is_fake(static_cast<int>(p))] += m.at(t, p);
  const long tn = b.counts[0][0], fp = b.counts[0][1], fn = b.counts[1][0], tp = b.counts[1][1];
  b.accuracy = ratio(tn + tp, tn + fp + fn + tp);
  b.precision = ratio(tp, tp + fp);
  b.recall = ratio(tp, tp + fn);
  b.real_recall = ratio(tn, tn + fp);
  return b;
}

DetectionCounts detection_by_class(std::span<const int> truths, std::span<const Verdict> verdicts,
                                   const Registry& registry) {
  if (truths.size() != verdicts.size()) fail(ErrorKind::Shape, "truth and verdict lists differ in length");
  DetectionCounts d;
  d.totals.assign(registry.size(), 0);
  d.correct.assign(registry.size(), 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const auto& cls = registry.at(truths[i]);
    ++d.totals[static_cast<std::size_t>(cls.class_id)];
    if ((verdicts[i] == Verdict::Fake) == registry.is_fake(cls.class_id)) ++d.correct[static_cast<std::size_t>(cls.class_id)];
  }
  for (std::size_t k = 0; k < registry.size(); ++k) d.accuracy.push_back(ratio(d.correct[k], d.totals[k]));
  return d;
}

DetectionCounts detection_by_class(const ConfusionMatrix& m, const Registry& registry) {
  if (m.classes() != registry.size()) fail(ErrorKind::Shape, "confusion matrix and registry sizes differ");
  DetectionCounts d;
  for (std::size_t t = 0; t < m.classes(); ++t) {
    long correct = 0;
    for (std::size_t p = 0; p < m.classes(); ++p)
      if (registry.is_fake(static_cast<int>(t)) == registry.is_fake(static_cast<int>(p))) correct += m.at(t, p);
    d.totals.push_back(m.row_total(t));
    d.correct.push_back(correct);
    d.accuracy.push_back(ratio(correct, d.totals.back()));
  }
  return d;
}

EvalReport make_report(std::string method, const ConfusionMatrix& matrix, const Registry& registry) {
  if (matrix.classes() != registry.size()) fail(ErrorKind::Shape, "confusion matrix and registry sizes differ");
  EvalReport r;
  r.method = std::move(method);
  for (const auto& c : registry.classes()) r.class_names.push_back(c.abbreviation);
  r.confusion = matrix;
  r.metrics = per_class_metrics(matrix);
  r.per_class_accuracy = accuracy_by_class(matrix);
  for (std::size_t k = 0; k < matrix.classes(); ++k) {
    r.correct_counts.push_back(matrix.at(k, k));
    r.totals.push_back(matrix.row_total(k));
  }
  r.overall_accuracy = ratio(matrix.trace(), matrix.total());
  r.detection = detection_by_class(matrix, registry);
  r.binary_accuracy = binary_rollup(matrix, registry).accuracy;
  return r;
}

EvalReport make_verdict_report(std::string method, std::span<const int> truths, std::span<const Verdict> verdicts,
                               const Registry& registry) {
  EvalReport r;
  r.method = std::move(method);
  for (const auto& c : registry.classes()) r.class_names.push_back(c.abbreviation);
  r.detection = detection_by_class(truths, verdicts, registry);
  r.per_class_accuracy = r.detection.accuracy;
  r.correct_counts = r.detection.correct;
  r.totals = r.detection.totals;
  long correct = 0, total = 0;
  for (std::size_t k = 0; k < registry.size(); ++k) {
    correct += r.detection.correct[k];
    total += r.detection.totals[k];
  }
  r.binary_accuracy = ratio(correct, total);
  return r;
}

ReportFormat report_format_from_string(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "markdown" || text == "md") return ReportFormat::Markdown;
  fail(ErrorKind::InvalidArgument, "unknown report format '" + std::string(text) + "' (expected csv or markdown)");
}

// ---------------------------------------------------------------- rendering

namespace {

std::string exact(const Metric& m) { return m ? format_exact(*m) : "n/a"; }

std::string rounded(const Metric& m) {
  if (!m) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *m);
  return buf;
}

void csv_row(std::string& out, const std::string& method, std::string_view record, std::string_view cls,
             std::string_view predicted, const std::string& value) {
  auto check = [](std::string_view f) {
    if (f.find_first_of(",\"\n") != std::string_view::npos)
      fail(ErrorKind::InvalidArgument, "report field contains a comma, quote or newline: '" + std::string(f) + "'");
  };
  check(method);
  check(cls);
  check(predicted);
  out += method;
  out += ',';
  out += record;
  out += ',';
  out += cls;
  out += ',';
  out += predicted;
  out += ',';
  out += value;
  out += '\n';
}

std::string render_csv(std::span<const EvalReport> reports) {
  std::string out = "method,record,class,predicted,value\n";
  for (const auto& r : reports) {
    const std::size_t k = r.class_names.size();
    for (std::size_t c = 0; c < k; ++c) {
      const auto& name = r.class_names[c];
      csv_row(out, r.method, "total", name, "", std::to_string(r.totals.at(c)));
      csv_row(out, r.method, "correct", name, "", std::to_string(r.correct_counts.at(c)));
      csv_row(out, r.method, "accuracy", name, "", exact(r.per_class_accuracy.at(c)));
      if (r.metrics) {
        csv_row(out, r.method, "precision", name, "", exact(r.metrics->precision.at(c)));
        csv_row(out, r.method, "recall", name, "", exact(r.metrics->recall.at(c)));
        csv_row(out, r.method, "f1", name, "", exact(r.metrics->f1.at(c)));
      }
      csv_row(out, r.method, "detection_total", name, "", std::to_string(r.detection.totals.at(c)));
      csv_row(out, r.method, "detection_correct", name, "", std::to_string(r.detection.correct.at(c)));
      csv_row(out, r.method, "detection_accuracy", name, "", exact(r.detection.accuracy.at(c)));
    }
    if (r.confusion)
      for (std::size_t t = 0; t < k; ++t)
        for (std::size_t p = 0; p < k; ++p)
          csv_row(out, r.method, "confusion", r.class_names[t], r.class_names[p], std::to_string(r.confusion->at(t, p)));
    csv_row(out, r.method, "overall_accuracy", "", "", exact(r.overall_accuracy));
    csv_row(out, r.method, "binary_accuracy", "", "", exact(r.binary_accuracy));
  }
  return out;
}

void md_table(std::ostringstream& out, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows) {
  out << '|';
  for (const auto& h : header) out << ' ' << h << " |";
  out << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out << (i == 0 ? ":---|" : "---:|");
  out << '\n';
  for (const auto& row : rows) {
    out << '|';
    for (const auto& f : row) out << ' ' << f << " |";
    out << '\n';
  }
  out << '\n';
}

std::string render_markdown(std::span<const EvalReport> reports) {
  std::ostringstream out;
  if (reports.empty()) return "";
  const auto& names = reports.front().class_names;
  for (const auto& r : reports)
    if (r.class_names != names) fail(ErrorKind::InvalidArgument, "reports use different class lists");

  std::vector<std::string> header{"Generation method"};
  for (const auto& r : reports) header.push_back(r.method);

  out << "## Real/fake detection accuracy by generation method\n\n";
  std::vector<std::vector<std::string>> rows;
  for (std::size_t c = 0; c < names.size(); ++c) {
    std::vector<std::string> row{names[c]};
    for (const auto& r : reports) row.push_back(rounded(r.detection.accuracy[c]));
    rows.push_back(std::move(row));
  }
  md_table(out, header, rows);

  out << "## Correct real/fake predictions\n\n";
  header.insert(header.begin() + 1, "Total images");
  rows.clear();
  for (std::size_t c = 0; c < names.size(); ++c) {
    std::vector<std::string> row{names[c], std::to_string(reports.front().detection.totals[c])};
    for (const auto& r : reports) row.push_back(std::to_string(r.detection.correct[c]));
    rows.push_back(std::move(row));
  }
  md_table(out, header, rows);

  for (const auto& r : reports) {
    if (!r.confusion || !r.metrics) continue;
    out << "## " << r.method << ": confusion matrix and metrics\n\n";
    out << "Rows are ground truth, columns are predictions.\n\n";
    std::vector<std::string> h{""};
    h.insert(h.end(), names.begin(), names.end());
    h.insert(h.end(), {"Class Precision", "Class Recall", "Class F1"});
    rows.clear();
    for (std::size_t t = 0; t < names.size(); ++t) {
      std::vector<std::string> row{names[t]};
      for (std::size_t p = 0; p < names.size(); ++p) row.push_back(std::to_string(r.confusion->at(t, p)));
      row.push_back(rounded(r.metrics->precision[t]));
      row.push_back(rounded(r.metrics->recall[t]));
      row.push_back(rounded(r.metrics->f1[t]));
      rows.push_back(std::move(row));
    }
    md_table(out, h, rows);
  }

  out << "## Summary\n\n";
  rows.clear();
  for (const auto& r : reports)
    rows.push_back({r.method, rounded(r.overall_accuracy), rounded(r.binary_accuracy)});
  md_table(out, {"Method", "Overall accuracy", "Binary accuracy"}, rows);
  return out.str();
}

}  // namespace

std::string render_report(std::span<const EvalReport> reports, ReportFormat format) {
  return format == ReportFormat::Csv ? render_csv(reports) : render_markdown(reports);
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  return render_report(std::span<const EvalReport>(&report, 1), format);
}

// ---------------------------------------------------------------- parsing

namespace {

Metric parse_metric(const std::string& text, std::size_t line) {
  if (text == "n/a") return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail(ErrorKind::Parse, "report line " + std::to_string(line) + ": bad number '" + text + "'");
  return v;
}

long parse_count(const std::string& text, std::size_t line) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail(ErrorKind::Parse, "report line " + std::to_string(line) + ": bad count '" + text + "'");
  return v;
}

}  // namespace

std::vector<EvalReport> parse_report_csv(std::string_view text) {
  struct Partial {
    EvalReport report;
    std::map<std::string, std::size_t> index;
    std::vector<std::tuple<std::string, std::string, long>> confusion;
    bool has_metrics = false;
  };
  std::vector<Partial> parts;
  std::map<std::string, std::size_t> by_method;

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "method,record,class,predicted,value") fail(ErrorKind::Parse, "report csv: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1)
      f.push_back(line.substr(start, pos - start));
    f.push_back(line.substr(start));
    if (f.size() != 5) fail(ErrorKind::Parse, "report line " + std::to_string(line_no) + ": expected 5 fields");
    const auto& [method, record, cls, predicted, value] = std::tie(f[0], f[1], f[2], f[3], f[4]);

    auto it = by_method.find(method);
    if (it == by_method.end()) {
      it = by_method.emplace(method, parts.size()).first;
      parts.emplace_back();
      parts.back().report.method = method;
    }
    Partial& part = parts[it->second];
    EvalReport& r = part.report;
    auto slot = [&](const std::string& name) -> std::size_t {
      auto [pos, inserted] = part.index.emplace(name, r.class_names.size());
      if (inserted) {
        r.class_names.push_back(name);
        r.totals.push_back(0);
        r.correct_counts.push_back(0);
        r.per_class_accuracy.emplace_back();
        r.detection.totals.push_back(0);
        r.detection.correct.push_back(0);
        r.detection.accuracy.emplace_back();
      }
      return pos->second;
    };
    auto metric_slot = [&](std::vector<Metric>& v, std::size_t idx) -> Metric& {
      if (v.size() <= idx) v.resize(idx + 1);
      return v[idx];
    };

    if (record == "total") r.totals[slot(cls)] = parse_count(value, line_no);
    else if (record == "correct") r.correct_counts[slot(cls)] = parse_count(value, line_no);
    else if (record == "accuracy") r.per_class_accuracy[slot(cls)] = parse_metric(value, line_no);
    else if (record == "precision" || record == "recall" || record == "f1") {
      if (!r.metrics) r.metrics.emplace();
      auto& vec = record == "precision" ? r.metrics->precision : record == "recall" ? r.metrics->recall : r.metrics->f1;
      metric_slot(vec, slot(cls)) = parse_metric(value, line_no);
    } else if (record == "detection_total") r.detection.totals[slot(cls)] = parse_count(value, line_no);
    else if (record == "detection_correct") r.detection.correct[slot(cls)] = parse_count(value, line_no);
    else if (record == "detection_accuracy") r.detection.accuracy[slot(cls)] = parse_metric(value, line_no);
    else if (record == "confusion") part.confusion.emplace_back(cls, predicted, parse_count(value, line_no));
    else if (record == "overall_accuracy") r.overall_accuracy = parse_metric(value, line_no);
    else if (record == "binary_accuracy") r.binary_accuracy = parse_metric(value, line_no);
    else fail(ErrorKind::Parse, "report line " + std::to_string(line_no) + ": unknown record '" + record + "'");
  }

  std::vector<EvalReport> out;
  for (auto& part : parts) {
    auto& r = part.report;
    if (!part.confusion.empty()) {
      ConfusionMatrix m(r.class_names.size());
      for (const auto& [t, p, v] : part.confusion) {
        auto ti = part.index.find(t), pi = part.index.find(p);
        if (ti == part.index.end() || pi == part.index.end())
          fail(ErrorKind::Parse, "report confusion row names an unknown class");
        m.at(ti->second, pi->second) = v;
      }
      r.confusion = std::move(m);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace aigi

namespace aigi {

EvalReport evaluate_predictions(const PredictionFile& predictions, const DatasetManifest& truth,
                                const Registry& registry, std::string method) {
  std::map<std::string, int> labels;
  for (const auto& rec : truth.records()) {
    const auto key = rec.path.generic_string();
    auto [it, inserted] = labels.emplace(key, rec.class_id);
    if (!inserted && it->second != rec.class_id)
      fail(ErrorKind::Data, "manifest gives two labels for " + key);
  }
  bool multiclass = !predictions.records.empty();
  for (const auto& p : predictions.records) multiclass = multiclass && !p.predicted.empty();

  std::vector<int> truths, predicted;
  std::vector<Verdict> verdicts;
  for (const auto& p : predictions.records) {
    auto it = labels.find(p.path);
    if (it == labels.end()) fail(ErrorKind::Data, "prediction for '" + p.path + "' has no ground truth in the manifest");
    truths.push_back(it->second);
    verdicts.push_back(p.verdict);
    if (multiclass) {
      const auto id = registry.find_abbreviation(p.predicted);
      if (!id) fail(ErrorKind::Data, "prediction for '" + p.path + "' names unknown class '" + p.predicted + "'");
      if (registry.is_fake(*id) != (p.verdict == Verdict::Fake))
        fail(ErrorKind::Data, "prediction for '" + p.path + "' has a verdict that contradicts its class");
      predicted.push_back(*id);
    }
  }
  if (multiclass) return make_report(std::move(method), build_confusion(truths, predicted, registry.size()), registry);
  return make_verdict_report(std::move(method), truths, verdicts, registry);
}

}  // namespace aigi
