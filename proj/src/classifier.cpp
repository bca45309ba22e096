#include "aigi/classifier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "aigi/common.hpp"
#include "aigi/table_file.hpp"

namespace aigi {

std::string_view to_string(Verdict verdict) { return verdict == Verdict::Fake ? "fake" : "real"; }

Verdict verdict_from_string(std::string_view text) {
  if (text == "fake") return Verdict::Fake;
  if (text == "real") return Verdict::Real;
  fail(ErrorKind::Parse, "unknown verdict '" + std::string(text) + "' (expected real or fake)");
}

std::size_t argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) fail(ErrorKind::InvalidArgument, "argmax of an empty score vector");
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return best;
}

std::vector<ClassPrediction> classify_embeddings(std::span<const Embedding> images,
                                                 std::span<const Embedding> captions, const Registry& registry) {
  if (registry.size() == 0 || captions.empty()) fail(ErrorKind::Config, "classification needs a non-empty registry");
  if (captions.size() != registry.size())
    fail(ErrorKind::Shape, "expected one caption embedding per registry class");
  std::vector<ClassPrediction> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    ClassPrediction p;
    p.scores.reserve(captions.size());
    for (const auto& cap : captions) p.scores.push_back(dot(img, cap));
    p.class_id = static_cast<int>(argmax_lowest(p.scores));
    p.verdict = registry.is_fake(p.class_id) ? Verdict::Fake : Verdict::Real;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ClassPrediction> classify(const EncoderBundle& bundle, const Registry& registry,
                                      std::span<const ImageArray> images) {
  if (registry.size() == 0) fail(ErrorKind::Config, "classification needs a non-empty registry");
  std::vector<std::string> captions;
  for (const auto& c : registry.classes()) captions.push_back(bundle.caption(registry, c.class_id));
  const auto caption_embeddings = bundle.embed_texts(captions);
  return classify_embeddings(bundle.embed_images(images), caption_embeddings, registry);
}

std::vector<Verdict> classify_binary(const EncoderBundle& bundle, const Registry& registry,
                                     std::span<const ImageArray> images) {
  std::vector<Verdict> out;
  for (const auto& p : classify(bundle, registry, images)) out.push_back(p.verdict);
  return out;
}

std::vector<double> softmax_view(std::span<const double> scores, double logit_scale) {
  const double scale = std::exp(logit_scale);
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  double mx = -INFINITY;
  for (double s : scores) mx = std::max(mx, scale * s);
  double z = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) z += out[k] = std::exp(scale * scores[k] - mx);
  for (auto& p : out) p /= z;
  return out;
}

namespace {

constexpr std::string_view kScorePrefix = "score:";

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail(ErrorKind::Parse, where + ": not a number: '" + text + "'");
  return v;
}

}  // namespace

std::string serialize_predictions(const PredictionFile& file) {
  TableFile table;
  if (!file.method.empty()) table.directives["method"] = file.method;
  table.columns = {"path", "predicted", "verdict"};
  for (const auto& c : file.score_columns) table.columns.push_back(std::string(kScorePrefix) + c);
  for (const auto& r : file.records) {
    if (r.scores.size() != file.score_columns.size())
      fail(ErrorKind::InvalidArgument, "prediction for " + r.path + " has the wrong number of scores");
    TableRow row;
    row.fields = {r.path, r.predicted, std::string(to_string(r.verdict))};
    for (double s : r.scores) row.fields.push_back(format_exact(s));
    table.rows.push_back(std::move(row));
  }
  return render_table(table);
}

PredictionFile parse_predictions(std::string_view text, std::string_view source) {
  const TableFile table = parse_table(text, source);
  PredictionFile file;
  if (auto it = table.directives.find("method"); it != table.directives.end()) file.method = it->second;
  const auto path_col = table.require_column("path", source);
  const auto verdict_col = table.require_column("verdict", source);
  const auto predicted_col = table.column("predicted");
  std::vector<std::size_t> score_cols;
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    if (table.columns[i].starts_with(kScorePrefix)) {
      file.score_columns.push_back(table.columns[i].substr(kScorePrefix.size()));
      score_cols.push_back(i);
    }
  for (const auto& row : table.rows) {
    const std::string where = std::string(source) + ":" + std::to_string(row.line);
    PredictionRecord r;
    r.path = row.fields[path_col];
    if (predicted_col) r.predicted = row.fields[*predicted_col];
    try {
      r.verdict = verdict_from_string(row.fields[verdict_col]);
    } catch (const Error& e) {
      fail(ErrorKind::Parse, where + ": " + e.what());
    }
    for (auto c : score_cols) r.scores.push_back(parse_double(row.fields[c], where));
    file.records.push_back(std::move(r));
  }
  return file;
}

PredictionFile read_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_text_file(path), path.string());
}

PredictionFile predict_manifest(const EncoderBundle& bundle, const Registry& registry, const DatasetManifest& manifest,
                                const std::vector<std::size_t>& record_indices, std::string method,
                                std::size_t batch_size) {
  if (batch_size == 0) batch_size = 1;
  PredictionFile file;
  file.method = std::move(method);
  for (const auto& c : registry.classes()) file.score_columns.push_back(c.abbreviation);

  std::vector<std::string> captions;
  for (const auto& c : registry.classes()) captions.push_back(bundle.caption(registry, c.class_id));
  const auto caption_embeddings = bundle.embed_texts(captions);

  for (std::size_t start = 0; start < record_indices.size(); start += batch_size) {
    const auto end = std::min(record_indices.size(), start + batch_size);
    std::vector<ImageArray> images;
    for (std::size_t k = start; k < end; ++k)
      images.push_back(load_image(manifest.resolve(record_indices[k]), bundle.resolution()));
    const auto preds = classify_embeddings(bundle.embed_images(images), caption_embeddings, registry);
    for (std::size_t k = start; k < end; ++k) {
      const auto& p = preds[k - start];
      file.records.push_back({manifest.records()[record_indices[k]].path.generic_string(),
                              registry.at(p.class_id).abbreviation, p.verdict, p.scores});
    }
  }
  return file;
}

}  // namespace aigi
