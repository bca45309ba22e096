#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aigi/data.hpp"
#include "aigi/encoder.hpp"
#include "aigi/registry.hpp"

namespace aigi {

enum class Verdict { Real, Fake };

std::string_view to_string(Verdict verdict);
Verdict verdict_from_string(std::string_view text);

struct ClassPrediction {
  int class_id = 0;
  std::vector<double> scores;  // raw cosine similarity per registry class
  Verdict verdict = Verdict::Real;
};

/// Index of the maximum; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> scores);

/// Decision rule on precomputed unit embeddings (one caption embedding per
/// registry class, in class order).
std::vector<ClassPrediction> classify_embeddings(std::span<const Embedding> images,
                                                 std::span<const Embedding> captions, const Registry& registry);

/// Caption embeddings are computed once per call and shared by the batch.
std::vector<ClassPrediction> classify(const EncoderBundle& bundle, const Registry& registry,
                                      std::span<const ImageArray> images);
std::vector<Verdict> classify_binary(const EncoderBundle& bundle, const Registry& registry,
                                     std::span<const ImageArray> images);

/// Softmax over exp(logit_scale) * scores, for reporting only.
std::vector<double> softmax_view(std::span<const double> scores, double logit_scale);

/// One line per image: path, predicted abbreviation, verdict, one score
/// column per class ("score:<abbreviation>").
struct PredictionRecord {
  std::string path;
  std::string predicted;  // abbreviation; empty for verdict-only predictions
  Verdict verdict = Verdict::Real;
  std::vector<double> scores;
};

struct PredictionFile {
  std::string method;
  std::vector<std::string> score_columns;  // class abbreviations, in order
  std::vector<PredictionRecord> records;
};

std::string serialize_predictions(const PredictionFile& file);
PredictionFile parse_predictions(std::string_view text, std::string_view source);
PredictionFile read_predictions(const std::filesystem::path& path);

/// Classifies every record of `manifest` (optionally only one split) and
/// builds the prediction file; paths are written as they appear in the manifest.
PredictionFile predict_manifest(const EncoderBundle& bundle, const Registry& registry,
                                const DatasetManifest& manifest, const std::vector<std::size_t>& record_indices,
                                std::string method = "CLIP", std::size_t batch_size = 32);

}  // namespace aigi
