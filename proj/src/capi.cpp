#include "aigi/aigi.h"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "aigi/classifier.hpp"
#include "aigi/common.hpp"
#include "aigi/data.hpp"
#include "aigi/dire.hpp"
#include "aigi/encoder.hpp"
#include "aigi/eval.hpp"
#include "aigi/finetune.hpp"
#include "aigi/fixtures.hpp"
#include "aigi/registry.hpp"
#include "aigi/table_file.hpp"

struct aigi_registry {
  aigi::Registry value;
  std::string fingerprint;
};
struct aigi_manifest {
  aigi::DatasetManifest value;
};
struct aigi_bundle {
  aigi::EncoderBundle value;
};
struct aigi_oracle {
  aigi::DiffusionOracle value;
};

namespace {

thread_local std::string last_error;

aigi_status status_for(aigi::ErrorKind kind) {
  using aigi::ErrorKind;
  switch (kind) {
    case ErrorKind::Config: return AIGI_ERR_CONFIG;
    case ErrorKind::Data:
    case ErrorKind::Decode:
    case ErrorKind::Parse:
    case ErrorKind::Calibration: return AIGI_ERR_DATA;
    case ErrorKind::Training: return AIGI_ERR_TRAINING;
    case ErrorKind::InvalidArgument: return AIGI_ERR_INVALID_ARGUMENT;
    case ErrorKind::Lookup: return AIGI_ERR_LOOKUP;
    case ErrorKind::Shape: return AIGI_ERR_SHAPE;
    case ErrorKind::Io: return AIGI_ERR_IO;
    case ErrorKind::Oracle: return AIGI_ERR_ORACLE;
  }
  return AIGI_ERR_INTERNAL;
}

template <typename F>
aigi_status guard(F&& body) {
  try {
    body();
    return AIGI_OK;
  } catch (const aigi::Error& e) {
    last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return AIGI_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return AIGI_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return AIGI_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) aigi::fail(aigi::ErrorKind::InvalidArgument, std::string(name) + " must not be null");
}

std::vector<std::size_t> split_indices(const aigi::DatasetManifest& manifest, aigi_split split) {
  switch (split) {
    case AIGI_SPLIT_TRAIN: return manifest.indices(aigi::Split::Train);
    case AIGI_SPLIT_TEST: return manifest.indices(aigi::Split::Test);
    case AIGI_SPLIT_ALL: break;
  }
  std::vector<std::size_t> all(manifest.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

aigi::Split to_split(aigi_split split) {
  if (split == AIGI_SPLIT_TRAIN) return aigi::Split::Train;
  if (split == AIGI_SPLIT_TEST) return aigi::Split::Test;
  aigi::fail(aigi::ErrorKind::InvalidArgument, "split must be train or test here");
}

aigi::TrainConfig to_config(const aigi_train_config& c) {
  aigi::TrainConfig out;
  out.epochs = c.epochs;
  out.batch_size = c.batch_size;
  out.learning_rate = c.learning_rate;
  out.beta1 = c.beta1;
  out.beta2 = c.beta2;
  out.eps = c.eps;
  out.weight_decay = c.weight_decay;
  out.seed = c.seed;
  out.multi_positive = c.multi_positive != 0;
  out.augment_probability = c.augment_probability;
  return out;
}

aigi::TinyBackboneConfig to_backbone(const aigi_bundle_options& o) {
  aigi::TinyBackboneConfig out;
  out.resolution = o.resolution;
  out.embed_dim = o.embed_dim;
  out.conv_channels = {o.conv_channels[0], o.conv_channels[1], o.conv_channels[2]};
  out.token_dim = o.token_dim;
  out.context_length = o.context_length;
  out.caption_prefix = o.caption_prefix != 0;
  return out;
}

}  // namespace

extern "C" {

const char* aigi_version(void) { return "0.1.0"; }

const char* aigi_last_error(void) { return last_error.c_str(); }

const char* aigi_status_name(aigi_status status) {
  switch (status) {
    case AIGI_OK: return "ok";
    case AIGI_ERR_CONFIG: return "config error";
    case AIGI_ERR_DATA: return "data error";
    case AIGI_ERR_TRAINING: return "training error";
    case AIGI_ERR_INVALID_ARGUMENT: return "invalid argument";
    case AIGI_ERR_LOOKUP: return "lookup error";
    case AIGI_ERR_SHAPE: return "shape error";
    case AIGI_ERR_IO: return "io error";
    case AIGI_ERR_ORACLE: return "oracle error";
    case AIGI_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void aigi_set_log_callback(aigi_log_fn fn, void* user) {
  if (fn == nullptr) {
    aigi::set_log_sink({});
    return;
  }
  aigi::set_log_sink([fn, user](aigi::LogLevel level, std::string_view message) {
    const std::string text(message);
    fn(level == aigi::LogLevel::Warning ? AIGI_LOG_WARNING : AIGI_LOG_INFO, text.c_str(), user);
  });
}

aigi_status aigi_registry_builtin(aigi_registry** out) {
  return guard([&] {
    require(out, "out");
    auto r = aigi::Registry::builtin();
    auto fp = r.fingerprint();
    *out = new aigi_registry{std::move(r), std::move(fp)};
  });
}

aigi_status aigi_registry_toy(aigi_registry** out) {
  return guard([&] {
    require(out, "out");
    auto r = aigi::toy_registry();
    auto fp = r.fingerprint();
    *out = new aigi_registry{std::move(r), std::move(fp)};
  });
}

aigi_status aigi_registry_load(const char* path, aigi_registry** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    auto r = aigi::Registry::load(path);
    auto fp = r.fingerprint();
    *out = new aigi_registry{std::move(r), std::move(fp)};
  });
}

aigi_status aigi_registry_save(const aigi_registry* registry, const char* path) {
  return guard([&] {
    require(registry, "registry");
    require(path, "path");
    aigi::write_text_file(path, registry->value.serialize());
  });
}

void aigi_registry_free(aigi_registry* registry) { delete registry; }

size_t aigi_registry_size(const aigi_registry* registry) { return registry ? registry->value.size() : 0; }

aigi_status aigi_registry_caption(const aigi_registry* registry, int class_id, const char** out) {
  return guard([&] {
    require(registry, "registry");
    require(out, "out");
    *out = registry->value.at(class_id).caption.c_str();
  });
}

aigi_status aigi_registry_abbreviation(const aigi_registry* registry, int class_id, const char** out) {
  return guard([&] {
    require(registry, "registry");
    require(out, "out");
    *out = registry->value.at(class_id).abbreviation.c_str();
  });
}

aigi_status aigi_registry_is_fake(const aigi_registry* registry, int class_id, int* out) {
  return guard([&] {
    require(registry, "registry");
    require(out, "out");
    *out = registry->value.is_fake(class_id) ? 1 : 0;
  });
}

aigi_status aigi_registry_find(const aigi_registry* registry, const char* abbreviation, int* out) {
  return guard([&] {
    require(registry, "registry");
    require(abbreviation, "abbreviation");
    require(out, "out");
    *out = registry->value.class_of(abbreviation);
  });
}

aigi_status aigi_registry_fingerprint(const aigi_registry* registry, const char** out) {
  return guard([&] {
    require(registry, "registry");
    require(out, "out");
    *out = registry->fingerprint.c_str();
  });
}

aigi_status aigi_manifest_load(const char* path, const aigi_registry* registry, aigi_missing_policy missing,
                               aigi_manifest** out) {
  return guard([&] {
    require(path, "path");
    require(registry, "registry");
    require(out, "out");
    auto policy = aigi::MissingFilePolicy::Fail;
    if (missing == AIGI_MISSING_WARN) policy = aigi::MissingFilePolicy::Warn;
    if (missing == AIGI_MISSING_IGNORE) policy = aigi::MissingFilePolicy::Ignore;
    *out = new aigi_manifest{aigi::load_manifest(path, registry->value, policy)};
  });
}

aigi_status aigi_manifest_scan(const char* root, const aigi_registry* registry, aigi_split split,
                               aigi_manifest** out) {
  return guard([&] {
    require(root, "root");
    require(registry, "registry");
    require(out, "out");
    *out = new aigi_manifest{aigi::scan_directory(root, registry->value, to_split(split))};
  });
}

aigi_status aigi_manifest_save(const aigi_manifest* manifest, const aigi_registry* registry, const char* path) {
  return guard([&] {
    require(manifest, "manifest");
    require(registry, "registry");
    require(path, "path");
    manifest->value.save(path, registry->value);
  });
}

void aigi_manifest_free(aigi_manifest* manifest) { delete manifest; }

size_t aigi_manifest_count(const aigi_manifest* manifest, aigi_split split) {
  return manifest ? split_indices(manifest->value, split).size() : 0;
}

aigi_status aigi_make_fixtures(const char* out_dir, uint64_t seed, size_t train_per_class, size_t test_per_class) {
  return guard([&] {
    require(out_dir, "out_dir");
    aigi::FixtureOptions options;
    options.seed = seed;
    options.train_per_class = train_per_class;
    options.test_per_class = test_per_class;
    aigi::make_fixtures(out_dir, options);
  });
}

void aigi_bundle_options_default(aigi_bundle_options* options) {
  if (options == nullptr) return;
  const aigi::TinyBackboneConfig d;
  options->resolution = d.resolution;
  options->embed_dim = d.embed_dim;
  for (int i = 0; i < 3; ++i) options->conv_channels[i] = d.conv_channels[i];
  options->token_dim = d.token_dim;
  options->context_length = d.context_length;
  options->caption_prefix = d.caption_prefix ? 1 : 0;
  options->seed = 0;
}

aigi_status aigi_bundle_create(const char* backbone, const char* weights_path, const aigi_registry* registry,
                               const aigi_bundle_options* options, aigi_bundle** out) {
  return guard([&] {
    require(registry, "registry");
    require(out, "out");
    aigi_bundle_options o;
    aigi_bundle_options_default(&o);
    if (options) o = *options;
    *out = new aigi_bundle{aigi::make_bundle(backbone ? backbone : "tiny", weights_path ? weights_path : "",
                                             registry->value, to_backbone(o), o.seed)};
  });
}

aigi_status aigi_bundle_load(const char* path, aigi_bundle** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new aigi_bundle{aigi::EncoderBundle::load(path)};
  });
}

aigi_status aigi_bundle_save(const aigi_bundle* bundle, const char* path) {
  return guard([&] {
    require(bundle, "bundle");
    require(path, "path");
    bundle->value.save(path);
  });
}

void aigi_bundle_free(aigi_bundle* bundle) { delete bundle; }

int aigi_bundle_resolution(const aigi_bundle* bundle) { return bundle ? bundle->value.resolution() : 0; }

double aigi_bundle_logit_scale(const aigi_bundle* bundle) { return bundle ? bundle->value.logit_scale() : 0.0; }

aigi_status aigi_bundle_check_registry(const aigi_bundle* bundle, const aigi_registry* registry) {
  return guard([&] {
    require(bundle, "bundle");
    require(registry, "registry");
    if (bundle->value.registry_fingerprint() != registry->fingerprint) {
      aigi::fail(aigi::ErrorKind::Config, "checkpoint was built for registry " +
                                              bundle->value.registry_fingerprint() + ", not " +
                                              registry->fingerprint);
    }
  });
}

void aigi_train_config_default(aigi_train_config* config) {
  if (config == nullptr) return;
  const aigi::TrainConfig d;
  config->epochs = d.epochs;
  config->batch_size = d.batch_size;
  config->learning_rate = d.learning_rate;
  config->beta1 = d.beta1;
  config->beta2 = d.beta2;
  config->eps = d.eps;
  config->weight_decay = d.weight_decay;
  config->seed = d.seed;
  config->multi_positive = d.multi_positive ? 1 : 0;
  config->augment_probability = d.augment_probability;
}

aigi_status aigi_train_config_validate(const aigi_train_config* config) {
  return guard([&] {
    require(config, "config");
    to_config(*config).validate();
  });
}

aigi_status aigi_fit(const aigi_train_config* config, const aigi_manifest* manifest, const aigi_registry* registry,
                     aigi_bundle* bundle, const char* run_dir, aigi_progress_fn progress, void* user) {
  return guard([&] {
    require(config, "config");
    require(manifest, "manifest");
    require(registry, "registry");
    require(bundle, "bundle");
    aigi::ProgressFn fn;
    if (progress) fn = [progress, user](const aigi::LossRecord& r) { progress(r.epoch, r.step, r.loss, user); };
    auto result = aigi::fit(to_config(*config), manifest->value, registry->value, bundle->value,
                            run_dir ? std::filesystem::path(run_dir) : std::filesystem::path(), fn);
    bundle->value = std::move(result.bundle);
  });
}

aigi_status aigi_classify_file(const aigi_bundle* bundle, const aigi_registry* registry, const char* path,
                               int* class_id, int* is_fake, double* scores, size_t capacity) {
  return guard([&] {
    require(bundle, "bundle");
    require(registry, "registry");
    require(path, "path");
    const aigi::ImageArray image = aigi::load_image(path, bundle->value.resolution());
    const auto predictions = aigi::classify(bundle->value, registry->value, std::span(&image, 1));
    const auto& p = predictions.front();
    if (class_id) *class_id = p.class_id;
    if (is_fake) *is_fake = p.verdict == aigi::Verdict::Fake ? 1 : 0;
    if (scores && capacity >= p.scores.size()) std::copy(p.scores.begin(), p.scores.end(), scores);
  });
}

aigi_status aigi_predict_manifest(const aigi_bundle* bundle, const aigi_registry* registry,
                                  const aigi_manifest* manifest, aigi_split split, const char* method,
                                  const char* output_path) {
  return guard([&] {
    require(bundle, "bundle");
    require(registry, "registry");
    require(manifest, "manifest");
    require(output_path, "output_path");
    const auto indices = split_indices(manifest->value, split);
    if (indices.empty()) aigi::fail(aigi::ErrorKind::Data, "no images to classify");
    const auto file = aigi::predict_manifest(bundle->value, registry->value, manifest->value, indices,
                                             method ? method : "CLIP");
    aigi::write_text_file(output_path, aigi::serialize_predictions(file));
  });
}

aigi_status aigi_predict_paths(const aigi_bundle* bundle, const aigi_registry* registry, const char* const* paths,
                               size_t count, const char* method, const char* output_path) {
  return guard([&] {
    require(bundle, "bundle");
    require(registry, "registry");
    require(output_path, "output_path");
    if (count == 0) aigi::fail(aigi::ErrorKind::Data, "no images to classify");
    require(paths, "paths");
    aigi::PredictionFile file;
    file.method = method ? method : "CLIP";
    for (const auto& c : registry->value.classes()) file.score_columns.push_back(c.abbreviation);
    std::vector<aigi::ImageArray> images;
    for (size_t i = 0; i < count; ++i) {
      require(paths[i], "path");
      images.push_back(aigi::load_image(paths[i], bundle->value.resolution()));
    }
    const auto preds = aigi::classify(bundle->value, registry->value, images);
    for (size_t i = 0; i < count; ++i)
      file.records.push_back({paths[i], registry->value.at(preds[i].class_id).abbreviation, preds[i].verdict,
                              preds[i].scores});
    aigi::write_text_file(output_path, aigi::serialize_predictions(file));
  });
}

aigi_status aigi_evaluate(const char* const* prediction_paths, const char* const* methods, size_t count,
                          const aigi_manifest* manifest, const aigi_registry* registry, const char* out_dir) {
  return guard([&] {
    require(manifest, "manifest");
    require(registry, "registry");
    require(out_dir, "out_dir");
    if (count == 0) aigi::fail(aigi::ErrorKind::InvalidArgument, "no prediction files given");
    require(prediction_paths, "prediction_paths");
    std::vector<aigi::EvalReport> reports;
    for (size_t i = 0; i < count; ++i) {
      require(prediction_paths[i], "prediction path");
      const std::filesystem::path path(prediction_paths[i]);
      const auto file = aigi::read_predictions(path);
      std::string label;
      if (methods && methods[i]) label = methods[i];
      else if (!file.method.empty()) label = file.method;
      else label = path.stem().string();
      reports.push_back(aigi::evaluate_predictions(file, manifest->value, registry->value, label));
    }
    const std::filesystem::path dir(out_dir);
    aigi::write_text_file(dir / "report.csv", aigi::render_report(reports, aigi::ReportFormat::Csv));
    aigi::write_text_file(dir / "report.md", aigi::render_report(reports, aigi::ReportFormat::Markdown));
  });
}

aigi_status aigi_render_report(const char* report_csv_path, const char* format, const char* output_path) {
  return guard([&] {
    require(report_csv_path, "report_csv_path");
    require(format, "format");
    require(output_path, "output_path");
    const auto reports = aigi::parse_report_csv(aigi::read_text_file(report_csv_path));
    aigi::write_text_file(output_path, aigi::render_report(reports, aigi::report_format_from_string(format)));
  });
}

aigi_status aigi_oracle_toy(int step_count, uint64_t seed, int resolution, aigi_oracle** out) {
  return guard([&] {
    require(out, "out");
    *out = new aigi_oracle{aigi::toy_oracle(step_count, seed, resolution)};
  });
}

aigi_status aigi_oracle_identity(int resolution, aigi_oracle** out) {
  return guard([&] {
    require(out, "out");
    *out = new aigi_oracle{aigi::identity_oracle(resolution)};
  });
}

aigi_status aigi_oracle_load(const char* path, aigi_oracle** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new aigi_oracle{aigi::load_oracle_file(path)};
  });
}

void aigi_oracle_free(aigi_oracle* oracle) { delete oracle; }

aigi_status aigi_dire_score_file(const aigi_oracle* oracle, const char* path, double* score) {
  return guard([&] {
    require(oracle, "oracle");
    require(path, "path");
    require(score, "score");
    const int resolution = oracle->value.resolution > 0 ? oracle->value.resolution : 256;
    *score = aigi::dire_score(aigi::compute_dire(aigi::load_image(path, resolution), oracle->value));
  });
}

aigi_status aigi_dire_run(const aigi_oracle* oracle, const aigi_manifest* manifest, const aigi_registry* registry,
                          aigi_split split, const double* threshold, int save_maps, const char* out_dir,
                          aigi_dire_summary* summary) {
  return guard([&] {
    require(oracle, "oracle");
    require(manifest, "manifest");
    require(registry, "registry");
    require(out_dir, "out_dir");
    const auto& m = manifest->value;
    const auto indices = split_indices(m, split);
    if (indices.empty()) aigi::fail(aigi::ErrorKind::Data, "no images to score");
    const int resolution = oracle->value.resolution > 0 ? oracle->value.resolution : 256;
    const std::filesystem::path dir(out_dir);

    std::vector<double> scores;
    std::vector<aigi::Verdict> labels;
    std::vector<double> fake_scores, real_scores;
    for (std::size_t n = 0; n < indices.size(); ++n) {
      const auto& record = m.records()[indices[n]];
      const auto map = aigi::compute_dire(aigi::load_image(m.resolve(record), resolution), oracle->value);
      const double s = aigi::dire_score(map);
      scores.push_back(s);
      const bool fake = registry->value.is_fake(record.class_id);
      labels.push_back(fake ? aigi::Verdict::Fake : aigi::Verdict::Real);
      (fake ? fake_scores : real_scores).push_back(s);
      if (save_maps) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.png", n);
        aigi::save_dire_map(dir / "maps" / name, map);
      }
    }

    aigi_dire_summary s{};
    s.images = scores.size();
    if (threshold) {
      s.threshold = *threshold;
      s.calibrated = 0;
      if (!fake_scores.empty() && !real_scores.empty())
        s.balanced_accuracy = aigi::balanced_accuracy(scores, labels, s.threshold);
    } else {
      const auto cal = aigi::calibrate_threshold(scores, labels);
      s.threshold = cal.threshold;
      s.balanced_accuracy = cal.balanced_accuracy;
      s.calibrated = 1;
    }
    auto mean = [](const std::vector<double>& v) {
      double t = 0.0;
      for (double x : v) t += x;
      return v.empty() ? 0.0 : t / static_cast<double>(v.size());
    };
    s.fake_mean = mean(fake_scores);
    s.real_mean = mean(real_scores);
    s.auc = (fake_scores.empty() || real_scores.empty()) ? 0.0 : aigi::threshold_sweep_auc(fake_scores, real_scores);

    std::vector<aigi::DireScoreRecord> records;
    for (std::size_t n = 0; n < indices.size(); ++n) {
      records.push_back({m.records()[indices[n]].path.generic_string(), scores[n],
                         aigi::verdict_for_score(scores[n], s.threshold)});
    }
    aigi::write_text_file(dir / "dire_scores.tsv", aigi::serialize_dire_scores(records, s.threshold));
    if (summary) *summary = s;
  });
}

aigi_status aigi_dire_paths(const aigi_oracle* oracle, const char* const* paths, size_t count, double threshold,
                            int save_maps, const char* out_dir, aigi_dire_summary* summary) {
  return guard([&] {
    require(oracle, "oracle");
    require(out_dir, "out_dir");
    if (count == 0) aigi::fail(aigi::ErrorKind::Data, "no images to score");
    require(paths, "paths");
    const int resolution = oracle->value.resolution > 0 ? oracle->value.resolution : 256;
    const std::filesystem::path dir(out_dir);
    std::vector<aigi::DireScoreRecord> records;
    aigi_dire_summary s{};
    s.threshold = threshold;
    for (size_t n = 0; n < count; ++n) {
      require(paths[n], "path");
      const auto map = aigi::compute_dire(aigi::load_image(paths[n], resolution), oracle->value);
      const double score = aigi::dire_score(map);
      records.push_back({paths[n], score, aigi::verdict_for_score(score, threshold)});
      if (save_maps) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.png", n);
        aigi::save_dire_map(dir / "maps" / name, map);
      }
    }
    s.images = records.size();
    aigi::write_text_file(dir / "dire_scores.tsv", aigi::serialize_dire_scores(records, threshold));
    if (summary) *summary = s;
  });
}

}  // extern "C"
