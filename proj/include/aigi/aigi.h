/*
 * aigi: AI-generated image detection and generator attribution.
 *
 * C interface over the C++ core. Objects are opaque handles released with
 * their *_free function. Every fallible call returns an aigi_status; on
 * failure aigi_last_error() describes the problem (per thread, valid until
 * the next failing call on that thread).
 */
#ifndef AIGI_AIGI_H
#define AIGI_AIGI_H

#include <stddef.h>
#include <stdint.h>

#if defined(AIGI_BUILDING_LIBRARY)
#define AIGI_API __attribute__((visibility("default")))
#else
#define AIGI_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 1-3 match the command-line exit-code contract. */
typedef enum aigi_status {
  AIGI_OK = 0,
  AIGI_ERR_CONFIG = 1,
  AIGI_ERR_DATA = 2,
  AIGI_ERR_TRAINING = 3,
  AIGI_ERR_INVALID_ARGUMENT = 4,
  AIGI_ERR_LOOKUP = 5,
  AIGI_ERR_SHAPE = 6,
  AIGI_ERR_IO = 7,
  AIGI_ERR_ORACLE = 8,
  AIGI_ERR_INTERNAL = 9
} aigi_status;

typedef enum aigi_split { AIGI_SPLIT_TRAIN = 0, AIGI_SPLIT_TEST = 1, AIGI_SPLIT_ALL = 2 } aigi_split;

/* WARN skips records whose image is missing; IGNORE keeps them unchecked. */
typedef enum aigi_missing_policy {
  AIGI_MISSING_FAIL = 0,
  AIGI_MISSING_WARN = 1,
  AIGI_MISSING_IGNORE = 2
} aigi_missing_policy;

typedef enum aigi_log_level { AIGI_LOG_INFO = 0, AIGI_LOG_WARNING = 1 } aigi_log_level;

typedef struct aigi_registry aigi_registry;
typedef struct aigi_manifest aigi_manifest;
typedef struct aigi_bundle aigi_bundle;
typedef struct aigi_oracle aigi_oracle;

AIGI_API const char* aigi_version(void);
AIGI_API const char* aigi_last_error(void);
AIGI_API const char* aigi_status_name(aigi_status status);

/* Replaces the default stderr logger; NULL restores it. */
typedef void (*aigi_log_fn)(aigi_log_level level, const char* message, void* user);
AIGI_API void aigi_set_log_callback(aigi_log_fn fn, void* user);

/* ---- class registry ---------------------------------------------------- */

AIGI_API aigi_status aigi_registry_builtin(aigi_registry** out);
/* Tab-separated config with columns abbreviation, name, family, caption. */
AIGI_API aigi_status aigi_registry_load(const char* path, aigi_registry** out);
AIGI_API aigi_status aigi_registry_save(const aigi_registry* registry, const char* path);
AIGI_API void aigi_registry_free(aigi_registry* registry);

AIGI_API size_t aigi_registry_size(const aigi_registry* registry);
/* Returned strings live as long as the registry. */
AIGI_API aigi_status aigi_registry_caption(const aigi_registry* registry, int class_id, const char** out);
AIGI_API aigi_status aigi_registry_abbreviation(const aigi_registry* registry, int class_id, const char** out);
AIGI_API aigi_status aigi_registry_is_fake(const aigi_registry* registry, int class_id, int* out);
AIGI_API aigi_status aigi_registry_find(const aigi_registry* registry, const char* abbreviation, int* out);
AIGI_API aigi_status aigi_registry_fingerprint(const aigi_registry* registry, const char** out);

/* ---- datasets ---------------------------------------------------------- */

AIGI_API aigi_status aigi_manifest_load(const char* path, const aigi_registry* registry, aigi_missing_policy missing,
                                        aigi_manifest** out);
/* One subdirectory per class abbreviation; records get the given split. */
AIGI_API aigi_status aigi_manifest_scan(const char* root, const aigi_registry* registry, aigi_split split,
                                        aigi_manifest** out);
AIGI_API aigi_status aigi_manifest_save(const aigi_manifest* manifest, const aigi_registry* registry,
                                        const char* path);
AIGI_API void aigi_manifest_free(aigi_manifest* manifest);
AIGI_API size_t aigi_manifest_count(const aigi_manifest* manifest, aigi_split split);

/* Writes registry.tsv, manifest.tsv, oracle.json and images/ for the toy
 * three-class dataset. */
AIGI_API aigi_status aigi_make_fixtures(const char* out_dir, uint64_t seed, size_t train_per_class,
                                        size_t test_per_class);
/* Registry of the toy dataset (TDM, TGAN, Real). */
AIGI_API aigi_status aigi_registry_toy(aigi_registry** out);

/* ---- encoders ---------------------------------------------------------- */

typedef struct aigi_bundle_options {
  int resolution;
  int embed_dim;
  int conv_channels[3];
  int token_dim;
  int context_length;
  int caption_prefix; /* prepend "an image of a" to captions */
  uint64_t seed;
} aigi_bundle_options;

AIGI_API void aigi_bundle_options_default(aigi_bundle_options* options);
/* backbone "tiny", or a name with a registered weight loader; unknown names
 * or missing weights fall back to "tiny" with a log line. */
AIGI_API aigi_status aigi_bundle_create(const char* backbone, const char* weights_path,
                                        const aigi_registry* registry, const aigi_bundle_options* options,
                                        aigi_bundle** out);
AIGI_API aigi_status aigi_bundle_load(const char* path, aigi_bundle** out);
AIGI_API aigi_status aigi_bundle_save(const aigi_bundle* bundle, const char* path);
AIGI_API void aigi_bundle_free(aigi_bundle* bundle);
AIGI_API int aigi_bundle_resolution(const aigi_bundle* bundle);
AIGI_API double aigi_bundle_logit_scale(const aigi_bundle* bundle);
/* AIGI_ERR_CONFIG when the bundle was built for a different registry. */
AIGI_API aigi_status aigi_bundle_check_registry(const aigi_bundle* bundle, const aigi_registry* registry);

/* ---- fine-tuning ------------------------------------------------------- */

typedef struct aigi_train_config {
  int epochs;
  size_t batch_size;
  double learning_rate;
  double beta1;
  double beta2;
  double eps;
  double weight_decay;
  uint64_t seed;
  int multi_positive;
  double augment_probability;
} aigi_train_config;

/* Adam, 12 epochs, batch 16, lr 1e-6, betas (0.9, 0.98), eps 1e-6, decay 1e-4. */
AIGI_API void aigi_train_config_default(aigi_train_config* config);
AIGI_API aigi_status aigi_train_config_validate(const aigi_train_config* config);

typedef void (*aigi_progress_fn)(int epoch, long step, double loss, void* user);

/* Trains `bundle` in place. With a run directory, writes
 * checkpoints/epoch_NNN.ckpt, final.ckpt and loss_history.tsv there
 * (final.ckpt sits at the top of the run directory). */
AIGI_API aigi_status aigi_fit(const aigi_train_config* config, const aigi_manifest* manifest,
                              const aigi_registry* registry, aigi_bundle* bundle, const char* run_dir,
                              aigi_progress_fn progress, void* user);

/* ---- classification ---------------------------------------------------- */

/* Classifies one image file. `scores` receives registry-size cosine
 * similarities when non-NULL and `capacity` is large enough. */
AIGI_API aigi_status aigi_classify_file(const aigi_bundle* bundle, const aigi_registry* registry, const char* path,
                                        int* class_id, int* is_fake, double* scores, size_t capacity);

/* Classifies the records of one split (or all) and writes a prediction file
 * (path, predicted, verdict, score:<class>...). */
AIGI_API aigi_status aigi_predict_manifest(const aigi_bundle* bundle, const aigi_registry* registry,
                                           const aigi_manifest* manifest, aigi_split split, const char* method,
                                           const char* output_path);

/* Same for a list of unlabelled image files; paths are written as given. */
AIGI_API aigi_status aigi_predict_paths(const aigi_bundle* bundle, const aigi_registry* registry,
                                        const char* const* paths, size_t count, const char* method,
                                        const char* output_path);

/* ---- evaluation -------------------------------------------------------- */

/* Joins each prediction file to the manifest's labels and writes
 * report.csv and report.md into out_dir. `methods` may be NULL (labels then
 * come from the files' method directive or file names). */
AIGI_API aigi_status aigi_evaluate(const char* const* prediction_paths, const char* const* methods, size_t count,
                                   const aigi_manifest* manifest, const aigi_registry* registry,
                                   const char* out_dir);

/* Re-renders a report.csv as "csv" or "markdown" into output_path. */
AIGI_API aigi_status aigi_render_report(const char* report_csv_path, const char* format, const char* output_path);

/* ---- DIRE baseline ------------------------------------------------------- */

AIGI_API aigi_status aigi_oracle_toy(int step_count, uint64_t seed, int resolution, aigi_oracle** out);
AIGI_API aigi_status aigi_oracle_identity(int resolution, aigi_oracle** out);
/* JSON oracle description ({"kind": "toy"|"identity", ...}). */
AIGI_API aigi_status aigi_oracle_load(const char* path, aigi_oracle** out);
AIGI_API void aigi_oracle_free(aigi_oracle* oracle);

/* Mean DIRE of one image file. */
AIGI_API aigi_status aigi_dire_score_file(const aigi_oracle* oracle, const char* path, double* score);

typedef struct aigi_dire_summary {
  size_t images;
  double threshold;
  int calibrated; /* threshold came from the labels */
  double balanced_accuracy;
  double fake_mean;
  double real_mean;
  double auc;
} aigi_dire_summary;

/* Scores every record of a split and writes dire_scores.tsv (path, score,
 * verdict) into out_dir, plus maps/<n>.png when save_maps is set. When
 * `threshold` is NULL the threshold is calibrated on the labels. */
AIGI_API aigi_status aigi_dire_run(const aigi_oracle* oracle, const aigi_manifest* manifest,
                                   const aigi_registry* registry, aigi_split split, const double* threshold,
                                   int save_maps, const char* out_dir, aigi_dire_summary* summary);

/* Scores unlabelled image files with a fixed threshold; same outputs as
 * aigi_dire_run (balanced_accuracy and auc stay 0). */
AIGI_API aigi_status aigi_dire_paths(const aigi_oracle* oracle, const char* const* paths, size_t count,
                                     double threshold, int save_maps, const char* out_dir,
                                     aigi_dire_summary* summary);

#ifdef __cplusplus
}
#endif

#endif /* AIGI_AIGI_H */
