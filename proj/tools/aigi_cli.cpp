// aigi command-line tool. Links only the C API.

#include <aigi/aigi.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  configuration or usage error\n"
    "  2  data, I/O or oracle error\n"
    "  3  training aborted (non-finite loss)\n";

struct CliError {
  int code;
  std::string message;
};

int exit_code(aigi_status status) {
  switch (status) {
    case AIGI_OK: return 0;
    case AIGI_ERR_CONFIG:
    case AIGI_ERR_INVALID_ARGUMENT: return 1;
    case AIGI_ERR_TRAINING: return 3;
    default: return 2;
  }
}

void check(aigi_status status) {
  if (status != AIGI_OK) throw CliError{exit_code(status), aigi_last_error()};
}

[[noreturn]] void usage_error(const std::string& message) { throw CliError{1, message}; }

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Registry = Handle<aigi_registry, aigi_registry_free>;
using Manifest = Handle<aigi_manifest, aigi_manifest_free>;
using Bundle = Handle<aigi_bundle, aigi_bundle_free>;
using Oracle = Handle<aigi_oracle, aigi_oracle_free>;

// Options that can also come from a --config JSON file. Values given on the
// command line win over the file, which wins over the built-in defaults.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON file with option values (keys are long flag names)");
    app_->add_option("--run-dir", run_dir_, "Output directory (default: $AIGI_RUN_ROOT or ./runs, plus a config hash)");
  }

  template <typename T>
  CLI::Option* option(const std::string& name, T& field, const std::string& help) {
    auto* opt = app_->add_option("--" + name, field, help)->capture_default_str();
    add(name, opt, field);
    return opt;
  }

  template <typename T>
  CLI::Option* list(const std::string& name, std::vector<T>& field, const std::string& help) {
    auto* opt = app_->add_option("--" + name, field, help);
    add(name, opt, field);
    return opt;
  }

  CLI::Option* optional(const std::string& name, std::optional<double>& field, const std::string& help) {
    auto* opt = app_->add_option("--" + name, field, help);
    entries_[name] = Entry{opt,
                           [&field](const json& v) {
                             if (v.is_null()) field.reset();
                             else field = v.get<double>();
                           },
                           [&field] { return field ? json(*field) : json(nullptr); }};
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& field, const std::string& help) {
    auto* opt = app_->add_flag("--" + name, field, help);
    add(name, opt, field);
    return opt;
  }

  // Applies the config file to options not given on the command line.
  void resolve() {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    if (!in) usage_error("cannot read config file '" + config_path_ + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      usage_error("config file '" + config_path_ + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) usage_error("config file '" + config_path_ + "' must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      auto it = entries_.find(key);
      if (it == entries_.end()) usage_error("config file '" + config_path_ + "': unknown key '" + key + "'");
      if (it->second.opt->count() > 0) continue;
      try {
        it->second.load(value);
      } catch (const json::exception& e) {
        usage_error("config file '" + config_path_ + "': bad value for '" + key + "': " + e.what());
      }
    }
  }

  json snapshot() const {
    json j = json::object();
    for (const auto& [key, entry] : entries_) j[key] = entry.save();
    return j;
  }

  // Creates the run directory and writes the resolved config into it.
  fs::path open_run_dir(const std::string& subcommand) const {
    const json snap = snapshot();
    const std::string text = snap.dump(2) + "\n";
    fs::path dir;
    if (!run_dir_.empty()) {
      dir = run_dir_;
    } else {
      const char* root = std::getenv("AIGI_RUN_ROOT");
      std::uint64_t h = 1469598103934665603ULL;
      for (unsigned char c : subcommand + text) h = (h ^ c) * 1099511628211ULL;
      char name[32];
      std::snprintf(name, sizeof name, "%016llx", static_cast<unsigned long long>(h));
      dir = fs::path(root && *root ? root : "runs") / (subcommand + "-" + std::string(name).substr(0, 12));
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw CliError{2, "cannot create run directory '" + dir.string() + "': " + ec.message()};
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << text;
    if (!out) throw CliError{2, "cannot write " + (dir / "config.json").string()};
    return dir;
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::function<void(const json&)> load;
    std::function<json()> save;
  };

  template <typename T>
  void add(const std::string& name, CLI::Option* opt, T& field) {
    entries_[name] = Entry{opt, [&field](const json& v) { field = v.get<T>(); }, [&field] { return json(field); }};
  }

  CLI::App* app_;
  std::string config_path_;
  std::string run_dir_;
  std::map<std::string, Entry> entries_;
};

aigi_split parse_split(const std::string& text) {
  if (text == "train") return AIGI_SPLIT_TRAIN;
  if (text == "test") return AIGI_SPLIT_TEST;
  if (text == "all") return AIGI_SPLIT_ALL;
  usage_error("--split must be train, test or all, not '" + text + "'");
}

void load_registry(const std::string& path, Registry& registry) {
  if (path.empty()) check(aigi_registry_builtin(registry.out()));
  else check(aigi_registry_load(path.c_str(), registry.out()));
}

bool is_image(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Files named directly plus every image below named directories, sorted.
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& input : inputs) {
    if (fs::is_directory(input)) {
      std::vector<std::string> found;
      for (const auto& e : fs::recursive_directory_iterator(input))
        if (e.is_regular_file() && is_image(e.path())) found.push_back(e.path().generic_string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(input)) {
      files.push_back(input);
    } else {
      throw CliError{2, "input '" + input + "' does not exist"};
    }
  }
  if (files.empty()) throw CliError{2, "no input images found"};
  return files;
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

struct TrainArgs {
  std::string manifest, registry, backbone = "tiny", weights;
  int epochs, resolution, embed_dim;
  std::size_t batch_size;
  double lr, beta1, beta2, eps, weight_decay, augment_probability;
  std::uint64_t seed;
  bool multi_positive = false, caption_prefix = false, quiet = false;

  TrainArgs() {
    aigi_train_config c;
    aigi_train_config_default(&c);
    epochs = c.epochs;
    batch_size = c.batch_size;
    lr = c.learning_rate;
    beta1 = c.beta1;
    beta2 = c.beta2;
    eps = c.eps;
    weight_decay = c.weight_decay;
    augment_probability = c.augment_probability;
    seed = c.seed;
    aigi_bundle_options o;
    aigi_bundle_options_default(&o);
    resolution = o.resolution;
    embed_dim = o.embed_dim;
  }
};

struct PredictArgs {
  std::string checkpoint, registry, manifest, split = "test", method = "CLIP";
  std::vector<std::string> inputs;
};

struct EvaluateArgs {
  std::vector<std::string> predictions, methods;
  std::string manifest, registry;
};

struct DireArgs {
  std::string oracle, manifest, registry, split = "test";
  std::vector<std::string> inputs;
  std::optional<double> threshold;
  bool save_maps = false;
};

struct ReportArgs {
  std::string report, format = "markdown";
};

struct FixtureArgs {
  std::string out;
  std::uint64_t seed = 7;
  std::size_t train_per_class = 100, test_per_class = 50;
};

int run_train(const TrainArgs& a, const Settings& s) {
  if (a.manifest.empty()) usage_error("--manifest is required");
  aigi_train_config config;
  aigi_train_config_default(&config);
  config.epochs = a.epochs;
  config.batch_size = a.batch_size;
  config.learning_rate = a.lr;
  config.beta1 = a.beta1;
  config.beta2 = a.beta2;
  config.eps = a.eps;
  config.weight_decay = a.weight_decay;
  config.seed = a.seed;
  config.multi_positive = a.multi_positive;
  config.augment_probability = a.augment_probability;
  check(aigi_train_config_validate(&config));

  const fs::path run_dir = s.open_run_dir("train");
  Registry registry;
  load_registry(a.registry, registry);
  Manifest manifest;
  check(aigi_manifest_load(a.manifest.c_str(), registry.get(), AIGI_MISSING_FAIL, manifest.out()));

  aigi_bundle_options options;
  aigi_bundle_options_default(&options);
  options.resolution = a.resolution;
  options.embed_dim = a.embed_dim;
  options.caption_prefix = a.caption_prefix;
  options.seed = a.seed;
  Bundle bundle;
  check(aigi_bundle_create(a.backbone.c_str(), a.weights.empty() ? nullptr : a.weights.c_str(), registry.get(),
                           &options, bundle.out()));

  struct Progress {
    bool quiet;
    int epoch = 0;
    double sum = 0.0;
    long n = 0;
    void flush() {
      if (n > 0 && !quiet) std::printf("epoch %d  mean loss %.6f  (%ld steps)\n", epoch, sum / n, n);
      sum = 0.0;
      n = 0;
    }
  } progress{a.quiet};
  auto on_step = [](int epoch, long, double loss, void* user) {
    auto* p = static_cast<Progress*>(user);
    if (epoch != p->epoch) {
      p->flush();
      p->epoch = epoch;
    }
    p->sum += loss;
    ++p->n;
  };
  const std::string dir = run_dir.string();
  const aigi_status status = aigi_fit(&config, manifest.get(), registry.get(), bundle.get(), dir.c_str(), on_step,
                                      &progress);
  progress.flush();
  check(status);
  std::printf("final checkpoint: %s\n", (run_dir / "final.ckpt").string().c_str());
  return 0;
}

int run_predict(const PredictArgs& a, const Settings& s) {
  if (a.checkpoint.empty()) usage_error("--checkpoint is required");
  if (a.manifest.empty() == a.inputs.empty()) usage_error("give exactly one of --manifest or --input");
  const aigi_split split = parse_split(a.split);
  const fs::path run_dir = s.open_run_dir("predict");
  Registry registry;
  load_registry(a.registry, registry);
  Bundle bundle;
  check(aigi_bundle_load(a.checkpoint.c_str(), bundle.out()));
  check(aigi_bundle_check_registry(bundle.get(), registry.get()));
  const std::string out = (run_dir / "predictions.tsv").string();
  if (!a.manifest.empty()) {
    Manifest manifest;
    check(aigi_manifest_load(a.manifest.c_str(), registry.get(), AIGI_MISSING_FAIL, manifest.out()));
    check(aigi_predict_manifest(bundle.get(), registry.get(), manifest.get(), split, a.method.c_str(), out.c_str()));
  } else {
    const auto files = expand_inputs(a.inputs);
    const auto ptrs = c_strings(files);
    check(aigi_predict_paths(bundle.get(), registry.get(), ptrs.data(), ptrs.size(), a.method.c_str(), out.c_str()));
  }
  std::printf("predictions: %s\n", out.c_str());
  return 0;
}

int run_evaluate(const EvaluateArgs& a, const Settings& s) {
  if (a.predictions.empty()) usage_error("--predictions is required");
  if (a.manifest.empty()) usage_error("--manifest is required");
  if (!a.methods.empty() && a.methods.size() != a.predictions.size())
    usage_error("--method must be given once per --predictions file");
  const fs::path run_dir = s.open_run_dir("evaluate");
  Registry registry;
  load_registry(a.registry, registry);
  Manifest manifest;
  check(aigi_manifest_load(a.manifest.c_str(), registry.get(), AIGI_MISSING_IGNORE, manifest.out()));
  const auto paths = c_strings(a.predictions);
  const auto methods = c_strings(a.methods);
  const std::string dir = run_dir.string();
  check(aigi_evaluate(paths.data(), a.methods.empty() ? nullptr : methods.data(), paths.size(), manifest.get(),
                      registry.get(), dir.c_str()));
  std::ifstream md(run_dir / "report.md");
  std::cout << md.rdbuf();
  return 0;
}

int run_dire(const DireArgs& a, const Settings& s) {
  if (a.oracle.empty()) usage_error("--oracle is required");
  if (a.manifest.empty() == a.inputs.empty()) usage_error("give exactly one of --manifest or --input");
  if (!a.inputs.empty() && !a.threshold) usage_error("--threshold is required for unlabelled --input images");
  const aigi_split split = parse_split(a.split);
  const fs::path run_dir = s.open_run_dir("dire");
  Oracle oracle;
  check(aigi_oracle_load(a.oracle.c_str(), oracle.out()));
  const std::string dir = run_dir.string();
  aigi_dire_summary summary{};
  if (!a.manifest.empty()) {
    Registry registry;
    load_registry(a.registry, registry);
    Manifest manifest;
    check(aigi_manifest_load(a.manifest.c_str(), registry.get(), AIGI_MISSING_FAIL, manifest.out()));
    check(aigi_dire_run(oracle.get(), manifest.get(), registry.get(), split, a.threshold ? &*a.threshold : nullptr,
                        a.save_maps, dir.c_str(), &summary));
    std::printf("images %zu  fake mean %.6f  real mean %.6f  auc %.4f\n", summary.images, summary.fake_mean,
                summary.real_mean, summary.auc);
    std::printf("threshold %.6f (%s)  balanced accuracy %.4f\n", summary.threshold,
                summary.calibrated ? "calibrated" : "given", summary.balanced_accuracy);
  } else {
    const auto files = expand_inputs(a.inputs);
    const auto ptrs = c_strings(files);
    check(aigi_dire_paths(oracle.get(), ptrs.data(), ptrs.size(), *a.threshold, a.save_maps, dir.c_str(), &summary));
    std::printf("images %zu  threshold %.6f\n", summary.images, summary.threshold);
  }
  std::printf("scores: %s\n", (run_dir / "dire_scores.tsv").string().c_str());
  return 0;
}

int run_report(const ReportArgs& a, const Settings& s) {
  if (a.report.empty()) usage_error("--report is required");
  if (a.format != "markdown" && a.format != "csv") usage_error("--format must be markdown or csv");
  const fs::path run_dir = s.open_run_dir("report");
  const fs::path out = run_dir / (a.format == "csv" ? "report.csv" : "report.md");
  if (fs::exists(out) && fs::equivalent(out, a.report)) usage_error("--report must not be the output file");
  check(aigi_render_report(a.report.c_str(), a.format.c_str(), out.string().c_str()));
  std::ifstream in(out);
  std::cout << in.rdbuf();
  return 0;
}

int run_fixtures(const FixtureArgs& a) {
  if (a.out.empty()) usage_error("--out is required");
  check(aigi_make_fixtures(a.out.c_str(), a.seed, a.train_per_class, a.test_per_class));
  std::printf("fixtures written to %s\n", a.out.c_str());
  return 0;
}

void log_to_stderr(aigi_log_level level, const char* message, void*) {
  std::fprintf(stderr, "%s%s\n", level == AIGI_LOG_WARNING ? "warning: " : "", message);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect AI-generated images and attribute them to a generator."};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  app.set_version_flag("--version", aigi_version());

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fine-tune the image/text encoders on a labelled manifest");
  Settings train_s(train_cmd);
  train_s.option("manifest", train.manifest, "Dataset manifest (path, abbreviation, split)");
  train_s.option("registry", train.registry, "Class registry file (default: built-in eleven classes)");
  train_s.option("backbone", train.backbone, "Backbone name");
  train_s.option("weights", train.weights, "Pretrained weights for the backbone");
  train_s.option("epochs", train.epochs, "Training epochs");
  train_s.option("batch-size", train.batch_size, "Batch size");
  train_s.option("lr", train.lr, "Learning rate");
  train_s.option("beta1", train.beta1, "Adam beta1");
  train_s.option("beta2", train.beta2, "Adam beta2");
  train_s.option("eps", train.eps, "Adam epsilon");
  train_s.option("weight-decay", train.weight_decay, "L2 weight decay");
  train_s.option("augment-probability", train.augment_probability, "Blur/JPEG augmentation probability");
  train_s.option("seed", train.seed, "Random seed");
  train_s.option("resolution", train.resolution, "Input resolution of the tiny backbone");
  train_s.option("embed-dim", train.embed_dim, "Embedding dimension of the tiny backbone");
  train_s.flag("multi-positive", train.multi_positive, "Treat same-class pairs in a batch as positives");
  train_s.flag("caption-prefix", train.caption_prefix, "Prefix captions with \"an image of a\"");
  train_cmd->add_flag("--quiet", train.quiet, "No per-epoch progress");
  train_cmd->footer(kExitCodes);

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Classify images with a trained checkpoint");
  Settings predict_s(predict_cmd);
  predict_s.option("checkpoint", predict.checkpoint, "Checkpoint file");
  predict_s.option("registry", predict.registry, "Class registry file (default: built-in eleven classes)");
  predict_s.option("manifest", predict.manifest, "Manifest of images to classify");
  predict_s.list("input", predict.inputs, "Image file or directory (repeatable)");
  predict_s.option("split", predict.split, "Manifest split: train, test or all");
  predict_s.option("method", predict.method, "Method label written into the prediction file");
  predict_cmd->footer(kExitCodes);

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score prediction files against manifest labels");
  Settings evaluate_s(evaluate_cmd);
  evaluate_s.list("predictions", evaluate.predictions, "Prediction or DIRE score file (repeatable)");
  evaluate_s.list("method", evaluate.methods, "Method label per prediction file (repeatable)");
  evaluate_s.option("manifest", evaluate.manifest, "Manifest with ground-truth labels");
  evaluate_s.option("registry", evaluate.registry, "Class registry file (default: built-in eleven classes)");
  evaluate_cmd->footer(kExitCodes);

  DireArgs dire;
  auto* dire_cmd = app.add_subcommand("dire", "Score images by diffusion reconstruction error");
  Settings dire_s(dire_cmd);
  dire_s.option("oracle", dire.oracle, "Oracle description file (JSON)");
  dire_s.option("manifest", dire.manifest, "Labelled manifest; enables threshold calibration");
  dire_s.list("input", dire.inputs, "Image file or directory (repeatable)");
  dire_s.option("registry", dire.registry, "Class registry file (default: built-in eleven classes)");
  dire_s.option("split", dire.split, "Manifest split: train, test or all");
  dire_s.optional("threshold", dire.threshold, "Fixed threshold (fake iff score < threshold)");
  dire_s.flag("save-maps", dire.save_maps, "Write one DIRE map image per input");
  dire_cmd->footer(kExitCodes);

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Re-render a report.csv");
  Settings report_s(report_cmd);
  report_s.option("report", report.report, "report.csv from evaluate");
  report_s.option("format", report.format, "markdown or csv");
  report_cmd->footer(kExitCodes);

  FixtureArgs fixtures;
  auto* fixtures_cmd = app.add_subcommand("make-fixtures", "Generate the toy three-class dataset");
  fixtures_cmd->group("");
  fixtures_cmd->add_option("--out", fixtures.out, "Output directory");
  fixtures_cmd->add_option("--seed", fixtures.seed, "Seed")->capture_default_str();
  fixtures_cmd->add_option("--train-per-class", fixtures.train_per_class, "Training images per class")
      ->capture_default_str();
  fixtures_cmd->add_option("--test-per-class", fixtures.test_per_class, "Test images per class")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  aigi_set_log_callback(log_to_stderr, nullptr);
  try {
    if (*train_cmd) {
      train_s.resolve();
      return run_train(train, train_s);
    }
    if (*predict_cmd) {
      predict_s.resolve();
      return run_predict(predict, predict_s);
    }
    if (*evaluate_cmd) {
      evaluate_s.resolve();
      return run_evaluate(evaluate, evaluate_s);
    }
    if (*dire_cmd) {
      dire_s.resolve();
      return run_dire(dire, dire_s);
    }
    if (*report_cmd) {
      report_s.resolve();
      return run_report(report, report_s);
    }
    if (*fixtures_cmd) return run_fixtures(fixtures);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  }
  return 1;
}
