// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "aigi/aigi.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const char* tag) {
    static std::atomic<int> counter{0};
    dir = fs::temp_directory_path() /
          ("aigi_capi_" + std::string(tag) + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  Scratch scratch{"fixture"};
  aigi_registry* reg = nullptr;
  aigi_manifest* manifest = nullptr;
  Fixture() {
    REQUIRE(aigi_make_fixtures(scratch.dir.c_str(), 3, 4, 2) == AIGI_OK);
    REQUIRE(aigi_registry_load((scratch / "registry.tsv").c_str(), &reg) == AIGI_OK);
    REQUIRE(aigi_manifest_load((scratch / "manifest.tsv").c_str(), reg, AIGI_MISSING_FAIL, &manifest) == AIGI_OK);
  }
  ~Fixture() {
    aigi_manifest_free(manifest);
    aigi_registry_free(reg);
  }
};

void quiet(aigi_log_level, const char*, void*) {}

}  // namespace

TEST_CASE("status names and errors") {
  CHECK(std::string(aigi_status_name(AIGI_OK)) == "ok");
  CHECK(aigi_version()[0] != '\0');
  aigi_registry* reg = nullptr;
  CHECK(aigi_registry_load("/nonexistent/registry.tsv", &reg) != AIGI_OK);
  CHECK(reg == nullptr);
  CHECK(std::string(aigi_last_error()).find("registry.tsv") != std::string::npos);
  CHECK(aigi_registry_builtin(nullptr) == AIGI_ERR_INVALID_ARGUMENT);
}

TEST_CASE("builtin registry") {
  aigi_registry* reg = nullptr;
  REQUIRE(aigi_registry_builtin(&reg) == AIGI_OK);
  CHECK(aigi_registry_size(reg) == 11);
  int id = -1, fake = -1;
  REQUIRE(aigi_registry_find(reg, "Real", &id) == AIGI_OK);
  REQUIRE(aigi_registry_is_fake(reg, id, &fake) == AIGI_OK);
  CHECK(fake == 0);
  const char* caption = nullptr;
  REQUIRE(aigi_registry_caption(reg, id, &caption) == AIGI_OK);
  CHECK(std::string(caption).find("real") != std::string::npos);
  CHECK(aigi_registry_find(reg, "XYZ", &id) == AIGI_ERR_LOOKUP);
  CHECK(aigi_registry_caption(reg, 99, &caption) == AIGI_ERR_LOOKUP);

  Scratch s("registry");
  REQUIRE(aigi_registry_save(reg, (s / "r.tsv").c_str()) == AIGI_OK);
  aigi_registry* back = nullptr;
  REQUIRE(aigi_registry_load((s / "r.tsv").c_str(), &back) == AIGI_OK);
  const char *fa = nullptr, *fb = nullptr;
  aigi_registry_fingerprint(reg, &fa);
  aigi_registry_fingerprint(back, &fb);
  CHECK(std::string(fa) == fb);
  aigi_registry_free(back);
  aigi_registry_free(reg);
}

TEST_CASE("train config") {
  aigi_train_config cfg;
  aigi_train_config_default(&cfg);
  CHECK(cfg.epochs == 12);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.learning_rate == 1e-6);
  CHECK(cfg.beta1 == 0.9);
  CHECK(cfg.beta2 == 0.98);
  CHECK(cfg.eps == 1e-6);
  CHECK(cfg.weight_decay == 1e-4);
  CHECK(aigi_train_config_validate(&cfg) == AIGI_OK);
  cfg.learning_rate = -1;
  CHECK(aigi_train_config_validate(&cfg) == AIGI_ERR_CONFIG);
}

TEST_CASE("log callback") {
  std::vector<std::string> seen;
  aigi_set_log_callback(
      [](aigi_log_level level, const char* msg, void* user) {
        if (level == AIGI_LOG_WARNING) static_cast<std::vector<std::string>*>(user)->push_back(msg);
      },
      &seen);
  Scratch s("empty");
  aigi_registry* reg = nullptr;
  aigi_registry_toy(&reg);
  aigi_manifest* m = nullptr;
  REQUIRE(aigi_manifest_scan(s.dir.c_str(), reg, AIGI_SPLIT_TEST, &m) == AIGI_OK);
  CHECK(aigi_manifest_count(m, AIGI_SPLIT_ALL) == 0);
  CHECK(seen.size() == 1);
  aigi_set_log_callback(nullptr, nullptr);
  aigi_manifest_free(m);
  aigi_registry_free(reg);
}

TEST_CASE("train, predict, evaluate and dire end to end") {
  aigi_set_log_callback(quiet, nullptr);
  Fixture fx;
  CHECK(aigi_manifest_count(fx.manifest, AIGI_SPLIT_TRAIN) == 12);
  CHECK(aigi_manifest_count(fx.manifest, AIGI_SPLIT_TEST) == 6);

  aigi_bundle_options opts;
  aigi_bundle_options_default(&opts);
  CHECK(opts.resolution == 32);
  aigi_bundle* bundle = nullptr;
  REQUIRE(aigi_bundle_create("tiny", nullptr, fx.reg, &opts, &bundle) == AIGI_OK);

  aigi_train_config cfg;
  aigi_train_config_default(&cfg);
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  std::vector<double> losses;
  Scratch run("run");
  REQUIRE(aigi_fit(&cfg, fx.manifest, fx.reg, bundle, run.dir.c_str(),
                   [](int, long, double loss, void* user) { static_cast<std::vector<double>*>(user)->push_back(loss); },
                   &losses) == AIGI_OK);
  CHECK(losses.size() == 6);
  CHECK(fs::exists(run / "final.ckpt"));

  aigi_bundle* loaded = nullptr;
  REQUIRE(aigi_bundle_load((run / "final.ckpt").c_str(), &loaded) == AIGI_OK);
  CHECK(aigi_bundle_check_registry(loaded, fx.reg) == AIGI_OK);
  aigi_registry* builtin = nullptr;
  aigi_registry_builtin(&builtin);
  CHECK(aigi_bundle_check_registry(loaded, builtin) == AIGI_ERR_CONFIG);
  aigi_registry_free(builtin);

  const std::string image = fx.scratch / "images/TDM/test_0000.png";
  int id = -1, fake = -1;
  double scores[3];
  REQUIRE(aigi_classify_file(loaded, fx.reg, image.c_str(), &id, &fake, scores, 3) == AIGI_OK);
  CHECK(id >= 0);
  CHECK(id < 3);
  const char* abbr = nullptr;
  aigi_registry_abbreviation(fx.reg, id, &abbr);
  CHECK(fake == (std::string(abbr) != "Real"));
  CHECK(aigi_classify_file(loaded, fx.reg, "/nonexistent.png", &id, &fake, nullptr, 0) == AIGI_ERR_IO);

  Scratch out("out");
  REQUIRE(aigi_predict_manifest(loaded, fx.reg, fx.manifest, AIGI_SPLIT_TEST, "CLIP",
                                (out / "predictions.tsv").c_str()) == AIGI_OK);
  const char* paths[] = {image.c_str()};
  REQUIRE(aigi_predict_paths(loaded, fx.reg, paths, 1, "CLIP", (out / "single.tsv").c_str()) == AIGI_OK);

  aigi_oracle* oracle = nullptr;
  REQUIRE(aigi_oracle_load((fx.scratch / "oracle.json").c_str(), &oracle) == AIGI_OK);
  aigi_dire_summary summary{};
  REQUIRE(aigi_dire_run(oracle, fx.manifest, fx.reg, AIGI_SPLIT_TEST, nullptr, 1, (out / "dire").c_str(),
                        &summary) == AIGI_OK);
  CHECK(summary.images == 6);
  CHECK(summary.calibrated == 1);
  CHECK(summary.fake_mean < summary.real_mean);
  CHECK(fs::exists(out / "dire/dire_scores.tsv"));
  CHECK(fs::exists(out / "dire/maps/000000.png"));
  double score = -1;
  REQUIRE(aigi_dire_score_file(oracle, image.c_str(), &score) == AIGI_OK);
  CHECK(score >= 0.0);

  const std::string pred = out / "predictions.tsv", dire = out / "dire/dire_scores.tsv";
  const char* files[] = {pred.c_str(), dire.c_str()};
  const char* methods[] = {"CLIP", "DIRE"};
  REQUIRE(aigi_evaluate(files, methods, 2, fx.manifest, fx.reg, (out / "eval").c_str()) == AIGI_OK);
  const auto md = slurp(out / "eval/report.md");
  CHECK(md.find("| Generation method | CLIP | DIRE |") != std::string::npos);
  REQUIRE(aigi_render_report((out / "eval/report.csv").c_str(), "markdown", (out / "again.md").c_str()) == AIGI_OK);
  CHECK(slurp(out / "again.md") == md);
  CHECK(aigi_render_report((out / "eval/report.csv").c_str(), "html", (out / "x").c_str()) != AIGI_OK);

  aigi_oracle_free(oracle);
  aigi_bundle_free(loaded);
  aigi_bundle_free(bundle);
  aigi_set_log_callback(nullptr, nullptr);
}

TEST_CASE("corrupt checkpoints are rejected") {
  Scratch s("ckpt");
  {
    std::ofstream(s / "bad.ckpt") << "not a checkpoint";
  }
  aigi_bundle* bundle = nullptr;
  CHECK(aigi_bundle_load((s / "bad.ckpt").c_str(), &bundle) != AIGI_OK);
  CHECK(bundle == nullptr);
  CHECK(aigi_bundle_load((s / "missing.ckpt").c_str(), &bundle) != AIGI_OK);
  CHECK(std::string(aigi_last_error()).find("missing.ckpt") != std::string::npos);
}
