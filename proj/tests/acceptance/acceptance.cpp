// End-to-end acceptance checks; prints one PASS/FAIL line per criterion and
// exits non-zero when any fails.
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
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
#include "aigi/table_file.hpp"
#include "reference_tables.hpp"

namespace fs = std::filesystem;
using namespace aigi;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failures without stopping; the first few are kept for the report.
struct Checker {
  Outcome out;
  int failures = 0;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    out.pass = false;
    if (++failures <= 3) out.detail += (out.detail.empty() ? "" : "; ") + what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("aigi_accept_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ConfusionMatrix reference_matrix(const Registry& reg) {
  std::vector<int> truths, preds;
  for (int t = 0; t < reference::kClasses; ++t)
    for (int p = 0; p < reference::kClasses; ++p)
      for (long n = 0; n < reference::kConfusion[t][p]; ++n) {
        truths.push_back(reg.class_of(reference::kMatrixOrder[t]));
        preds.push_back(reg.class_of(reference::kMatrixOrder[p]));
      }
  return build_confusion(truths, preds, reg.size());
}

Outcome metric_oracle() {
  Checker c;
  const auto reg = Registry::builtin();
  const auto metrics = per_class_metrics(reference_matrix(reg));
  double worst = 0.0;
  for (int i = 0; i < reference::kClasses; ++i) {
    const auto id = static_cast<std::size_t>(reg.class_of(reference::kMatrixOrder[i]));
    const std::string name(reference::kMatrixOrder[i]);
    const std::pair<const Metric*, double> pairs[] = {{&metrics.precision[id], reference::kPrecision[i]},
                                                      {&metrics.recall[id], reference::kRecall[i]},
                                                      {&metrics.f1[id], reference::kF1[i]}};
    for (const auto& [m, expected] : pairs) {
      c.expect(m->has_value(), name + " metric undefined");
      if (!m->has_value()) continue;
      const double err = std::abs(**m - expected);
      worst = std::max(worst, err);
      c.expect(err <= 0.0005 + 1e-12, name + " off by " + fmt("%.4f", err));
    }
  }
  if (c.out.pass) c.out.detail = "33 values, worst deviation " + fmt("%.5f", worst);
  return c.out;
}

Outcome accuracy_oracle() {
  Checker c;
  const auto reg = Registry::builtin();
  // Correct counts on the diagonal, the rest in a column of the other family.
  ConfusionMatrix m(reg.size());
  const auto real = static_cast<std::size_t>(reg.real_class());
  const auto some_fake = static_cast<std::size_t>(reg.class_of("ADM"));
  for (const auto& row : reference::kDetection) {
    const auto id = static_cast<std::size_t>(reg.class_of(row.abbreviation));
    m.at(id, id) = row.clip;
    m.at(id, id == real ? some_fake : real) = row.total - row.clip;
  }
  const auto acc = accuracy_by_class(m);
  double worst = 0.0;
  for (const auto& row : reference::kDetection) {
    const auto& a = acc[static_cast<std::size_t>(reg.class_of(row.abbreviation))];
    c.expect(a.has_value(), std::string(row.abbreviation) + " undefined");
    if (!a) continue;
    const double err = std::abs(*a - row.clip_accuracy);
    worst = std::max(worst, err);
    c.expect(err <= 0.001 + 1e-12, std::string(row.abbreviation) + " off by " + fmt("%.4f", err));
  }
  // The real/fake detection view of the same counts agrees.
  const auto det = detection_by_class(m, reg);
  for (const auto& row : reference::kDetection)
    c.expect(det.correct[static_cast<std::size_t>(reg.class_of(row.abbreviation))] == row.clip,
             std::string(row.abbreviation) + " detection count");
  if (c.out.pass) c.out.detail = "11 classes, worst deviation " + fmt("%.5f", worst);
  return c.out;
}

double naive_loss(const Matrix& m) {
  const std::size_t n = m.rows;
  double rows = 0.0, cols = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double zr = 0.0, zc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      zr += std::exp(m(i, j));
      zc += std::exp(m(j, i));
    }
    rows -= std::log(std::exp(m(i, i)) / zr);
    cols -= std::log(std::exp(m(i, i)) / zc);
  }
  return 0.5 * (rows + cols) / static_cast<double>(n);
}

Outcome loss_identities() {
  Checker c;
  for (std::size_t n : {2, 4, 16}) {
    Matrix m(n, n);
    for (auto& v : m.data) v = 3.7;
    const double err = std::abs(symmetric_loss(m) - std::log(static_cast<double>(n)));
    c.expect(err < 1e-9, "N=" + std::to_string(n) + " off by " + fmt("%.3g", err));
  }
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_int(0, 14));
    Matrix m(n, n);
    for (auto& v : m.data) v = rng.uniform(-10, 10);
    const double err = std::abs(symmetric_loss(m) - naive_loss(m));
    worst = std::max(worst, err);
    c.expect(err < 1e-10, "random matrix off by " + fmt("%.3g", err));
  }
  if (c.out.pass) c.out.detail = "ln N for N in {2,4,16}; 100 random matrices, worst " + fmt("%.2g", worst);
  return c.out;
}

Outcome gradient_check() {
  Checker c;
  const auto reg = toy_registry();
  TinyBackboneConfig cfg;
  cfg.resolution = 8;
  cfg.embed_dim = 8;
  cfg.conv_channels = {4, 4, 4};
  cfg.token_dim = 8;
  auto bundle = EncoderBundle::create_tiny(cfg, reg, 77);
  Rng rng(78);
  std::vector<ImageArray> images;
  for (int i = 0; i < 4; ++i) {
    ImageArray img(8, 8);
    for (auto& v : img.values) v = rng.uniform(-1, 1);
    images.push_back(std::move(img));
  }
  const std::vector<int> ids{0, 1, 2, 0};
  const auto grad = contrastive_gradients(bundle, images, ids, reg);
  int checked = 0;
  double worst = 0.0;
  auto& params = bundle.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::size_t picks = std::min<std::size_t>(params[p].size(), 6);
    for (std::size_t n = 0; n < picks; ++n) {
      const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(params[p].size()) - 1));
      const double orig = params[p].value[k], h = 1e-5;
      params[p].value[k] = orig + h;
      const double up = contrastive_gradients(bundle, images, ids, reg).loss;
      params[p].value[k] = orig - h;
      const double down = contrastive_gradients(bundle, images, ids, reg).loss;
      params[p].value[k] = orig;
      const double numeric = (up - down) / (2 * h), analytic = grad.grads[p][k];
      const double rel = std::abs(numeric - analytic) / std::max(1e-7, std::abs(numeric) + std::abs(analytic));
      worst = std::max(worst, rel);
      c.expect(rel < 1e-4, params[p].name + " relative error " + fmt("%.3g", rel));
      ++checked;
    }
  }
  c.expect(checked >= 20, "only " + std::to_string(checked) + " parameters sampled");
  if (c.out.pass) c.out.detail = std::to_string(checked) + " parameters, worst relative error " + fmt("%.2g", worst);
  return c.out;
}

Outcome toy_finetune() {
  Checker c;
  const auto dir = scratch("finetune");
  make_fixtures(dir, FixtureOptions{});
  const auto reg = toy_registry();
  const auto manifest = load_manifest(dir / "manifest.tsv", reg);
  c.expect(manifest.count(Split::Train) == 300 && manifest.count(Split::Test) == 150, "fixture sizes");

  TrainConfig config;
  config.learning_rate = 1e-3;
  const auto start = std::chrono::steady_clock::now();
  CachedImageLoader cache(32);
  auto result = fit(config, manifest, reg, EncoderBundle::create_tiny({}, reg, config.seed), {}, {},
                    [&cache](const fs::path& p) { return cache(p); });

  std::vector<ImageArray> images;
  std::vector<int> truth;
  for (auto idx : manifest.indices(Split::Test)) {
    images.push_back(cache(manifest.resolve(idx)));
    truth.push_back(manifest.records()[idx].class_id);
  }
  const auto preds = classify(result.bundle, reg, images);
  const auto verdicts = classify_binary(result.bundle, reg, images);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::size_t multi = 0, binary = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    multi += preds[i].class_id == truth[i];
    binary += (verdicts[i] == Verdict::Fake) == reg.is_fake(truth[i]);
  }
  const double multi_acc = static_cast<double>(multi) / images.size();
  const double binary_acc = static_cast<double>(binary) / images.size();
  c.expect(multi_acc >= 0.95, "multi-class accuracy " + fmt("%.3f", multi_acc));
  c.expect(binary_acc >= 0.98, "binary accuracy " + fmt("%.3f", binary_acc));
  c.expect(seconds < 300.0, "took " + fmt("%.0f s", seconds));
  c.out.detail = (c.out.pass ? "" : c.out.detail + "; ") + "multi-class " + fmt("%.3f", multi_acc) + ", binary " +
                 fmt("%.3f", binary_acc) + ", " + fmt("%.1f s", seconds);
  fs::remove_all(dir);
  return c.out;
}

Outcome dire_hypothesis() {
  Checker c;
  const auto dir = scratch("dire");
  FixtureOptions opts;
  opts.train_per_class = 100;
  opts.test_per_class = 0;
  make_fixtures(dir, opts);
  const auto reg = toy_registry();
  const auto manifest = load_manifest(dir / "manifest.tsv", reg);
  const ToyDiffusion toy(opts.oracle_steps, opts.seed, opts.resolution);
  const auto oracle = toy.oracle();

  Rng rng(mix_seed(opts.seed, 0xd1e));
  std::vector<double> inside, outside;
  for (int i = 0; i < 200; ++i) inside.push_back(dire_score(compute_dire(toy.sample(rng), oracle)));
  for (const auto& r : manifest.records())
    if (reg.at(r.class_id).abbreviation != "TDM")
      outside.push_back(dire_score(compute_dire(load_image(manifest.resolve(r), opts.resolution), oracle)));
  c.expect(outside.size() == 200, "expected 200 outside images");
  double in_mean = 0, out_mean = 0;
  for (double s : inside) in_mean += s / inside.size();
  for (double s : outside) out_mean += s / outside.size();
  const double auc = threshold_sweep_auc(inside, outside);
  c.expect(in_mean < out_mean, "in-process mean not below outside mean");
  c.expect(auc >= 0.9, "auc " + fmt("%.3f", auc));

  const auto identity = identity_oracle();
  bool nonneg = true, zero = true;
  for (int i = 0; i < 1000; ++i) {
    const int res = 8 + static_cast<int>(rng.uniform_int(0, 3)) * 8;
    ImageArray x(res, res);
    for (auto& v : x.values) v = rng.uniform(-1, 1);
    if (res == 32)
      for (double v : compute_dire(x, oracle).values) nonneg = nonneg && v >= 0.0 && std::isfinite(v);
    for (double v : compute_dire(x, identity).values) zero = zero && v == 0.0;
    DiffusionOracle noisy{"noisy", 1, 0, [](const ImageArray& a) { return a; },
                          [&rng](const ImageArray& a) {
                            ImageArray y = a;
                            for (auto& v : y.values) v += rng.normal();
                            return y;
                          }};
    for (double v : compute_dire(x, noisy).values) nonneg = nonneg && v >= 0.0;
  }
  c.expect(nonneg, "negative or non-finite DIRE entry");
  c.expect(zero, "identity oracle map not zero");
  c.out.detail = (c.out.pass ? "" : c.out.detail + "; ") + "mean " + fmt("%.4f", in_mean) + " vs " +
                 fmt("%.4f", out_mean) + ", auc " + fmt("%.3f", auc) + ", 1000 random inputs";
  fs::remove_all(dir);
  return c.out;
}

struct RunArtifacts {
  std::string fixture_manifest;
  std::vector<std::vector<std::vector<std::size_t>>> batches;
  std::vector<LossRecord> losses;
  std::string history_file;
  std::string checkpoint;
  std::string predictions;
  std::string report_md;
  std::string report_csv;
};

RunArtifacts determinism_run(const std::string& tag) {
  const auto dir = scratch("determinism_" + tag);
  FixtureOptions opts;
  opts.train_per_class = 20;
  opts.test_per_class = 10;
  make_fixtures(dir / "data", opts);
  const auto reg = toy_registry();
  const auto manifest = load_manifest(dir / "data/manifest.tsv", reg);

  TrainConfig config;
  config.epochs = 3;
  config.learning_rate = 1e-3;
  config.augment_probability = 0.5;
  config.seed = 99;
  RunArtifacts a;
  a.fixture_manifest = read_text_file(dir / "data/manifest.tsv");
  for (int e = 0; e < config.epochs; ++e) a.batches.push_back(epoch_batches(manifest, Split::Train, 16, config.seed, e));
  auto result = fit(config, manifest, reg, EncoderBundle::create_tiny({}, reg, config.seed), dir / "run");
  a.losses = result.history;
  a.history_file = read_text_file(dir / "run/loss_history.tsv");
  a.checkpoint = read_text_file(dir / "run/final.ckpt");
  const auto preds = predict_manifest(result.bundle, reg, manifest, manifest.indices(Split::Test));
  a.predictions = serialize_predictions(preds);
  const auto report = evaluate_predictions(parse_predictions(a.predictions, "p"), manifest, reg, "CLIP");
  a.report_md = render_report(report, ReportFormat::Markdown);
  a.report_csv = render_report(report, ReportFormat::Csv);
  fs::remove_all(dir);
  return a;
}

Outcome determinism() {
  Checker c;
  const auto a = determinism_run("a"), b = determinism_run("b");
  c.expect(a.fixture_manifest == b.fixture_manifest, "fixture manifests differ");
  c.expect(a.batches == b.batches, "batch order differs");
  bool same_losses = a.losses.size() == b.losses.size() && !a.losses.empty();
  for (std::size_t i = 0; same_losses && i < a.losses.size(); ++i)
    same_losses = std::memcmp(&a.losses[i].loss, &b.losses[i].loss, sizeof(double)) == 0 &&
                  a.losses[i].step == b.losses[i].step;
  c.expect(same_losses, "losses differ");
  c.expect(a.history_file == b.history_file, "loss history files differ");
  c.expect(a.checkpoint == b.checkpoint, "checkpoints differ");
  c.expect(a.predictions == b.predictions, "prediction files differ");
  c.expect(a.report_md == b.report_md && a.report_csv == b.report_csv, "reports differ");
  c.expect(a.batches[0] != a.batches[1], "epochs share a batch order");
  if (c.out.pass)
    c.out.detail = std::to_string(a.losses.size()) + " steps; batches, losses, checkpoint, predictions, reports equal";
  return c.out;
}

Outcome classifier_invariances() {
  Checker c;
  const auto reg = Registry::builtin();
  const std::size_t k = reg.size(), d = 64;
  Rng rng(31337);
  auto random_unit = [&] {
    Vector v(d);
    for (auto& x : v) x = rng.normal();
    return normalized(v);
  };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Embedding> captions;
    for (std::size_t i = 0; i < k; ++i) captions.push_back(random_unit());
    Vector raw(d);
    for (auto& x : raw) x = rng.normal();
    const std::vector<Embedding> base{normalized(raw)};
    const auto expected = classify_embeddings(base, captions, reg)[0];
    for (int s = 0; s < 5; ++s) {
      const double scale = std::exp(rng.uniform(-8, 8));
      Vector scaled = raw;
      for (auto& x : scaled) x *= scale;
      const std::vector<Embedding> img{normalized(scaled)};
      c.expect(classify_embeddings(img, captions, reg)[0].class_id == expected.class_id, "rescaling changed argmax");
      const double logit_scale = rng.uniform(-5, std::log(kMaxLogitScale));
      const auto probs = softmax_view(expected.scores, logit_scale);
      c.expect(argmax_lowest(probs) == static_cast<std::size_t>(expected.class_id), "logit scale changed argmax");
    }
  }

  // Same properties through a real bundle: scaling the image projection and
  // changing logit_scale leave predictions untouched.
  auto bundle = EncoderBundle::create_tiny({}, reg, 5);
  std::vector<ImageArray> images;
  for (int i = 0; i < 20; ++i) {
    ImageArray img(32, 32);
    for (auto& v : img.values) v = rng.uniform(-1, 1);
    images.push_back(std::move(img));
  }
  auto ids = [&](const EncoderBundle& b) {
    std::vector<int> out;
    for (const auto& p : classify(b, reg, images)) out.push_back(p.class_id);
    return out;
  };
  const auto before = ids(bundle);
  auto scaled = bundle;
  for (auto& v : scaled.parameters()[scaled.parameter_index("image_projection")].value) v *= 3.5;
  c.expect(ids(scaled) == before, "projection rescaling changed predictions");
  auto tempered = bundle;
  tempered.set_logit_scale(0.1);
  c.expect(ids(tempered) == before, "logit scale changed predictions");

  // Constructed ties go to the lowest class id.
  int ties = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 2));
    const auto b = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(a) + 1, static_cast<std::int64_t>(k) - 1));
    std::vector<Embedding> captions;
    for (std::size_t i = 0; i < k; ++i) {
      Vector v(d, 0.0);
      v[i] = 1.0;
      captions.push_back(v);
    }
    captions[b] = captions[a];
    Vector img(d, 0.0);
    img[a] = 1.0;
    const std::vector<Embedding> imgs{img};
    c.expect(classify_embeddings(imgs, captions, reg)[0].class_id == static_cast<int>(a), "tie not broken low");
    std::vector<double> flat(k, 0.25);
    c.expect(argmax_lowest(flat) == 0, "flat scores not broken low");
    ++ties;
  }
  if (c.out.pass) c.out.detail = "100 random cases x 5 scales, bundle rescaling, " + std::to_string(ties) + " ties";
  return c.out;
}

}  // namespace

int main() {
  set_log_sink([](LogLevel, std::string_view) {});
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double time_limit;  // seconds; 0 means none
  };
  const Criterion criteria[] = {
      {1, "reference confusion metrics", metric_oracle, 1.0},
      {2, "reference detection accuracies", accuracy_oracle, 1.0},
      {3, "contrastive loss identities", loss_identities, 0.0},
      {4, "gradient check", gradient_check, 0.0},
      {5, "toy fine-tune accuracy", toy_finetune, 300.0},
      {6, "reconstruction error hypothesis", dire_hypothesis, 0.0},
      {7, "determinism", determinism, 0.0},
      {8, "classifier invariances", classifier_invariances, 0.0},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.time_limit > 0 && seconds >= cr.time_limit) {
      o.pass = false;
      o.detail += "; exceeded " + fmt("%.0f s", cr.time_limit);
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", cr.id, cr.name, o.detail.c_str(),
                seconds);
    std::fflush(stdout);
  }
  std::printf("%d/8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
