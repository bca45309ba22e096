#include "aigi/dire.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aigi/common.hpp"
#include "aigi/table_file.hpp"
#include "json.hpp"

namespace aigi {

DireMap compute_dire(const ImageArray& x, const DiffusionOracle& oracle) {
  if (!oracle.invert || !oracle.reconstruct) fail(ErrorKind::Oracle, "oracle '" + oracle.name + "' is incomplete");
  if (oracle.resolution > 0 && (x.height != oracle.resolution || x.width != oracle.resolution))
    fail(ErrorKind::Shape, "oracle '" + oracle.name + "' expects " + std::to_string(oracle.resolution) + "x" +
                               std::to_string(oracle.resolution) + " images, got " + std::to_string(x.height) + "x" +
                               std::to_string(x.width));
  const ImageArray reconstructed = oracle.reconstruct(oracle.invert(x));
  if (!reconstructed.same_shape(x) || reconstructed.values.size() != x.values.size())
    fail(ErrorKind::Oracle, "oracle '" + oracle.name + "' changed the image shape");
  DireMap map{x.height, x.width, std::vector<double>(x.values.size())};
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    map.values[i] = std::abs(x.values[i] - reconstructed.values[i]);
    if (!std::isfinite(map.values[i])) fail(ErrorKind::Oracle, "oracle '" + oracle.name + "' produced non-finite pixels");
  }
  return map;
}

double dire_score(const DireMap& map) {
  if (map.values.empty()) return 0.0;
  double s = 0.0;
  for (double v : map.values) s += v;
  return s / static_cast<double>(map.values.size());
}

double balanced_accuracy(std::span<const double> scores, std::span<const Verdict> labels, double threshold) {
  if (scores.size() != labels.size()) fail(ErrorKind::Shape, "scores and labels differ in length");
  std::size_t fakes = 0, reals = 0, fake_hits = 0, real_hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted_fake = verdict_for_score(scores[i], threshold) == Verdict::Fake;
    if (labels[i] == Verdict::Fake) {
      ++fakes;
      fake_hits += predicted_fake;
    } else {
      ++reals;
      real_hits += !predicted_fake;
    }
  }
  if (!fakes || !reals) fail(ErrorKind::Calibration, "balanced accuracy needs both real and fake labels");
  return 0.5 * (static_cast<double>(fake_hits) / fakes + static_cast<double>(real_hits) / reals);
}

ThresholdCalibration calibrate_threshold(std::span<const double> scores, std::span<const Verdict> labels) {
  if (scores.size() != labels.size()) fail(ErrorKind::Shape, "scores and labels differ in length");
  std::vector<std::pair<double, Verdict>> items;
  std::size_t fakes = 0, reals = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) fail(ErrorKind::Calibration, "non-finite score at index " + std::to_string(i));
    items.emplace_back(scores[i], labels[i]);
    (labels[i] == Verdict::Fake ? fakes : reals)++;
  }
  if (!fakes || !reals) fail(ErrorKind::Calibration, "calibration needs both real and fake examples");
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // Sweep cuts between distinct consecutive scores; fakes below the cut are hits.
  ThresholdCalibration best{items.front().first, 0.5};
  std::size_t fakes_below = 0, reals_below = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    (items[i].second == Verdict::Fake ? fakes_below : reals_below)++;
    if (i + 1 == items.size() || items[i + 1].first == items[i].first) continue;
    const double ba = 0.5 * (static_cast<double>(fakes_below) / fakes +
                             static_cast<double>(reals - reals_below) / reals);
    if (ba > best.balanced_accuracy) best = {0.5 * (items[i].first + items[i + 1].first), ba};
  }
  if (best.balanced_accuracy <= 0.5)
    log_warning("DIRE threshold calibration found no separation between real and fake scores "
                "(balanced accuracy 0.5)");
  return best;
}

double threshold_sweep_auc(std::span<const double> fake_scores, std::span<const double> real_scores) {
  if (fake_scores.empty() || real_scores.empty()) fail(ErrorKind::Calibration, "AUC needs both classes");
  double wins = 0.0;
  for (double f : fake_scores)
    for (double r : real_scores) wins += f < r ? 1.0 : (f == r ? 0.5 : 0.0);
  return wins / (static_cast<double>(fake_scores.size()) * static_cast<double>(real_scores.size()));
}

Verdict verdict_for_score(double score, double threshold) { return score < threshold ? Verdict::Fake : Verdict::Real; }

ScoreHead threshold_head(double threshold) {
  return [threshold](double score) { return verdict_for_score(score, threshold); };
}

Verdict classify_dire(const ImageArray& x, const DiffusionOracle& oracle, double threshold) {
  return verdict_for_score(dire_score(compute_dire(x, oracle)), threshold);
}

Verdict classify_dire(const ImageArray& x, const DiffusionOracle& oracle, const ScoreHead& head) {
  return head(dire_score(compute_dire(x, oracle)));
}

DiffusionOracle identity_oracle(int resolution) {
  auto id = [](const ImageArray& x) { return x; };
  return DiffusionOracle{"identity", 0, resolution, id, id};
}

// ---------------------------------------------------------------- toy diffusion

namespace {

constexpr int kTrainSteps = 1000;
constexpr int kFrequencies = 4;  // per axis, per channel

std::vector<double> dct_basis(int n, int u, int v) {
  const double au = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  const double av = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  std::vector<double> b(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      b[static_cast<std::size_t>(y) * n + x] = au * av * std::cos(std::numbers::pi * (2 * y + 1) * u / (2.0 * n)) *
                                               std::cos(std::numbers::pi * (2 * x + 1) * v / (2.0 * n));
  return b;
}

}  // namespace

ToyDiffusion::ToyDiffusion(int step_count, std::uint64_t seed, int resolution)
    : step_count_(step_count), seed_(seed), resolution_(resolution) {
  if (step_count < 1) fail(ErrorKind::InvalidArgument, "toy oracle step_count must be at least 1");
  if (step_count > kTrainSteps) fail(ErrorKind::InvalidArgument, "toy oracle step_count exceeds 1000");
  if (resolution < kFrequencies) fail(ErrorKind::InvalidArgument, "toy oracle resolution too small");

  // Linear beta schedule over 1000 training steps, DDIM-respaced.
  std::vector<double> full(kTrainSteps);
  double prod = 1.0;
  for (int t = 0; t < kTrainSteps; ++t) {
    const double beta = 1e-4 + (0.02 - 1e-4) * t / (kTrainSteps - 1);
    prod *= 1.0 - beta;
    full[t] = prod;
  }
  alpha_bar_.push_back(1.0);
  const int stride = kTrainSteps / step_count;
  for (int k = 0; k < step_count; ++k) alpha_bar_.push_back(full[static_cast<std::size_t>(k * stride)]);

  // Each channel carries the lowest kFrequencies^2 DCT patterns; weights decay
  // with frequency and are jittered by the seed. Pixel variance ~0.1.
  Rng rng(seed);
  const double plane = static_cast<double>(resolution) * resolution;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> weights;
    for (int u = 0; u < kFrequencies; ++u)
      for (int v = 0; v < kFrequencies; ++v) weights.push_back(rng.uniform(0.5, 1.5) / (1.0 + u + v));
    double total = 0.0;
    for (double w : weights) total += w;
    std::size_t k = 0;
    for (int u = 0; u < kFrequencies; ++u)
      for (int v = 0; v < kFrequencies; ++v)
        components_.push_back({c, dct_basis(resolution, u, v), 0.1 * plane * weights[k++] / total});
  }
}

ImageArray ToyDiffusion::apply(const ImageArray& y, const std::function<double(double)>& gain) const {
  if (y.height != resolution_ || y.width != resolution_)
    fail(ErrorKind::Shape, "toy diffusion expects " + std::to_string(resolution_) + "x" + std::to_string(resolution_) +
                               " images");
  // y = sum_k c_k b_k + r with r orthogonal to the subspace
  const std::size_t plane = y.plane();
  const double floor_gain = gain(floor_variance_);
  ImageArray out = y;
  for (auto& v : out.values) v *= floor_gain;
  for (const auto& comp : components_) {
    const double* src = y.values.data() + comp.channel * plane;
    double coeff = 0.0;
    for (std::size_t i = 0; i < plane; ++i) coeff += comp.basis[i] * src[i];
    const double delta = (gain(comp.variance + floor_variance_) - floor_gain) * coeff;
    double* dst = out.values.data() + comp.channel * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] += delta * comp.basis[i];
  }
  return out;
}

ImageArray ToyDiffusion::denoise(const ImageArray& y, double alpha_bar) const {
  // x0 ~ N(0, variance) per direction, y = sqrt(a) x0 + sqrt(1 - a) eps
  const double sa = std::sqrt(alpha_bar);
  return apply(y, [&](double var) { return sa * var / (alpha_bar * var + 1.0 - alpha_bar); });
}

// DDIM move from level alpha_from to alpha_to, with the noise estimate taken
// from the model queried at alpha_model.
ImageArray ToyDiffusion::ddim_step(const ImageArray& x, double alpha_from, double alpha_to, double alpha_model) const {
  return apply(x, [&](double var) {
    const double eps_gain = std::sqrt(1.0 - alpha_model) / (alpha_model * var + 1.0 - alpha_model);
    const double x0_gain = (1.0 - std::sqrt(1.0 - alpha_from) * eps_gain) / std::sqrt(alpha_from);
    return std::sqrt(alpha_to) * x0_gain + std::sqrt(1.0 - alpha_to) * eps_gain;
  });
}

ImageArray ToyDiffusion::invert(const ImageArray& x) const {
  // Standard DDIM inversion: the noise at the current point is predicted
  // with the next (noisier) level's timestep.
  ImageArray cur = x;
  for (int k = 0; k < step_count_; ++k)
    cur = ddim_step(cur, alpha_bar_[static_cast<std::size_t>(k)], alpha_bar_[static_cast<std::size_t>(k + 1)],
                    alpha_bar_[static_cast<std::size_t>(k + 1)]);
  return cur;
}

ImageArray ToyDiffusion::reconstruct(const ImageArray& noise) const {
  ImageArray cur = noise;
  for (int k = step_count_; k >= 1; --k)
    cur = ddim_step(cur, alpha_bar_[static_cast<std::size_t>(k)], alpha_bar_[static_cast<std::size_t>(k - 1)],
                    alpha_bar_[static_cast<std::size_t>(k)]);
  return cur;
}

ImageArray ToyDiffusion::sample(Rng& rng) const {
  ImageArray noise(resolution_, resolution_);
  for (auto& v : noise.values) v = rng.normal();
  return reconstruct(noise);
}

DiffusionOracle ToyDiffusion::oracle() const {
  auto self = std::make_shared<const ToyDiffusion>(*this);
  return DiffusionOracle{"toy", step_count_, resolution_,
                         [self](const ImageArray& x) { return self->invert(x); },
                         [self](const ImageArray& z) { return self->reconstruct(z); }};
}

DiffusionOracle toy_oracle(int step_count, std::uint64_t seed, int resolution) {
  return ToyDiffusion(step_count, seed, resolution).oracle();
}

void save_oracle_file(const std::filesystem::path& path, const std::string& kind, int steps, std::uint64_t seed,
                      int resolution) {
  nlohmann::json j{{"kind", kind}, {"steps", steps}, {"seed", seed}, {"resolution", resolution}};
  write_text_file(path, j.dump(2) + "\n");
}

DiffusionOracle load_oracle_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Oracle, "cannot parse oracle file " + path.string() + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::Oracle, std::string("cannot load oracle: ") + e.what());
  }
  try {
    const auto kind = j.at("kind").get<std::string>();
    const int resolution = j.value("resolution", 32);
    if (kind == "identity") return identity_oracle(resolution);
    if (kind == "toy") return toy_oracle(j.at("steps").get<int>(), j.at("seed").get<std::uint64_t>(), resolution);
    fail(ErrorKind::Oracle, "unknown oracle kind '" + kind + "' in " + path.string());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Oracle, "invalid oracle file " + path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Oracle) throw;
    fail(ErrorKind::Oracle, "invalid oracle file " + path.string() + ": " + e.what());
  }
}

std::string serialize_dire_scores(std::span<const DireScoreRecord> records, double threshold) {
  TableFile table;
  table.directives["method"] = "DIRE";
  table.directives["threshold"] = format_exact(threshold);
  table.columns = {"path", "score", "verdict"};
  for (const auto& r : records)
    table.rows.push_back({0, {r.path, format_exact(r.score), std::string(to_string(r.verdict))}});
  return render_table(table);
}

std::vector<DireScoreRecord> parse_dire_scores(std::string_view text, std::string_view source) {
  const TableFile table = parse_table(text, source);
  const auto p = table.require_column("path", source);
  const auto s = table.require_column("score", source);
  const auto v = table.require_column("verdict", source);
  std::vector<DireScoreRecord> out;
  for (const auto& row : table.rows) {
    DireScoreRecord r;
    r.path = row.fields[p];
    try {
      r.score = std::stod(row.fields[s]);
      r.verdict = verdict_from_string(row.fields[v]);
    } catch (const std::exception& e) {
      fail(ErrorKind::Parse, std::string(source) + ":" + std::to_string(row.line) + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

void save_dire_map(const std::filesystem::path& path, const DireMap& map) {
  ImageArray img(map.height, map.width);
  for (std::size_t i = 0; i < map.values.size(); ++i) img.values[i] = map.values[i] / 2.0;
  Normalization unit;
  unit.mean = {0.0, 0.0, 0.0};
  unit.std = {1.0, 1.0, 1.0};
  save_png(path, img, unit);
}

}  // namespace aigi
