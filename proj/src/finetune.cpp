#include "aigi/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "aigi/common.hpp"

namespace aigi {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::Config, "invalid training config: " + what); };
  if (epochs < 1) bad("epochs must be at least 1");
  if (batch_size < 1) bad("batch_size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) bad("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) bad("beta2 must lie in (0, 1)");
  if (!(eps > 0.0)) bad("eps must be positive");
  if (!(weight_decay > 0.0) || !std::isfinite(weight_decay)) bad("weight_decay must be positive");
  if (!(augment_probability >= 0.0 && augment_probability <= 1.0)) bad("augment_probability must lie in [0, 1]");
}

namespace {

void check_square(const Matrix& logits) {
  if (logits.rows != logits.cols)
    fail(ErrorKind::Shape, "symmetric loss needs a square matrix, got " + std::to_string(logits.rows) + "x" +
                               std::to_string(logits.cols));
  if (logits.rows == 0) fail(ErrorKind::Shape, "symmetric loss of an empty batch");
}

}  // namespace

LossGradient symmetric_loss_with_grad(const Matrix& logits, const Matrix* positives) {
  check_square(logits);
  const std::size_t n = logits.rows;
  if (positives && (positives->rows != n || positives->cols != n))
    fail(ErrorKind::Shape, "positive mask does not match the logit matrix");

  auto target = [&](std::size_t i, std::size_t j) -> double {
    return positives ? (*positives)(i, j) : (i == j ? 1.0 : 0.0);
  };

  LossGradient out;
  out.grad = Matrix(n, n);
  const double weight = 0.5 / static_cast<double>(n);
  double row_loss = 0.0, col_loss = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY, tsum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      mx = std::max(mx, logits(i, j));
      tsum += target(i, j);
    }
    if (!(tsum > 0.0)) fail(ErrorKind::InvalidArgument, "row without a positive target");
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(logits(i, j) - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) {
      const double t = target(i, j) / tsum;
      const double logp = logits(i, j) - log_z;
      if (t > 0.0) row_loss -= t * logp;
      out.grad(i, j) += weight * (std::exp(logp) - t);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    double mx = -INFINITY, tsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx = std::max(mx, logits(i, j));
      tsum += target(i, j);
    }
    if (!(tsum > 0.0)) fail(ErrorKind::InvalidArgument, "column without a positive target");
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(logits(i, j) - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = target(i, j) / tsum;
      const double logp = logits(i, j) - log_z;
      if (t > 0.0) col_loss -= t * logp;
      out.grad(i, j) += weight * (std::exp(logp) - t);
    }
  }
  out.loss = 0.5 * (row_loss + col_loss) / static_cast<double>(n);
  return out;
}

double symmetric_loss(const Matrix& logits) { return symmetric_loss_with_grad(logits).loss; }

Matrix same_class_mask(std::span<const int> class_ids) {
  Matrix m(class_ids.size(), class_ids.size());
  for (std::size_t i = 0; i < class_ids.size(); ++i)
    for (std::size_t j = 0; j < class_ids.size(); ++j) m(i, j) = class_ids[i] == class_ids[j] ? 1.0 : 0.0;
  return m;
}

BatchGradient contrastive_gradients(const EncoderBundle& bundle, std::span<const ImageArray> images,
                                    std::span<const int> class_ids, const Registry& registry,
                                    bool multi_positive) {
  const std::size_t n = images.size();
  if (n == 0) fail(ErrorKind::InvalidArgument, "empty training batch");
  if (class_ids.size() != n) fail(ErrorKind::Shape, "batch has " + std::to_string(n) + " images but " +
                                                        std::to_string(class_ids.size()) + " labels");

  std::vector<ImageTrace> image_traces(n);
  std::vector<TextTrace> text_traces(n);
  std::vector<Vector> raw_img(n), raw_txt(n), u(n), v(n);
  std::vector<double> img_norm(n), txt_norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw_img[i] = bundle.raw_image_embedding(images[i], &image_traces[i]);
    raw_txt[i] = bundle.raw_text_embedding(bundle.caption(registry, class_ids[i]), &text_traces[i]);
    img_norm[i] = l2_norm(raw_img[i]);
    txt_norm[i] = l2_norm(raw_txt[i]);
    if (!std::isfinite(img_norm[i]) || !std::isfinite(txt_norm[i])) {
      BatchGradient bad;
      bad.loss = std::numeric_limits<double>::quiet_NaN();
      bad.grads = zero_gradients(bundle.parameters());
      return bad;
    }
    u[i] = normalized(raw_img[i]);
    v[i] = normalized(raw_txt[i]);
  }

  const double scale = std::exp(bundle.logit_scale());
  const Matrix logits = similarity_logits(u, v, bundle.logit_scale());
  const Matrix mask = multi_positive ? same_class_mask(class_ids) : Matrix{};
  const LossGradient lg = symmetric_loss_with_grad(logits, multi_positive ? &mask : nullptr);

  BatchGradient out;
  out.loss = lg.loss;
  out.grads = zero_gradients(bundle.parameters());

  double d_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d_scale += lg.grad(i, j) * logits(i, j);
  out.grads[bundle.parameter_index("logit_scale")][0] = d_scale;

  const std::size_t d = static_cast<std::size_t>(bundle.embed_dim());
  // d loss / d unit embedding, then through the normalization
  auto through_norm = [d](const Vector& unit, const Vector& d_unit, double norm) {
    const double proj = dot(unit, d_unit);
    Vector d_raw(d);
    for (std::size_t k = 0; k < d; ++k) d_raw[k] = (d_unit[k] - unit[k] * proj) / norm;
    return d_raw;
  };
  for (std::size_t i = 0; i < n; ++i) {
    Vector du(d, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double g = scale * lg.grad(i, j);
      for (std::size_t k = 0; k < d; ++k) du[k] += g * v[j][k];
    }
    bundle.backward_image(image_traces[i], through_norm(u[i], du, img_norm[i]), out.grads);
  }
  for (std::size_t j = 0; j < n; ++j) {
    Vector dv(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = scale * lg.grad(i, j);
      for (std::size_t k = 0; k < d; ++k) dv[k] += g * u[i][k];
    }
    bundle.backward_text(text_traces[j], through_norm(v[j], dv, txt_norm[j]), out.grads);
  }
  return out;
}

AdamOptimizer::AdamOptimizer(const std::vector<Parameter>& params)
    : m_(zero_gradients(params)), v_(zero_gradients(params)) {}

void AdamOptimizer::step(std::vector<Parameter>& params, const Gradients& grads, const TrainConfig& config) {
  if (grads.size() != params.size() || m_.size() != params.size())
    fail(ErrorKind::Shape, "optimizer state does not match the parameter list");
  ++steps_;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(steps_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& value = params[p].value;
    const double decay = params[p].decay ? config.weight_decay : 0.0;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grads[p][k] + decay * value[k];
      m_[p][k] = config.beta1 * m_[p][k] + (1.0 - config.beta1) * g;
      v_[p][k] = config.beta2 * v_[p][k] + (1.0 - config.beta2) * g * g;
      const double m_hat = m_[p][k] / bc1;
      const double v_hat = v_[p][k] / bc2;
      value[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

double train_step(TrainState& state, std::span<const ImageArray> images, std::span<const int> class_ids,
                  const Registry& registry, const TrainConfig& config, std::span<const std::string> batch_ids) {
  BatchGradient bg = contrastive_gradients(state.bundle, images, class_ids, registry, config.multi_positive);
  bool finite = std::isfinite(bg.loss);
  for (const auto& g : bg.grads)
    for (double x : g) finite = finite && std::isfinite(x);
  if (!finite) {
    std::string ids;
    for (const auto& id : batch_ids) ids += (ids.empty() ? "" : ", ") + id;
    fail(ErrorKind::Training, "non-finite loss (" + format_exact(bg.loss) + ") at epoch " +
                                  std::to_string(state.epoch) + ", optimizer step " +
                                  std::to_string(state.optimizer.steps() + 1) +
                                  (ids.empty() ? std::string{} : "; batch: " + ids));
  }
  state.optimizer.step(state.bundle.parameters(), bg.grads, config);
  state.bundle.clamp_logit_scale();
  return bg.loss;
}

FitResult fit(const TrainConfig& config, const DatasetManifest& manifest, const Registry& registry,
              EncoderBundle bundle, const std::filesystem::path& run_dir, ProgressFn progress, ImageLoader loader) {
  config.validate();
  if (manifest.count(Split::Train) == 0) fail(ErrorKind::Data, "train split is empty");
  if (bundle.registry_fingerprint() != registry.fingerprint())
    fail(ErrorKind::Config, "bundle was built for a different class registry");
  if (!loader) {
    auto cache = std::make_shared<CachedImageLoader>(bundle.resolution());
    loader = [cache](const std::filesystem::path& p) { return (*cache)(p); };
  }

  BatchStream stream(manifest, Split::Train, config.batch_size, config.seed, loader);
  if (config.augment_probability > 0.0) {
    const double prob = config.augment_probability;
    stream.set_transform([prob](const ImageArray& img, std::uint64_t seed) { return augment(img, prob, seed); });
  }

  std::ofstream history_file;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir / "checkpoints");
    history_file.open(run_dir / "loss_history.tsv", std::ios::trunc);
    if (!history_file) fail(ErrorKind::Io, "cannot write " + (run_dir / "loss_history.tsv").string());
    history_file << "epoch\tstep\tloss\n";
  }

  TrainState state(std::move(bundle));
  FitResult result{state.bundle, {}, {}};
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    state.epoch = epoch;
    stream.start_epoch(epoch - 1);
    while (auto batch = stream.next()) {
      std::vector<std::string> ids;
      for (auto idx : batch->record_indices) ids.push_back(manifest.records()[idx].path.generic_string());
      const double loss = train_step(state, batch->images, batch->class_ids, registry, config, ids);
      const LossRecord rec{epoch, state.optimizer.steps(), loss};
      state.history.push_back(rec);
      if (history_file.is_open()) history_file << rec.epoch << '\t' << rec.step << '\t' << format_exact(loss) << '\n';
      if (progress) progress(rec);
    }
    if (history_file.is_open()) history_file.flush();
    if (!run_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
      const auto path = run_dir / "checkpoints" / name;
      state.bundle.save(path);
      result.checkpoints.push_back(path);
    }
  }
  if (!run_dir.empty()) {
    state.bundle.save(run_dir / "final.ckpt");
    result.checkpoints.push_back(run_dir / "final.ckpt");
  }
  result.bundle = std::move(state.bundle);
  result.history = std::move(state.history);
  return result;
}

}  // namespace aigi
