#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aigi/data.hpp"
#include "aigi/encoder.hpp"
#include "aigi/registry.hpp"
#include "aigi/tensor.hpp"

namespace aigi {

/// Adam hyperparameters; defaults are the standard fine-tuning recipe.
struct TrainConfig {
  int epochs = 12;
  std::size_t batch_size = 16;
  double learning_rate = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  /// Treat every same-class pair in a batch as a positive (default: diagonal only).
  bool multi_positive = false;
  /// Blur/JPEG augmentation probability; 0 disables.
  double augment_probability = 0.0;

  /// Throws a config error naming the first invalid field.
  void validate() const;
};

/// Mean cross-entropy over rows and over columns of a square logit matrix
/// with diagonal targets, averaged.
double symmetric_loss(const Matrix& logits);

struct LossGradient {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits
};

/// `positives` (optional, square 0/1, symmetric) marks target pairs; row and
/// column targets are the mask normalized along that axis.
LossGradient symmetric_loss_with_grad(const Matrix& logits, const Matrix* positives = nullptr);

/// Same-class mask for a batch of class ids.
Matrix same_class_mask(std::span<const int> class_ids);

struct BatchGradient {
  double loss = 0.0;
  Gradients grads;
};

/// Contrastive loss of a batch of images against their class captions and
/// the gradient with respect to every bundle parameter.
BatchGradient contrastive_gradients(const EncoderBundle& bundle, std::span<const ImageArray> images,
                                    std::span<const int> class_ids, const Registry& registry,
                                    bool multi_positive = false);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(const std::vector<Parameter>& params);
  void step(std::vector<Parameter>& params, const Gradients& grads, const TrainConfig& config);

  long steps() const noexcept { return steps_; }
  const Gradients& first_moment() const noexcept { return m_; }
  const Gradients& second_moment() const noexcept { return v_; }

 private:
  Gradients m_;
  Gradients v_;
  long steps_ = 0;
};

struct LossRecord {
  int epoch = 0;
  long step = 0;
  double loss = 0.0;
};

struct TrainState {
  explicit TrainState(EncoderBundle b) : bundle(std::move(b)), optimizer(bundle.parameters()) {}

  EncoderBundle bundle;
  AdamOptimizer optimizer;
  int epoch = 0;
  std::vector<LossRecord> history;
};

/// One Adam update over all trainable parameters; returns the pre-update
/// batch loss. A non-finite loss throws a training error listing `batch_ids`.
double train_step(TrainState& state, std::span<const ImageArray> images, std::span<const int> class_ids,
                  const Registry& registry, const TrainConfig& config,
                  std::span<const std::string> batch_ids = {});

struct FitResult {
  EncoderBundle bundle;
  std::vector<LossRecord> history;
  std::vector<std::filesystem::path> checkpoints;
};

using ProgressFn = std::function<void(const LossRecord&)>;

/// Trains for config.epochs epochs over shuffled batches of the train split.
/// With a run directory, writes checkpoints/epoch_NNN.ckpt after each epoch,
/// final.ckpt, and loss_history.tsv (epoch, step, loss per step).
FitResult fit(const TrainConfig& config, const DatasetManifest& manifest, const Registry& registry,
              EncoderBundle bundle, const std::filesystem::path& run_dir = {}, ProgressFn progress = {},
              ImageLoader loader = {});

}  // namespace aigi
