#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aigi/image.hpp"
#include "aigi/registry.hpp"
#include "aigi/tensor.hpp"

namespace aigi {

using Embedding = Vector;

/// Upper bound on exp(logit_scale).
inline constexpr double kMaxLogitScale = 100.0;

/// Token ids padded to the context length; padding only at the tail.
struct TokenSequence {
  std::vector<int> ids;
  std::size_t length = 0;  // number of non-padding tokens
};

/// Whitespace word-id tokenizer over a fixed vocabulary.
class Tokenizer {
 public:
  static constexpr int pad_id = 0;
  static constexpr int unk_id = 1;

  Tokenizer() = default;
  Tokenizer(std::vector<std::string> words, std::size_t context_length);
  /// Vocabulary: every distinct word of the captions, in first-seen order.
  static Tokenizer from_captions(std::span<const std::string> captions, std::size_t context_length);

  /// Lowercases and splits on whitespace; unknown words map to unk_id.
  /// Empty captions and captions longer than the context are errors.
  TokenSequence encode(std::string_view caption) const;

  std::size_t vocab_size() const noexcept { return words_.size() + 2; }
  std::size_t context_length() const noexcept { return context_length_; }
  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::size_t context_length_ = 16;
};

struct TinyBackboneConfig {
  int resolution = 32;  // multiple of 4
  int embed_dim = 64;
  std::array<int, 3> conv_channels{16, 32, 64};
  int token_dim = 64;
  int context_length = 16;
  bool caption_prefix = false;
};

/// Per-image intermediate values kept for backpropagation.
struct ImageTrace {
  ImageArray input;
  std::array<std::vector<double>, 3> pre;   // conv outputs before activation
  std::array<std::vector<double>, 3> post;  // after activation
  std::array<std::vector<double>, 2> pooled;
  Vector feature;  // global average pool of the last block
};

struct TextTrace {
  TokenSequence tokens;
  Vector feature;
};

/// Image encoder, text encoder, both projections and the learnable
/// log-scale temperature. Inference calls are const and thread-safe.
class EncoderBundle {
 public:
  static EncoderBundle create_tiny(const TinyBackboneConfig& config, const Registry& registry,
                                   std::uint64_t seed);

  static EncoderBundle load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::string& backbone() const noexcept { return backbone_; }
  const TinyBackboneConfig& config() const noexcept { return config_; }
  const Tokenizer& tokenizer() const noexcept { return tokenizer_; }
  const std::string& registry_fingerprint() const noexcept { return registry_fingerprint_; }
  int resolution() const noexcept { return config_.resolution; }
  int embed_dim() const noexcept { return config_.embed_dim; }
  bool caption_prefix() const noexcept { return config_.caption_prefix; }
  /// Caption text fed to the text encoder for a class.
  std::string caption(const Registry& registry, int class_id) const {
    return registry.caption_for(class_id, config_.caption_prefix);
  }

  /// Log-space temperature parameter; exp(logit_scale()) <= kMaxLogitScale.
  double logit_scale() const;
  void set_logit_scale(double value);
  void clamp_logit_scale();

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  std::size_t parameter_index(std::string_view name) const;

  /// Unit-norm embeddings, batch order preserved.
  std::vector<Embedding> embed_images(std::span<const ImageArray> images) const;
  std::vector<Embedding> embed_texts(std::span<const std::string> captions) const;

  /// Projected features before normalization.
  Vector raw_image_embedding(const ImageArray& image, ImageTrace* trace = nullptr) const;
  Vector raw_text_embedding(std::string_view caption, TextTrace* trace = nullptr) const;

  /// Accumulate parameter gradients given d(loss)/d(raw embedding).
  void backward_image(const ImageTrace& trace, const Vector& d_raw, Gradients& grads) const;
  void backward_text(const TextTrace& trace, const Vector& d_raw, Gradients& grads) const;

  bool operator==(const EncoderBundle&) const;

 private:
  EncoderBundle() = default;

  std::string backbone_ = "tiny";
  TinyBackboneConfig config_;
  Tokenizer tokenizer_;
  std::string registry_fingerprint_;
  std::vector<Parameter> params_;
};

/// Entry (i, j) = exp(logit_scale) * <img_i, txt_j>.
Matrix similarity_logits(std::span<const Embedding> images, std::span<const Embedding> texts,
                         double logit_scale);

/// Builds bundles from named backbones. "tiny" is always available; other
/// names resolve through registered loaders and fall back to "tiny" with a
/// log line when no loader or no weights are present.
using BackboneLoader = std::function<std::optional<EncoderBundle>(
    const std::filesystem::path& weights, const Registry& registry, const TinyBackboneConfig& config)>;
void register_backbone_loader(const std::string& name, BackboneLoader loader);
EncoderBundle make_bundle(std::string_view backbone, const std::filesystem::path& weights,
                          const Registry& registry, const TinyBackboneConfig& config, std::uint64_t seed);

}  // namespace aigi
