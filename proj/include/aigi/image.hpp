#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace aigi {

/// Per-channel affine normalization applied after decoding: (v/255 - mean) / std.
struct Normalization {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> std{0.5, 0.5, 0.5};
};

/// Three-channel RGB image in planar (channel, row, column) order.
struct ImageArray {
  static constexpr int channels = 3;

  int height = 0;
  int width = 0;
  std::vector<double> values;

  ImageArray() = default;
  ImageArray(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(channels) * h * w, fill) {}

  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) { return values[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const {
    return values[c * plane() + static_cast<std::size_t>(y) * width + x];
  }
  bool same_shape(const ImageArray& other) const noexcept {
    return height == other.height && width == other.width;
  }
  bool operator==(const ImageArray&) const = default;
};

/// Decodes PNG/JPEG bytes, resizes (bicubic) so the short side equals
/// `resolution`, center-crops to a square and normalizes.
/// Throws a decode error carrying `source` when the bytes are not an image.
ImageArray preprocess(std::span<const std::uint8_t> bytes, int resolution,
                      const Normalization& norm = {}, std::string_view source = "<memory>");

/// Reads a file and runs preprocess. When AIGI_DECODE_CACHE names a
/// directory, preprocessed arrays are cached there keyed by path, size,
/// modification time, resolution and normalization.
ImageArray load_image(const std::filesystem::path& path, int resolution, const Normalization& norm = {});

/// Maps normalized values back to 8-bit RGB (clamped) and encodes.
std::vector<std::uint8_t> encode_png(const ImageArray& image, const Normalization& norm = {});
void save_png(const std::filesystem::path& path, const ImageArray& image, const Normalization& norm = {});

enum class Augmentation { None, Blur, Jpeg };

struct AugmentConfig {
  double max_blur_sigma = 3.0;
  int min_jpeg_quality = 30;
  int max_jpeg_quality = 100;
};

struct AugmentChoice {
  Augmentation kind = Augmentation::None;
  double sigma = 0.0;  // blur only
  int quality = 0;     // jpeg only
};

/// Draws the augmentation decision for a seed; pure.
AugmentChoice choose_augmentation(double probability, std::uint64_t seed, const AugmentConfig& config = {});

/// With the given probability applies exactly one of Gaussian blur or JPEG
/// recompression (chosen uniformly); otherwise returns the input unchanged.
ImageArray augment(const ImageArray& image, double probability, std::uint64_t seed,
                   const Normalization& norm = {}, const AugmentConfig& config = {});
ImageArray apply_augmentation(const ImageArray& image, const AugmentChoice& choice,
                              const Normalization& norm = {});

}  // namespace aigi
