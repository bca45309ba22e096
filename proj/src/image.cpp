#include "aigi/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "aigi/common.hpp"

namespace aigi {

namespace {

ImageArray from_rgb8(const cv::Mat& rgb, const Normalization& norm) {
  ImageArray out(rgb.rows, rgb.cols);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb.cols; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(c, y, x) = (row[x][c] / 255.0 - norm.mean[c]) / norm.std[c];
  }
  return out;
}

cv::Mat to_rgb8(const ImageArray& image, const Normalization& norm) {
  cv::Mat rgb(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = rgb.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = (image.at(c, y, x) * norm.std[c] + norm.mean[c]) * 255.0;
        row[x][c] = cv::saturate_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
  }
  return rgb;
}

cv::Mat to_interleaved(const ImageArray& image) {
  cv::Mat m(image.height, image.width, CV_64FC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = m.ptr<cv::Vec3d>(y);
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) row[x][c] = image.at(c, y, x);
  }
  return m;
}

ImageArray from_interleaved(const cv::Mat& m) {
  ImageArray out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3d>(y);
    for (int x = 0; x < m.cols; ++x)
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = row[x][c];
  }
  return out;
}

std::filesystem::path cache_entry(const std::filesystem::path& dir, const std::filesystem::path& path,
                                  int resolution, const Normalization& norm) {
  std::error_code ec;
  const auto abs = std::filesystem::absolute(path, ec);
  const auto size = std::filesystem::file_size(path, ec);
  const auto mtime = std::filesystem::last_write_time(path, ec).time_since_epoch().count();
  std::string key = abs.string() + '|' + std::to_string(size) + '|' + std::to_string(mtime) + '|' +
                    std::to_string(resolution);
  for (int c = 0; c < 3; ++c) key += '|' + format_exact(norm.mean[c]) + ',' + format_exact(norm.std[c]);
  return dir / (hex64(fnv1a64(key)) + ".img");
}

bool read_cached(const std::filesystem::path& file, ImageArray& out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return false;
  std::int32_t dims[2];
  if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) return false;
  if (dims[0] <= 0 || dims[1] <= 0) return false;
  ImageArray img(dims[0], dims[1]);
  if (!in.read(reinterpret_cast<char*>(img.values.data()),
               static_cast<std::streamsize>(img.values.size() * sizeof(double))))
    return false;
  out = std::move(img);
  return true;
}

void write_cached(const std::filesystem::path& file, const ImageArray& img) {
  std::error_code ec;
  std::filesystem::create_directories(file.parent_path(), ec);
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return;
    const std::int32_t dims[2] = {img.height, img.width};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(img.values.data()),
              static_cast<std::streamsize>(img.values.size() * sizeof(double)));
    if (!out) return;
  }
  std::filesystem::rename(tmp, file, ec);
}

}  // namespace

ImageArray preprocess(std::span<const std::uint8_t> bytes, int resolution, const Normalization& norm,
                      std::string_view source) {
  if (resolution <= 0) fail(ErrorKind::InvalidArgument, "preprocess: resolution must be positive");
  cv::Mat decoded;
  if (!bytes.empty()) {
    const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    try {
      decoded = cv::imdecode(buffer, cv::IMREAD_COLOR);
    } catch (const cv::Exception&) {
      decoded.release();
    }
  }
  if (decoded.empty()) fail(ErrorKind::Decode, "cannot decode image: " + std::string(source));

  cv::Mat rgb;
  cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB);

  const int short_side = std::min(rgb.rows, rgb.cols);
  if (short_side != resolution) {
    const double scale = static_cast<double>(resolution) / short_side;
    const int new_w = rgb.cols == short_side ? resolution
                                             : std::max(resolution, static_cast<int>(std::lround(rgb.cols * scale)));
    const int new_h = rgb.rows == short_side ? resolution
                                             : std::max(resolution, static_cast<int>(std::lround(rgb.rows * scale)));
    cv::Mat resized;
    cv::resize(rgb, resized, cv::Size(new_w, new_h), 0, 0, cv::INTER_CUBIC);
    rgb = resized;
  }
  const int x0 = (rgb.cols - resolution) / 2;
  const int y0 = (rgb.rows - resolution) / 2;
  const cv::Mat cropped = rgb(cv::Rect(x0, y0, resolution, resolution));
  return from_rgb8(cropped, norm);
}

ImageArray load_image(const std::filesystem::path& path, int resolution, const Normalization& norm) {
  std::filesystem::path cache_file;
  if (const char* dir = std::getenv("AIGI_DECODE_CACHE"); dir && *dir) {
    cache_file = cache_entry(dir, path, resolution, norm);
    ImageArray cached;
    if (read_cached(cache_file, cached)) return cached;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open image: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ImageArray image = preprocess(bytes, resolution, norm, path.string());
  if (!cache_file.empty()) write_cached(cache_file, image);
  return image;
}

std::vector<std::uint8_t> encode_png(const ImageArray& image, const Normalization& norm) {
  cv::Mat bgr;
  cv::cvtColor(to_rgb8(image, norm), bgr, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out)) fail(ErrorKind::Io, "png encoding failed");
  return out;
}

void save_png(const std::filesystem::path& path, const ImageArray& image, const Normalization& norm) {
  const auto bytes = encode_png(image, norm);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

AugmentChoice choose_augmentation(double probability, std::uint64_t seed, const AugmentConfig& config) {
  if (!(probability >= 0.0 && probability <= 1.0))
    fail(ErrorKind::InvalidArgument, "augment probability must lie in [0, 1]");
  AugmentChoice choice;
  if (probability == 0.0) return choice;
  Rng rng(seed);
  if (!(rng.uniform() < probability)) return choice;
  if (rng.uniform() < 0.5) {
    choice.kind = Augmentation::Blur;
    // (0, max]: a zero sigma would make the blur an identity
    choice.sigma = config.max_blur_sigma * (1.0 - rng.uniform());
  } else {
    choice.kind = Augmentation::Jpeg;
    choice.quality = static_cast<int>(rng.uniform_int(config.min_jpeg_quality, config.max_jpeg_quality));
  }
  return choice;
}

ImageArray apply_augmentation(const ImageArray& image, const AugmentChoice& choice, const Normalization& norm) {
  switch (choice.kind) {
    case Augmentation::None:
      return image;
    case Augmentation::Blur: {
      const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * choice.sigma)));
      const int k = 2 * radius + 1;
      cv::Mat blurred;
      cv::GaussianBlur(to_interleaved(image), blurred, cv::Size(k, k), choice.sigma, choice.sigma,
                       cv::BORDER_REFLECT_101);
      return from_interleaved(blurred);
    }
    case Augmentation::Jpeg: {
      cv::Mat bgr;
      cv::cvtColor(to_rgb8(image, norm), bgr, cv::COLOR_RGB2BGR);
      std::vector<std::uint8_t> encoded;
      cv::imencode(".jpg", bgr, encoded, {cv::IMWRITE_JPEG_QUALITY, choice.quality});
      cv::Mat decoded = cv::imdecode(encoded, cv::IMREAD_COLOR);
      cv::Mat rgb;
      cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB);
      return from_rgb8(rgb, norm);
    }
  }
  return image;
}

ImageArray augment(const ImageArray& image, double probability, std::uint64_t seed, const Normalization& norm,
                   const AugmentConfig& config) {
  return apply_augmentation(image, choose_augmentation(probability, seed, config), norm);
}

}  // namespace aigi
