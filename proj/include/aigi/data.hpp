#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "aigi/image.hpp"
#include "aigi/registry.hpp"

namespace aigi {

enum class Split { Train, Test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view text);

struct SampleRecord {
  std::filesystem::path path;  // as written; relative paths resolve against the manifest root
  int class_id = 0;
  Split split = Split::Train;
};

class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::filesystem::path root) : root_(std::move(root)) {}

  /// Appends a record; a duplicate (path, split) pair is a data error.
  void add(SampleRecord record);

  const std::filesystem::path& root() const noexcept { return root_; }
  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// Indices into records() belonging to a split, in manifest order.
  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const { return indices(split).size(); }
  std::map<int, std::size_t> per_class_counts(Split split) const;

  std::filesystem::path resolve(const SampleRecord& record) const;
  std::filesystem::path resolve(std::size_t index) const { return resolve(records_.at(index)); }

  /// Text form, with the `root` directive when the root is not the manifest's directory.
  std::string serialize(const Registry& registry) const;
  void save(const std::filesystem::path& path, const Registry& registry) const;

 private:
  std::filesystem::path root_;
  std::vector<SampleRecord> records_;
};

/// Warn skips missing files with a warning; Ignore keeps the records
/// without checking (labels only).
enum class MissingFilePolicy { Fail, Warn, Ignore };

/// Parses a manifest (columns: path, abbreviation, split; any order). The
/// root is the manifest's directory, or the `root` directive resolved
/// against it.
DatasetManifest load_manifest(const std::filesystem::path& path, const Registry& registry,
                              MissingFilePolicy missing = MissingFilePolicy::Fail);
DatasetManifest parse_manifest(std::string_view text, std::string_view source,
                               const std::filesystem::path& base_dir, const Registry& registry,
                               MissingFilePolicy missing = MissingFilePolicy::Fail);

/// One subdirectory per class abbreviation; every PNG/JPEG inside becomes a
/// record of `split`. Files are listed in sorted order.
DatasetManifest scan_directory(const std::filesystem::path& root, const Registry& registry,
                               Split split = Split::Test);

/// Shuffled record indices for one epoch, cut into batches; the final
/// partial batch is kept. Pure function of its arguments.
std::vector<std::vector<std::size_t>> epoch_batches(const DatasetManifest& manifest, Split split,
                                                    std::size_t batch_size, std::uint64_t seed, int epoch);

struct Batch {
  std::vector<std::size_t> record_indices;
  std::vector<ImageArray> images;
  std::vector<int> class_ids;
};

using ImageLoader = std::function<ImageArray(const std::filesystem::path&)>;

/// Decodes through load_image and keeps every preprocessed array in memory.
class CachedImageLoader {
 public:
  CachedImageLoader(int resolution, Normalization norm = {}) : resolution_(resolution), norm_(norm) {}
  const ImageArray& operator()(const std::filesystem::path& path);

 private:
  int resolution_;
  Normalization norm_;
  std::map<std::filesystem::path, ImageArray> cache_;
};

/// Streams the batches of one split epoch by epoch.
class BatchStream {
 public:
  BatchStream(const DatasetManifest& manifest, Split split, std::size_t batch_size, std::uint64_t seed,
              ImageLoader loader);

  std::size_t batches_per_epoch() const noexcept { return batches_per_epoch_; }
  void start_epoch(int epoch);
  std::optional<Batch> next();

  /// Optional per-image transform, called with a seed derived from
  /// (stream seed, epoch, record index).
  void set_transform(std::function<ImageArray(const ImageArray&, std::uint64_t)> transform) {
    transform_ = std::move(transform);
  }

 private:
  const DatasetManifest* manifest_;
  Split split_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  ImageLoader loader_;
  std::function<ImageArray(const ImageArray&, std::uint64_t)> transform_;
  std::size_t batches_per_epoch_ = 0;
  int epoch_ = 0;
  std::vector<std::vector<std::size_t>> order_;
  std::size_t cursor_ = 0;
};

}  // namespace aigi
