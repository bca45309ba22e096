#include "aigi/data.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

#include "aigi/common.hpp"
#include "aigi/table_file.hpp"

namespace aigi {

namespace fs = std::filesystem;

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split split_from_string(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  fail(ErrorKind::Parse, "unknown split '" + std::string(text) + "' (expected train or test)");
}

void DatasetManifest::add(SampleRecord record) {
  if (record.path.empty()) fail(ErrorKind::Data, "manifest record has an empty path");
  for (const auto& r : records_)
    if (r.split == record.split && r.path == record.path)
      fail(ErrorKind::Data, "duplicate manifest record: " + record.path.string() + " (" +
                                std::string(to_string(record.split)) + ")");
  records_.push_back(std::move(record));
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (records_[i].split == split) out.push_back(i);
  return out;
}

std::map<int, std::size_t> DatasetManifest::per_class_counts(Split split) const {
  std::map<int, std::size_t> counts;
  for (const auto& r : records_)
    if (r.split == split) ++counts[r.class_id];
  return counts;
}

fs::path DatasetManifest::resolve(const SampleRecord& record) const {
  if (record.path.is_absolute() || root_.empty()) return record.path;
  return root_ / record.path;
}

std::string DatasetManifest::serialize(const Registry& registry) const {
  TableFile table;
  if (!root_.empty()) table.directives["root"] = root_.generic_string();
  table.columns = {"path", "abbreviation", "split"};
  for (const auto& r : records_)
    table.rows.push_back({0, {r.path.generic_string(), registry.at(r.class_id).abbreviation,
                              std::string(to_string(r.split))}});
  return render_table(table);
}

void DatasetManifest::save(const fs::path& path, const Registry& registry) const {
  DatasetManifest copy = *this;
  const auto dir = fs::absolute(path).parent_path();
  if (!root_.empty()) {
    const auto abs_root = fs::absolute(root_).lexically_normal();
    copy.root_ = abs_root == dir.lexically_normal() ? fs::path{} : abs_root;
  }
  write_text_file(path, copy.serialize(registry));
}

DatasetManifest parse_manifest(std::string_view text, std::string_view source, const fs::path& base_dir,
                               const Registry& registry, MissingFilePolicy missing) {
  const TableFile table = parse_table(text, source);
  const auto path_col = table.require_column("path", source);
  const auto abbr_col = table.require_column("abbreviation", source);
  const auto split_col = table.require_column("split", source);

  fs::path root = base_dir;
  if (auto it = table.directives.find("root"); it != table.directives.end() && !it->second.empty()) {
    const fs::path r(it->second);
    root = r.is_absolute() ? r : base_dir / r;
  }

  DatasetManifest manifest(root);
  std::size_t missing_count = 0;
  for (const auto& row : table.rows) {
    const std::string where = std::string(source) + ":" + std::to_string(row.line);
    const auto& abbr = row.fields[abbr_col];
    const auto id = registry.find_abbreviation(abbr);
    if (!id) fail(ErrorKind::Lookup, where + ": unknown class abbreviation '" + abbr + "'");
    Split split;
    try {
      split = split_from_string(row.fields[split_col]);
    } catch (const Error& e) {
      fail(ErrorKind::Parse, where + ": " + e.what());
    }
    SampleRecord record{row.fields[path_col], *id, split};
    if (record.path.empty()) fail(ErrorKind::Parse, where + ": empty path");
    if (missing != MissingFilePolicy::Ignore && !fs::exists(manifest.resolve(record))) {
      const std::string msg = where + ": missing image file " + manifest.resolve(record).string();
      if (missing == MissingFilePolicy::Fail) fail(ErrorKind::Data, msg);
      log_warning(msg + " (record skipped)");
      ++missing_count;
      continue;
    }
    try {
      manifest.add(std::move(record));
    } catch (const Error& e) {
      fail(ErrorKind::Data, where + ": " + e.what());
    }
  }
  if (missing_count)
    log_warning(std::string(source) + ": skipped " + std::to_string(missing_count) + " missing image(s)");
  return manifest;
}

DatasetManifest load_manifest(const fs::path& path, const Registry& registry, MissingFilePolicy missing) {
  return parse_manifest(read_text_file(path), path.string(), fs::absolute(path).parent_path(), registry,
                        missing);
}

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

DatasetManifest scan_directory(const fs::path& root, const Registry& registry, Split split) {
  if (!fs::is_directory(root)) fail(ErrorKind::Io, "not a directory: " + root.string());
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());

  std::vector<std::string> unmatched;
  for (const auto& dir : subdirs)
    if (!registry.find_abbreviation(dir.filename().string())) unmatched.push_back(dir.filename().string());
  if (!unmatched.empty()) {
    std::string names;
    for (const auto& n : unmatched) names += (names.empty() ? "" : ", ") + n;
    fail(ErrorKind::Lookup, "subdirectories match no class abbreviation: " + names);
  }

  DatasetManifest manifest(root);
  for (const auto& dir : subdirs) {
    const int id = registry.class_of(dir.filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) manifest.add({f.lexically_relative(root), id, split});
  }
  if (manifest.empty()) log_warning("no images found under " + root.string());
  return manifest;
}

std::vector<std::vector<std::size_t>> epoch_batches(const DatasetManifest& manifest, Split split,
                                                    std::size_t batch_size, std::uint64_t seed, int epoch) {
  if (batch_size < 1) fail(ErrorKind::InvalidArgument, "batch_size must be at least 1");
  auto order = manifest.indices(split);
  if (order.empty()) fail(ErrorKind::Data, "split '" + std::string(to_string(split)) + "' is empty");
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

const ImageArray& CachedImageLoader::operator()(const fs::path& path) {
  auto it = cache_.find(path);
  if (it == cache_.end()) it = cache_.emplace(path, load_image(path, resolution_, norm_)).first;
  return it->second;
}

BatchStream::BatchStream(const DatasetManifest& manifest, Split split, std::size_t batch_size,
                         std::uint64_t seed, ImageLoader loader)
    : manifest_(&manifest), split_(split), batch_size_(batch_size), seed_(seed), loader_(std::move(loader)) {
  if (batch_size < 1) fail(ErrorKind::InvalidArgument, "batch_size must be at least 1");
  const auto n = manifest.count(split);
  if (n == 0) fail(ErrorKind::Data, "split '" + std::string(to_string(split)) + "' is empty");
  batches_per_epoch_ = (n + batch_size - 1) / batch_size;
  start_epoch(0);
}

void BatchStream::start_epoch(int epoch) {
  epoch_ = epoch;
  order_ = epoch_batches(*manifest_, split_, batch_size_, seed_, epoch);
  cursor_ = 0;
}

std::optional<Batch> BatchStream::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  Batch batch;
  batch.record_indices = order_[cursor_++];
  for (auto idx : batch.record_indices) {
    const auto& record = manifest_->records()[idx];
    ImageArray image = loader_(manifest_->resolve(record));
    if (transform_)
      image = transform_(image, mix_seed(mix_seed(seed_, 0xa5a5 + static_cast<std::uint64_t>(epoch_)), idx));
    batch.images.push_back(std::move(image));
    batch.class_ids.push_back(record.class_id);
  }
  return batch;
}

}  // namespace aigi
