#include "aigi/registry.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "aigi/common.hpp"
#include "aigi/table_file.hpp"

namespace aigi {

namespace {

bool contains_word(std::string_view text, std::string_view word) {
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find(' ', start);
    if (end == std::string_view::npos) end = text.size();
    if (text.substr(start, end - start) == word) return true;
    start = end + 1;
  }
  return false;
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Diffusion: return "diffusion";
    case Family::Gan: return "gan";
    case Family::Real: return "real";
  }
  return "real";
}

Family family_from_string(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "diffusion") return Family::Diffusion;
  if (lower == "gan") return Family::Gan;
  if (lower == "real") return Family::Real;
  fail(ErrorKind::Parse, "unknown generator family '" + std::string(text) + "'");
}

std::string normalize_caption(std::string_view raw) {
  auto is_strip = [](char c) {
    return c == ' ' || c == '\t' || c == '"' || c == '\'' || c == '`';
  };
  while (!raw.empty() && is_strip(raw.front())) raw.remove_prefix(1);
  while (!raw.empty() && is_strip(raw.back())) raw.remove_suffix(1);
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::string prefixed_caption(std::string_view caption) {
  if (caption.starts_with("a ")) return "an image of " + std::string(caption);
  return "an image of a " + std::string(caption);
}

Registry::Registry(std::vector<GeneratorClass> classes) : classes_(std::move(classes)) {
  if (classes_.empty()) fail(ErrorKind::Config, "registry has no classes");
  std::set<std::string> abbreviations, captions;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    auto& c = classes_[i];
    c.class_id = static_cast<int>(i);
    c.caption = normalize_caption(c.caption);
    const std::string where = "registry class " + std::to_string(i) + " (" + c.abbreviation + ")";
    if (c.abbreviation.empty()) fail(ErrorKind::Config, where + ": empty abbreviation");
    if (c.caption.empty()) fail(ErrorKind::Config, where + ": empty caption");
    if (!abbreviations.insert(c.abbreviation).second)
      fail(ErrorKind::Config, where + ": duplicate abbreviation");
    if (!captions.insert(c.caption).second) fail(ErrorKind::Config, where + ": duplicate caption");
    const bool says_real = contains_word(c.caption, "real");
    const bool says_fake = contains_word(c.caption, "fake");
    if (c.family == Family::Real) {
      if (!says_real) fail(ErrorKind::Config, where + ": real class caption must contain 'real'");
      if (real_class_ >= 0) fail(ErrorKind::Config, where + ": more than one real class");
      real_class_ = c.class_id;
    } else {
      if (says_real) fail(ErrorKind::Config, where + ": fake class caption must not contain 'real'");
      if (!says_fake) fail(ErrorKind::Config, where + ": fake class caption must contain 'fake'");
    }
  }
  if (real_class_ < 0) fail(ErrorKind::Config, "registry has no real class");
}

Registry Registry::builtin() {
  // Caption spellings are kept verbatim, including "psuedo".
  return Registry({
      {0, "Ablated Diffusion", "ADM", Family::Diffusion, "a fake image from ablated diffusion"},
      {0, "Probabilistic Denoising Diffusion", "DDPM", Family::Diffusion,
       "a fake image from denoising diffusion"},
      {0, "Pseudo Numerical Diffusion", "PNDM", Family::Diffusion,
       "a fake image from psuedo numerical diffusion"},
      {0, "Improved Probabilistic Denoising Diffusion", "IDDPM", Family::Diffusion,
       "a fake image from improved denoising diffusion"},
      {0, "Latent Diffusion", "LDM", Family::Diffusion, "a fake image from latent diffusion"},
      {0, "ProjectedGAN", "PjG", Family::Gan, "a fake image from original ProjectedGAN"},
      {0, "StyleGAN", "SG", Family::Gan, "a fake image from original StyleGan"},
      {0, "ProGAN", "PG", Family::Gan, "a fake image from ProGAN"},
      {0, "Diff-ProjectedGAN", "DPjG", Family::Gan, "a fake image from Diff-ProjectedGAN"},
      {0, "Diff-StyleGAN2", "DSG", Family::Gan, "a fake image from Diff-StyleGAN2"},
      {0, "Real Image", "Real", Family::Real, "a real image with no alterations"},
  });
}

Registry Registry::parse(std::string_view text, std::string_view source) {
  const TableFile table = parse_table(text, source);
  const auto abbr = table.require_column("abbreviation", source);
  const auto name = table.require_column("name", source);
  const auto family = table.require_column("family", source);
  const auto caption = table.require_column("caption", source);
  std::vector<GeneratorClass> classes;
  for (const auto& row : table.rows) {
    GeneratorClass c;
    c.abbreviation = row.fields[abbr];
    c.name = row.fields[name];
    try {
      c.family = family_from_string(row.fields[family]);
    } catch (const Error& e) {
      fail(ErrorKind::Parse, std::string(source) + ":" + std::to_string(row.line) + ": " + e.what());
    }
    c.caption = row.fields[caption];
    classes.push_back(std::move(c));
  }
  return Registry(std::move(classes));
}

Registry Registry::load(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

std::string Registry::serialize() const {
  TableFile table;
  table.columns = {"abbreviation", "name", "family", "caption"};
  for (const auto& c : classes_)
    table.rows.push_back({0, {c.abbreviation, c.name, std::string(to_string(c.family)), c.caption}});
  return render_table(table);
}

const GeneratorClass& Registry::at(int class_id) const {
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= classes_.size())
    fail(ErrorKind::Lookup, "unknown class id " + std::to_string(class_id) + " (registry has " +
                                std::to_string(classes_.size()) + " classes)");
  return classes_[static_cast<std::size_t>(class_id)];
}

std::string Registry::caption_for(int class_id, bool with_prefix) const {
  const auto& caption = at(class_id).caption;
  return with_prefix ? prefixed_caption(caption) : caption;
}

std::optional<int> Registry::find_abbreviation(std::string_view abbreviation) const {
  for (const auto& c : classes_)
    if (c.abbreviation == abbreviation) return c.class_id;
  return std::nullopt;
}

std::optional<int> Registry::find_caption(std::string_view caption) const {
  const auto normalized = normalize_caption(caption);
  for (const auto& c : classes_)
    if (c.caption == normalized) return c.class_id;
  return std::nullopt;
}

int Registry::class_of(std::string_view abbreviation) const {
  if (auto id = find_abbreviation(abbreviation)) return *id;
  fail(ErrorKind::Lookup, "unknown class abbreviation '" + std::string(abbreviation) + "'");
}

std::string Registry::fingerprint() const {
  std::string joined;
  for (const auto& c : classes_) {
    joined += c.abbreviation;
    joined += '\x1f';
    joined += c.caption;
    joined += '\x1e';
  }
  return hex64(fnv1a64(joined));
}

}  // namespace aigi
