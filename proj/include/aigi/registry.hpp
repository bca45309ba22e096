#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aigi {

enum class Family { Diffusion, Gan, Real };

std::string_view to_string(Family family);
Family family_from_string(std::string_view text);

struct GeneratorClass {
  int class_id = 0;
  std::string name;
  std::string abbreviation;
  Family family = Family::Real;
  std::string caption;
};

/// Strips surrounding quote characters and whitespace, lowercases.
std::string normalize_caption(std::string_view raw);

/// Caption with the optional "an image of a ..." prompt prefix.
std::string prefixed_caption(std::string_view caption);

/// Fixed, ordered vocabulary of generator classes and their caption labels.
/// Immutable after construction.
class Registry {
 public:
  /// Validates every invariant; class ids are reassigned to the input order.
  explicit Registry(std::vector<GeneratorClass> classes);

  /// Ten generators plus real images.
  static Registry builtin();
  /// Loads a registry config (columns: abbreviation, name, family, caption).
  static Registry load(const std::filesystem::path& path);
  static Registry parse(std::string_view text, std::string_view source);
  std::string serialize() const;

  std::size_t size() const noexcept { return classes_.size(); }
  const std::vector<GeneratorClass>& classes() const noexcept { return classes_; }
  const GeneratorClass& at(int class_id) const;

  const std::string& caption_for(int class_id) const { return at(class_id).caption; }
  std::string caption_for(int class_id, bool with_prefix) const;
  bool is_fake(int class_id) const { return at(class_id).family != Family::Real; }
  int real_class() const noexcept { return real_class_; }

  std::optional<int> find_abbreviation(std::string_view abbreviation) const;
  std::optional<int> find_caption(std::string_view caption) const;
  /// Like find_abbreviation but throws a lookup error naming the abbreviation.
  int class_of(std::string_view abbreviation) const;

  /// Stable hash of the ordered (abbreviation, caption) pairs.
  std::string fingerprint() const;

 private:
  std::vector<GeneratorClass> classes_;
  int real_class_ = -1;
};

}  // namespace aigi
