#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aigi {

enum class ErrorKind {
  InvalidArgument,
  Lookup,
  Parse,
  Io,
  Decode,
  Shape,
  Config,
  Data,
  Training,
  Oracle,
  Calibration,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

// Process-wide log sink. Defaults to stderr (also restored by an empty sink);
// the C API routes it to a user callback.
enum class LogLevel { Info, Warning };
using LogSink = std::function<void(LogLevel, std::string_view)>;
void set_log_sink(LogSink sink);
void log(LogLevel level, std::string_view message);
inline void log_info(std::string_view message) { log(LogLevel::Info, message); }
inline void log_warning(std::string_view message) { log(LogLevel::Warning, message); }

/// mt19937_64 with distribution mappings written out by hand; the std
/// distributions are implementation-defined and would break reproducibility
/// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed from a base seed and a tag.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Round-trippable decimal rendering of a double.
std::string format_exact(double value);

}  // namespace aigi
