#include "aigi/common.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>

namespace aigi {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Lookup: return "lookup error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Decode: return "decode error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Training: return "training aborted";
    case ErrorKind::Oracle: return "oracle error";
    case ErrorKind::Calibration: return "calibration error";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

void stderr_sink(LogLevel level, std::string_view message) {
  std::fprintf(stderr, "[aigi] %s%.*s\n", level == LogLevel::Warning ? "warning: " : "",
               static_cast<int>(message.size()), message.data());
}

LogSink& sink() {
  static LogSink s = stderr_sink;
  return s;
}

}  // namespace

void set_log_sink(LogSink s) {
  std::lock_guard lock(sink_mutex());
  sink() = s ? std::move(s) : LogSink(stderr_sink);
}

void log(LogLevel level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(level, message);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) fail(ErrorKind::InvalidArgument, "uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next_u64());
  // rejection sampling removes modulo bias
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string format_exact(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

}  // namespace aigi
