#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "aigi/registry.hpp"

namespace aigi {

/// Three procedural classes: samples of the toy diffusion model (TDM),
/// blocky upsampled patterns with grid artifacts (TGAN), and sharp-edged
/// shape scenes with sensor noise (Real).
Registry toy_registry();

struct FixtureOptions {
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 50;
  int resolution = 32;
  int oracle_steps = 20;
  std::uint64_t seed = 7;
};

/// Writes registry.tsv, manifest.tsv, oracle.json and images/<class>/<split>_NNNN.png
/// under `out_dir`. Output is a pure function of the options.
void make_fixtures(const std::filesystem::path& out_dir, const FixtureOptions& options);

}  // namespace aigi
