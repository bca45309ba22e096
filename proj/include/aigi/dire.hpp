#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aigi/classifier.hpp"
#include "aigi/common.hpp"
#include "aigi/image.hpp"

namespace aigi {

/// Inversion I (image -> noise) and reconstruction R (noise -> image) of a
/// diffusion model. Read-only after construction.
struct DiffusionOracle {
  std::string name;
  int step_count = 0;
  int resolution = 0;  // expected input size; 0 accepts any
  std::function<ImageArray(const ImageArray&)> invert;
  std::function<ImageArray(const ImageArray&)> reconstruct;
};

/// Pixelwise |x - R(I(x))|, same layout as the input image.
struct DireMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
};

DireMap compute_dire(const ImageArray& x, const DiffusionOracle& oracle);
/// Mean over all entries.
double dire_score(const DireMap& map);

struct ThresholdCalibration {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
};

/// Threshold maximizing balanced accuracy of "fake iff score < threshold";
/// the midpoint between the two consecutive scores around the optimal cut.
/// Requires both verdicts to be present; warns when nothing separates them.
ThresholdCalibration calibrate_threshold(std::span<const double> scores, std::span<const Verdict> labels);

/// Balanced accuracy of the threshold rule on labelled scores.
double balanced_accuracy(std::span<const double> scores, std::span<const Verdict> labels, double threshold);

/// Area under the threshold-sweep ROC curve for "fake iff score < t":
/// P(fake score < real score) + P(tie) / 2.
double threshold_sweep_auc(std::span<const double> fake_scores, std::span<const double> real_scores);

/// Maps a scalar score to a verdict; the threshold rule is the default head,
/// and a learned head can be substituted.
using ScoreHead = std::function<Verdict(double)>;
ScoreHead threshold_head(double threshold);

/// Fake iff score < threshold (a score equal to the threshold is real).
Verdict verdict_for_score(double score, double threshold);
Verdict classify_dire(const ImageArray& x, const DiffusionOracle& oracle, double threshold);
Verdict classify_dire(const ImageArray& x, const DiffusionOracle& oracle, const ScoreHead& head);

/// Invert and reconstruct are both the identity.
DiffusionOracle identity_oracle(int resolution = 0);

/// Desk-scale diffusion model over a Gaussian image family living on a
/// seed-chosen low-frequency DCT subspace (plus a small isotropic floor).
/// Its denoiser is the exact posterior mean, so sampling, DDIM inversion
/// and DDIM reconstruction need no trained weights.
class ToyDiffusion {
 public:
  ToyDiffusion(int step_count, std::uint64_t seed, int resolution = 32);

  int step_count() const noexcept { return step_count_; }
  int resolution() const noexcept { return resolution_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Posterior mean of the clean image given y at noise level alpha_bar.
  ImageArray denoise(const ImageArray& y, double alpha_bar) const;
  ImageArray invert(const ImageArray& x) const;
  ImageArray reconstruct(const ImageArray& noise) const;
  /// Draws x_T ~ N(0, I) and runs the deterministic sampler.
  ImageArray sample(Rng& rng) const;

  DiffusionOracle oracle() const;

 private:
  struct Component {
    int channel;
    std::vector<double> basis;  // unit norm over one channel plane
    double variance;
  };

  ImageArray apply(const ImageArray& y, const std::function<double(double)>& gain) const;
  ImageArray ddim_step(const ImageArray& x, double alpha_from, double alpha_to, double alpha_model) const;

  int step_count_;
  std::uint64_t seed_;
  int resolution_;
  double floor_variance_ = 1e-4;
  std::vector<Component> components_;
  std::vector<double> alpha_bar_;  // level 0 is the clean image (1.0), levels 1..steps
};

DiffusionOracle toy_oracle(int step_count, std::uint64_t seed, int resolution = 32);

/// Oracle description file: {"kind": "toy"|"identity", "steps", "seed", "resolution"}.
void save_oracle_file(const std::filesystem::path& path, const std::string& kind, int steps, std::uint64_t seed,
                      int resolution);
DiffusionOracle load_oracle_file(const std::filesystem::path& path);

/// DIRE scores file: path, score, verdict.
struct DireScoreRecord {
  std::string path;
  double score = 0.0;
  Verdict verdict = Verdict::Real;
};
std::string serialize_dire_scores(std::span<const DireScoreRecord> records, double threshold);
std::vector<DireScoreRecord> parse_dire_scores(std::string_view text, std::string_view source);

/// Renders a DIRE map as an image with 0 -> black and the full normalized
/// range (2.0) -> white.
void save_dire_map(const std::filesystem::path& path, const DireMap& map);

}  // namespace aigi
