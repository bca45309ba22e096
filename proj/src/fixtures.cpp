#include "aigi/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "aigi/common.hpp"
#include "aigi/data.hpp"
#include "aigi/dire.hpp"
#include "aigi/image.hpp"
#include "aigi/table_file.hpp"

namespace aigi {

Registry toy_registry() {
  return Registry({
      {0, "Toy Diffusion", "TDM", Family::Diffusion, "a fake image from toy diffusion"},
      {0, "Toy GAN", "TGAN", Family::Gan, "a fake image from toy gan"},
      {0, "Real Image", "Real", Family::Real, "a real image with no alterations"},
  });
}

namespace {

void clip(ImageArray& img) {
  for (auto& v : img.values) v = std::clamp(v, -1.0, 1.0);
}

ImageArray blocky_pattern(Rng& rng, int res) {
  const int cell = std::max(2, res / 8);
  const int grid = (res + cell - 1) / cell;
  std::vector<double> colors(static_cast<std::size_t>(3) * grid * grid);
  for (auto& c : colors) c = rng.uniform(-0.8, 0.8);
  const double artifact = rng.uniform(0.08, 0.2);
  ImageArray img(res, res);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) {
        const double base = colors[(static_cast<std::size_t>(c) * grid + y / cell) * grid + x / cell];
        img.at(c, y, x) = base + ((x + y) % 2 ? artifact : -artifact);
      }
  clip(img);
  return img;
}

ImageArray shape_scene(Rng& rng, int res) {
  ImageArray img(res, res);
  double bg[3], grad[3];
  for (int c = 0; c < 3; ++c) {
    bg[c] = rng.uniform(-0.6, 0.6);
    grad[c] = rng.uniform(-0.5, 0.5);
  }
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) img.at(c, y, x) = bg[c] + grad[c] * (static_cast<double>(y) / res - 0.5);
  const int shapes = static_cast<int>(rng.uniform_int(3, 6));
  for (int s = 0; s < shapes; ++s) {
    const bool circle = rng.uniform() < 0.5;
    const double cx = rng.uniform(0, res), cy = rng.uniform(0, res);
    const double size = rng.uniform(res / 10.0, res / 3.0);
    double color[3];
    for (auto& c : color) c = rng.uniform(-0.9, 0.9);
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) {
        const double dx = x - cx, dy = y - cy;
        const bool inside = circle ? dx * dx + dy * dy <= size * size : std::abs(dx) <= size && std::abs(dy) <= size * 0.6;
        if (inside)
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = color[c];
      }
  }
  for (auto& v : img.values) v += 0.3 * rng.normal();
  clip(img);
  return img;
}

}  // namespace

void make_fixtures(const std::filesystem::path& out_dir, const FixtureOptions& options) {
  if (options.resolution < 8) fail(ErrorKind::InvalidArgument, "fixture resolution must be at least 8");
  const Registry registry = toy_registry();
  const ToyDiffusion diffusion(options.oracle_steps, options.seed, options.resolution);
  Rng rng(mix_seed(options.seed, 0xf1));

  DatasetManifest manifest(out_dir);
  const std::pair<Split, std::size_t> splits[] = {{Split::Train, options.train_per_class},
                                                  {Split::Test, options.test_per_class}};
  for (const auto& [split, count] : splits) {
    for (const auto& cls : registry.classes()) {
      for (std::size_t i = 0; i < count; ++i) {
        ImageArray img;
        if (cls.abbreviation == "TDM") {
          img = diffusion.sample(rng);
          clip(img);
        } else if (cls.abbreviation == "TGAN") {
          img = blocky_pattern(rng, options.resolution);
        } else {
          img = shape_scene(rng, options.resolution);
        }
        char name[64];
        std::snprintf(name, sizeof name, "%s_%04zu.png", std::string(to_string(split)).c_str(), i);
        const std::filesystem::path rel = std::filesystem::path("images") / cls.abbreviation / name;
        save_png(out_dir / rel, img);
        manifest.add({rel, cls.class_id, split});
      }
    }
  }
  write_text_file(out_dir / "registry.tsv", registry.serialize());
  manifest.save(out_dir / "manifest.tsv", registry);
  save_oracle_file(out_dir / "oracle.json", "toy", options.oracle_steps, options.seed, options.resolution);
}

}  // namespace aigi
