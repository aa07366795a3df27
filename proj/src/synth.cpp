#include "ucgp/synth.hpp"

#include "ucgp/error.hpp"
#include "ucgp/rng.hpp"
#include "ucgp/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ucgp {

void SynthConfig::validate() const {
  if (count < 2 || clean_count < 2) throw config_error("synth counts must be >= 2");
  if (width < 48 || height < 64) throw config_error("synth frames must be at least 48x64");
}

IrImage synth_frame(int width, int height, std::uint64_t seed, Roi& roi) {
  CounterRng rng(derive_seed(seed, 0x73796E74ull));
  IrImage img = make_background(width, height, rng.next_u64(), 0.12 + 0.15 * rng.uniform(), 0.35 + 0.2 * rng.uniform());

  // Street clutter: poles, lit windows and parked warm blocks.
  const int clutter = static_cast<int>(rng.below(4));
  for (int c = 0; c < clutter; ++c) {
    const double value = rng.uniform(0.2, 0.75);
    const double x0 = rng.uniform(0, width), y0 = rng.uniform(0, height);
    const double bw = rng.bernoulli(0.5) ? rng.uniform(2, 5) : rng.uniform(8, 30);
    const double bh = rng.uniform(10, height * 0.6);
    for (int y = std::max(0, int(y0)); y < std::min(height, int(y0 + bh)); ++y)
      for (int x = std::max(0, int(x0)); x < std::min(width, int(x0 + bw)); ++x) img(x, y) = 0.3 * img(x, y) + 0.7 * value;
  }

  roi.h = static_cast<int>(std::lround(rng.uniform(0.66, 0.88) * height));
  roi.w = static_cast<int>(std::lround(rng.uniform(0.42, 0.52) * roi.h));
  roi.x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - roi.w - 1))) + 1;
  roi.y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - roi.h - 1))) + 1;
  PersonPose pose;
  pose.cx = rng.uniform(0.42, 0.58);
  pose.top = rng.uniform(0.0, 0.10);
  pose.height = rng.uniform(0.84, 0.98);
  pose.width = rng.uniform(0.42, 0.66);
  pose.warmth = rng.uniform(0.62, 0.92);
  pose.arm_spread = rng.uniform(0.0, 1.0);
  pose.stride = rng.uniform(0.0, 1.0);
  pose.clothing = rng.uniform(0.0, 0.25);
  pose.arm_raise = rng.bernoulli(0.3) ? rng.uniform(0.3, 1.0) : 0.0;
  draw_person(img, pose, roi);

  // Occasional occluder across the legs (a bench back, a car bonnet).
  if (rng.bernoulli(0.3)) {
    const double value = rng.uniform(0.15, 0.6);
    const int y0 = roi.y0 + static_cast<int>(rng.uniform(0.65, 0.8) * roi.h);
    const int y1 = std::min(height, y0 + static_cast<int>(rng.uniform(0.08, 0.2) * roi.h));
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < width; ++x) img(x, y) = 0.15 * img(x, y) + 0.85 * value;
  }
  // Sensor grain on top of everything.
  const double grain = rng.uniform(0.005, 0.03);
  for (double& v : img.values()) v = std::clamp(v + grain * rng.normal(), 0.0, 1.0);
  return img;
}

SynthOutput synth_dataset(const SynthConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir) {
  cfg.validate();
  std::filesystem::create_directories(dir / "images");
  const auto make = [&](const char* prefix, std::size_t n, std::uint64_t stream) {
    Dataset ds;
    ds.category = cfg.category;
    for (std::size_t i = 0; i < n; ++i) {
      Roi roi;
      const IrImage img = synth_frame(cfg.width, cfg.height, derive_seed(seed, stream, i), roi);
      char name[64];
      std::snprintf(name, sizeof name, "%s_%03zu.png", prefix, i);
      const auto path = dir / "images" / name;
      save_image(img, path);
      ds.items.push_back({std::filesystem::path("images") / name, roi, true});
    }
    return ds;
  };
  SynthOutput out{dir / "dataset.json", dir / "clean.json"};
  save_dataset(make("attack", cfg.count, 1), out.dataset_manifest);
  save_dataset(make("clean", cfg.clean_count, 2), out.clean_manifest);
  return out;
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.count = j.value("count", c.count);
  c.clean_count = j.value("clean_count", c.clean_count);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.category = j.value("category", c.category);
  c.validate();
  return c;
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"count", c.count}, {"clean_count", c.clean_count}, {"width", c.width}, {"height", c.height},
          {"category", c.category}};
}

}  // namespace ucgp
