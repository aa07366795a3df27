#include "doctest.h"
#include "oracles.hpp"

#include "ucgp/augment.hpp"
#include "ucgp/error.hpp"

#include <random>
#include <set>

using namespace ucgp;

namespace {

TransformSpec none() { return sample_transform(AugmentConfig::identity(), 0); }

std::vector<Point2> lattice(int g, double w, double h) {
  std::vector<Point2> pts;
  for (int j = 0; j < g; ++j)
    for (int i = 0; i < g; ++i) pts.push_back({(i + 0.5) / g * w, (j + 0.5) / g * h});
  return pts;
}

}  // namespace

TEST_CASE("the identity configuration is a no-op") {
  const IrImage img = oracle::random_image(30, 40, 1);
  const auto spec = none();
  CHECK(spec.geometric_identity());
  CHECK(spec.tps_identity());
  CHECK(apply(spec, img) == img);
}

TEST_CASE("sampling is deterministic and stays inside the configured ranges") {
  const AugmentConfig cfg;
  CHECK(sample_transform(cfg, 5) == sample_transform(cfg, 5));
  CHECK_FALSE(sample_transform(cfg, 5) == sample_transform(cfg, 6));
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto t = sample_transform(cfg, s);
    CHECK(t.scale >= 0.9);
    CHECK(t.scale <= 1.1);
    CHECK(std::abs(t.rotation_deg) <= 5.0);
    CHECK(std::abs(t.tx) <= 4.0);
    CHECK(std::abs(t.ty) <= 4.0);
    for (const auto& c : t.corner_offsets) CHECK(std::max(std::abs(c.x), std::abs(c.y)) <= 0.03);
    CHECK(t.blur_sigma <= 1.5);
    CHECK(t.noise_sigma <= 0.03);
    CHECK(t.quantize_levels >= 32);
    CHECK(t.quantize_levels <= 256);
    CHECK(std::abs(t.brightness) <= 0.08);
    CHECK(t.tps_src.size() == 9);
    for (const auto& o : t.tps_offset) CHECK(std::max(std::abs(o.x), std::abs(o.y)) <= 0.02);
  }
}

TEST_CASE("stage probabilities switch stages off") {
  AugmentConfig cfg;
  cfg.p_blur = 0;
  cfg.p_tps = 0;
  cfg.p_geometric = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto t = sample_transform(cfg, s);
    CHECK(t.blur_sigma == 0.0);
    CHECK(t.tps_identity());
    CHECK(t.geometric_identity());
  }
}

TEST_CASE("translation and quarter rotation are exact pixel moves") {
  const IrImage img = oracle::random_image(21, 21, 2);
  auto t = none();
  t.tx = 3;
  const IrImage moved = apply(t, img);
  for (int y = 0; y < 21; ++y)
    for (int x = 0; x + 3 < 21; ++x) CHECK(moved(x + 3, y) == doctest::Approx(img(x, y)).epsilon(1e-12));

  t = none();
  t.rotation_deg = 90;
  const IrImage rot = apply(t, img);
  for (int y = 0; y < 21; ++y)
    for (int x = 0; x < 21; ++x) CHECK(rot(20 - y, x) == doctest::Approx(img(x, y)).epsilon(1e-9));
}

TEST_CASE("homography from corners maps the corners") {
  const std::array<Point2, 4> from{Point2{0, 0}, {10, 0}, {10, 8}, {0, 8}};
  const std::array<Point2, 4> to{Point2{0.5, -0.2}, {10.3, 0.1}, {9.6, 8.4}, {-0.2, 7.7}};
  const auto h = homography_from_corners(from, to);
  for (std::size_t c = 0; c < 4; ++c) {
    const double z = h[6] * from[c].x + h[7] * from[c].y + h[8];
    CHECK((h[0] * from[c].x + h[1] * from[c].y + h[2]) / z == doctest::Approx(to[c].x).epsilon(1e-10));
    CHECK((h[3] * from[c].x + h[4] * from[c].y + h[5]) / z == doctest::Approx(to[c].y).epsilon(1e-10));
  }
  const auto id = homography_from_corners(from, from);
  CHECK(id[0] == doctest::Approx(1.0));
  CHECK(std::abs(id[1]) < 1e-12);
  CHECK(std::abs(id[6]) < 1e-12);
}

TEST_CASE("TPS with zero displacement is the identity") {
  const IrImage img = oracle::random_image(33, 41, 3);
  const auto src = lattice(3, 32, 40);
  const IrImage out = tps_warp(img, src, src);
  double worst = 0;
  for (std::size_t i = 0; i < img.size(); ++i) worst = std::max(worst, std::abs(out.values()[i] - img.values()[i]));
  CHECK(worst <= 1e-6);
}

TEST_CASE("TPS interpolates control points exactly") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-2, 2);
  auto src = lattice(4, 50, 50);
  std::vector<Point2> dst;
  for (const auto& p : src) dst.push_back({p.x + u(gen), p.y + u(gen)});
  const TpsField f(src, dst);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Point2 q = f(src[i]);
    CHECK(std::abs(q.x - dst[i].x) <= 1e-5);
    CHECK(std::abs(q.y - dst[i].y) <= 1e-5);
  }
}

TEST_CASE("TPS reproduces affine maps everywhere") {
  const auto src = lattice(3, 40, 30);
  const auto affine = [](Point2 p) { return Point2{1.05 * p.x - 0.1 * p.y + 2.0, 0.07 * p.x + 0.95 * p.y - 1.0}; };
  std::vector<Point2> dst;
  for (const auto& p : src) dst.push_back(affine(p));
  const TpsField f(src, dst);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-10, 50);
  for (int i = 0; i < 100; ++i) {
    const Point2 p{u(gen), u(gen)};
    const Point2 a = affine(p), b = f(p);
    CHECK(std::abs(a.x - b.x) <= 1e-8);
    CHECK(std::abs(a.y - b.y) <= 1e-8);
  }
}

TEST_CASE("TPS translation shifts content") {
  const IrImage img = oracle::random_image(30, 30, 6);
  const auto src = lattice(3, 29, 29);
  std::vector<Point2> dst;
  for (const auto& p : src) dst.push_back({p.x + 2, p.y});
  const IrImage out = tps_warp(img, src, dst);
  for (int y = 0; y < 30; ++y)
    for (int x = 2; x < 30; ++x) CHECK(out(x, y) == doctest::Approx(img(x - 2, y)).epsilon(1e-6));
  for (int y = 0; y < 30; ++y) CHECK(out(0, y) == doctest::Approx(img(0, y)).epsilon(1e-6));  // edge replicate
}

TEST_CASE("TPS rejects degenerate control sets") {
  const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  CHECK_THROWS_AS(TpsField(line, line), Error);
  const std::vector<Point2> two{{0, 0}, {1, 0}};
  CHECK_THROWS_AS(TpsField(two, two), Error);
}

TEST_CASE("blur keeps constants and mass") {
  const IrImage flat(20, 20, 0.4);
  const IrImage b = gaussian_blur(flat, 1.3);
  for (double v : b.values()) CHECK(v == doctest::Approx(0.4));
  const IrImage img = oracle::random_image(24, 24, 7);
  CHECK(gaussian_blur(img, 0.0) == img);
  const IrImage s = gaussian_blur(img, 1.0);
  double sum_a = 0, sum_b = 0, var_a = 0, var_b = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    sum_a += img.values()[i];
    sum_b += s.values()[i];
  }
  for (std::size_t i = 0; i < img.size(); ++i) {
    var_a += std::pow(img.values()[i] - sum_a / img.size(), 2);
    var_b += std::pow(s.values()[i] - sum_b / img.size(), 2);
  }
  CHECK(sum_b == doctest::Approx(sum_a).epsilon(0.02));
  CHECK(var_b < 0.5 * var_a);
}

TEST_CASE("photometric stages") {
  const IrImage img = oracle::random_image(16, 16, 8);
  auto t = none();
  t.quantize_levels = 4;
  std::set<double> levels;
  for (double v : apply(t, img).values()) levels.insert(v);
  CHECK(levels.size() <= 4);
  for (double v : levels) CHECK(std::abs(v * 3 - std::round(v * 3)) < 1e-12);

  t = none();
  t.brightness = 0.05;
  t.contrast = 1.2;
  const IrImage bc = apply(t, img);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(bc.values()[i] == doctest::Approx(std::clamp((img.values()[i] - 0.5) * 1.2 + 0.55, 0.0, 1.0)));

  t = none();
  t.noise_sigma = 0.02;
  t.noise_seed = 9;
  const IrImage n1 = apply(t, IrImage(16, 16, 0.5)), n2 = apply(t, IrImage(16, 16, 0.5));
  CHECK(n1 == n2);
  double mean = 0;
  for (double v : n1.values()) mean += v;
  CHECK(std::abs(mean / n1.size() - 0.5) < 0.01);
  t.noise_seed = 10;
  CHECK_FALSE(apply(t, IrImage(16, 16, 0.5)) == n1);
}

TEST_CASE("outputs stay in range and keep their size") {
  const AugmentConfig cfg;
  const IrImage img = oracle::random_image(37, 53, 9);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const IrImage out = apply(sample_transform(cfg, s), img);
    CHECK(out.width() == 37);
    CHECK(out.height() == 53);
    for (double v : out.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("expected loss averages the evaluator over seeded draws") {
  const AugmentConfig cfg;
  const IrImage img = oracle::random_image(20, 20, 10);
  const ImageEvaluator mean = [](const IrImage& x) {
    double s = 0;
    for (double v : x.values()) s += v;
    return s / x.size();
  };
  double manual = 0;
  for (std::uint64_t i = 0; i < 5; ++i) manual += mean(apply(sample_transform(cfg, 40 + i), img));
  CHECK(expected_loss(mean, img, cfg, 5, 40) == doctest::Approx(manual / 5).epsilon(1e-14));
  CHECK(expected_loss(mean, img, AugmentConfig::identity(), 3, 1) == doctest::Approx(mean(img)));
  CHECK_THROWS_AS(expected_loss(mean, img, cfg, 0, 1), Error);
}

TEST_CASE("config JSON round trip and validation") {
  AugmentConfig cfg;
  cfg.rotation_deg = {-2, 3};
  cfg.p_noise = 0.5;
  const auto back = augment_config_from_json(to_json(cfg));
  CHECK(back.rotation_deg.hi == 3);
  CHECK(back.p_noise == 0.5);
  cfg.scale = {1.2, 1.1};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.tps_points = 5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
