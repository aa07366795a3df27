#include "ucgp/augment.hpp"

#include "ucgp/error.hpp"
#include "ucgp/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ucgp {

namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi)) throw config_error(std::string("augment.") + name + " range is not ordered");
}

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw config_error(std::string("augment.") + name + " must be in [0,1]");
}

// Each parameter owns a fixed stream so that changing one range never shifts another's draws.
enum Stream : std::uint64_t {
  kScale = 1, kRotation, kCorners, kTranslate, kTps, kBlur, kNoise, kNoiseSeed, kQuantize, kBrightness,
  kContrast, kGate,
};

double draw(std::uint64_t seed, Stream s, std::uint64_t i, const Range& r) {
  CounterRng rng(derive_seed(seed, s), i);
  return rng.uniform(r.lo, r.hi);
}

bool gate(std::uint64_t seed, std::uint64_t stage, double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  CounterRng rng(derive_seed(seed, kGate), stage);
  return rng.uniform() < p;
}

double tps_kernel(double r2) noexcept { return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0; }  // r^2 log r

}  // namespace

void AugmentConfig::validate() const {
  check_range(scale, "scale");
  check_range(translate, "translate");
  check_range(rotation_deg, "rotation_deg");
  check_range(corner_jitter, "corner_jitter");
  check_range(blur_sigma, "blur_sigma");
  check_range(noise_sigma, "noise_sigma");
  check_range(quantize_levels, "quantize_levels");
  check_range(brightness, "brightness");
  check_range(contrast, "contrast");
  check_range(tps_disp, "tps_disp");
  if (scale.lo <= 0.0) throw config_error("augment.scale must be positive");
  if (blur_sigma.lo < 0.0 || noise_sigma.lo < 0.0) throw config_error("augment sigmas must be non-negative");
  if (contrast.lo <= 0.0) throw config_error("augment.contrast must be positive");
  const int g = static_cast<int>(std::lround(std::sqrt(std::max(tps_points, 0))));
  if (tps_points != 0 && (g * g != tps_points || g < 2))
    throw config_error("augment.tps_points must be 0 or a square >= 4");
  check_prob(p_geometric, "p_geometric");
  check_prob(p_tps, "p_tps");
  check_prob(p_blur, "p_blur");
  check_prob(p_noise, "p_noise");
  check_prob(p_quantize, "p_quantize");
  check_prob(p_photometric, "p_photometric");
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig c;
  c.scale = {1, 1};
  c.translate = {0, 0};
  c.rotation_deg = {0, 0};
  c.corner_jitter = {0, 0};
  c.blur_sigma = {0, 0};
  c.noise_sigma = {0, 0};
  c.quantize_levels = {0, 0};
  c.brightness = {0, 0};
  c.contrast = {1, 1};
  c.tps_disp = {0, 0};
  return c;
}

bool TransformSpec::geometric_identity() const noexcept {
  if (scale != 1.0 || rotation_deg != 0.0 || tx != 0.0 || ty != 0.0) return false;
  for (const auto& c : corner_offsets)
    if (c.x != 0.0 || c.y != 0.0) return false;
  return true;
}

bool TransformSpec::tps_identity() const noexcept {
  for (const auto& o : tps_offset)
    if (o.x != 0.0 || o.y != 0.0) return false;
  return true;
}

bool operator==(const TransformSpec& a, const TransformSpec& b) {
  const auto same = [](const auto& u, const auto& v) {
    return std::equal(u.begin(), u.end(), v.begin(), v.end(),
                      [](const Point2& p, const Point2& q) { return p.x == q.x && p.y == q.y; });
  };
  return a.scale == b.scale && a.rotation_deg == b.rotation_deg && same(a.corner_offsets, b.corner_offsets) &&
         a.tx == b.tx && a.ty == b.ty && same(a.tps_src, b.tps_src) && same(a.tps_offset, b.tps_offset) &&
         a.blur_sigma == b.blur_sigma && a.noise_sigma == b.noise_sigma && a.noise_seed == b.noise_seed &&
         a.quantize_levels == b.quantize_levels && a.brightness == b.brightness && a.contrast == b.contrast;
}

TransformSpec sample_transform(const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TransformSpec t;
  if (gate(seed, 0, cfg.p_geometric)) {
    t.scale = draw(seed, kScale, 0, cfg.scale);
    t.rotation_deg = draw(seed, kRotation, 0, cfg.rotation_deg);
    for (std::size_t c = 0; c < 4; ++c) {
      t.corner_offsets[c] = {draw(seed, kCorners, 2 * c, cfg.corner_jitter),
                             draw(seed, kCorners, 2 * c + 1, cfg.corner_jitter)};
    }
    t.tx = draw(seed, kTranslate, 0, cfg.translate);
    t.ty = draw(seed, kTranslate, 1, cfg.translate);
  }
  if (cfg.tps_points > 0) {
    const int g = static_cast<int>(std::lround(std::sqrt(cfg.tps_points)));
    const bool on = gate(seed, 1, cfg.p_tps);
    for (int j = 0; j < g; ++j) {
      for (int i = 0; i < g; ++i) {
        // Interior lattice: corners of the control grid stay off the image border.
        t.tps_src.push_back({(i + 0.5) / g, (j + 0.5) / g});
        const auto k = static_cast<std::uint64_t>(j * g + i);
        t.tps_offset.push_back(on ? Point2{draw(seed, kTps, 2 * k, cfg.tps_disp), draw(seed, kTps, 2 * k + 1, cfg.tps_disp)}
                                  : Point2{});
      }
    }
  }
  if (gate(seed, 2, cfg.p_blur)) t.blur_sigma = draw(seed, kBlur, 0, cfg.blur_sigma);
  if (gate(seed, 3, cfg.p_noise)) {
    t.noise_sigma = draw(seed, kNoise, 0, cfg.noise_sigma);
    t.noise_seed = CounterRng(derive_seed(seed, kNoiseSeed)).next_u64();
  }
  if (gate(seed, 4, cfg.p_quantize)) {
    const double levels = draw(seed, kQuantize, 0, cfg.quantize_levels);
    t.quantize_levels = levels >= 2.0 ? static_cast<int>(std::lround(levels)) : 0;
  }
  if (gate(seed, 5, cfg.p_photometric)) {
    t.brightness = draw(seed, kBrightness, 0, cfg.brightness);
    t.contrast = draw(seed, kContrast, 0, cfg.contrast);
  }
  return t;
}

std::array<double, 9> homography_from_corners(const std::array<Point2, 4>& from, const std::array<Point2, 4>& to) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = from[static_cast<std::size_t>(i)].x, y = from[static_cast<std::size_t>(i)].y;
    const double u = to[static_cast<std::size_t>(i)].x, v = to[static_cast<std::size_t>(i)].y;
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  return {h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0};
}

namespace {

IrImage warp_geometric(const TransformSpec& t, const IrImage& img) {
  const int w = img.width(), h = img.height();
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  const double th = t.rotation_deg * std::numbers::pi / 180.0;
  Eigen::Matrix3d to_center, from_center, sr, trans;
  to_center << 1, 0, -cx, 0, 1, -cy, 0, 0, 1;
  from_center << 1, 0, cx, 0, 1, cy, 0, 0, 1;
  sr << t.scale * std::cos(th), -t.scale * std::sin(th), 0, t.scale * std::sin(th), t.scale * std::cos(th), 0, 0, 0, 1;
  trans << 1, 0, t.tx, 0, 1, t.ty, 0, 0, 1;
  const std::array<Point2, 4> corners{Point2{0, 0}, Point2{double(w - 1), 0}, Point2{double(w - 1), double(h - 1)},
                                      Point2{0, double(h - 1)}};
  std::array<Point2, 4> moved = corners;
  for (std::size_t c = 0; c < 4; ++c) {
    moved[c].x += t.corner_offsets[c].x * w;
    moved[c].y += t.corner_offsets[c].y * h;
  }
  const auto hv = homography_from_corners(corners, moved);
  Eigen::Matrix3d hom;
  hom << hv[0], hv[1], hv[2], hv[3], hv[4], hv[5], hv[6], hv[7], hv[8];
  const Eigen::Matrix3d forward = trans * hom * from_center * sr * to_center;
  const Eigen::Matrix3d inverse = forward.inverse();

  IrImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d s = inverse * Eigen::Vector3d(x, y, 1.0);
      out(x, y) = img.bilinear(s.x() / s.z(), s.y() / s.z());
    }
  }
  return out;
}

}  // namespace

IrImage gaussian_blur(const IrImage& img, double sigma) {
  if (sigma < 1e-3) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= total;
  const int w = img.width(), h = img.height();
  IrImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[static_cast<std::size_t>(i + radius)] * img.clamped(x + i, y);
      tmp(x, y) = std::clamp(s, 0.0, 1.0);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += kernel[static_cast<std::size_t>(i + radius)] * tmp.clamped(x, y + i);
      out(x, y) = std::clamp(s, 0.0, 1.0);
    }
  return out;
}

IrImage apply(const TransformSpec& t, const IrImage& img) {
  if (img.width() < 8 || img.height() < 8) throw runtime_error("augment input must be at least 8x8");
  IrImage out = t.geometric_identity() ? img : warp_geometric(t, img);
  if (!t.tps_src.empty() && !t.tps_identity()) {
    const double w = out.width() - 1, h = out.height() - 1;
    const double unit = std::min(out.width(), out.height());
    std::vector<Point2> src, dst;
    for (std::size_t i = 0; i < t.tps_src.size(); ++i) {
      const Point2 s{t.tps_src[i].x * w, t.tps_src[i].y * h};
      src.push_back(s);
      dst.push_back({s.x + t.tps_offset[i].x * unit, s.y + t.tps_offset[i].y * unit});
    }
    out = tps_warp(out, src, dst);
  }
  out = gaussian_blur(out, t.blur_sigma);
  auto v = out.values();
  if (t.noise_sigma > 0.0) {
    CounterRng rng(t.noise_seed);
    for (double& x : v) x = std::clamp(x + t.noise_sigma * rng.normal(), 0.0, 1.0);
  }
  if (t.quantize_levels >= 2) {
    const double q = t.quantize_levels - 1;
    for (double& x : v) x = std::round(x * q) / q;
  }
  if (t.brightness != 0.0 || t.contrast != 1.0) {
    for (double& x : v) x = std::clamp((x - 0.5) * t.contrast + 0.5 + t.brightness, 0.0, 1.0);
  }
  return out;
}

TpsField::TpsField(std::span<const Point2> src, std::span<const Point2> dst) : ctrl_(src.begin(), src.end()) {
  const auto n = static_cast<Eigen::Index>(src.size());
  if (src.size() != dst.size()) throw runtime_error("TPS control point lists differ in length");
  if (n < 3) throw runtime_error("TPS needs at least 3 control points");
  Eigen::MatrixXd p(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) << 1.0, src[static_cast<std::size_t>(i)].x, src[static_cast<std::size_t>(i)].y;
  Eigen::FullPivLU<Eigen::MatrixXd> affine_rank(p);
  affine_rank.setThreshold(1e-10);
  if (affine_rank.rank() < 3) throw runtime_error("TPS control points are collinear");

  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n + 3, n + 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dx = src[static_cast<std::size_t>(i)].x - src[static_cast<std::size_t>(j)].x;
      const double dy = src[static_cast<std::size_t>(i)].y - src[static_cast<std::size_t>(j)].y;
      l(i, j) = tps_kernel(dx * dx + dy * dy);
    }
  l.block(0, n, n, 3) = p;
  l.block(n, 0, 3, n) = p.transpose();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  for (Eigen::Index i = 0; i < n; ++i) rhs.row(i) << dst[static_cast<std::size_t>(i)].x, dst[static_cast<std::size_t>(i)].y;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(l);
  if (!lu.isInvertible()) throw runtime_error("singular TPS system");
  const Eigen::MatrixXd sol = lu.solve(rhs);
  wx_.resize(static_cast<std::size_t>(n));
  wy_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    wx_[static_cast<std::size_t>(i)] = sol(i, 0);
    wy_[static_cast<std::size_t>(i)] = sol(i, 1);
  }
  ax_ = {sol(n, 0), sol(n + 1, 0), sol(n + 2, 0)};
  ay_ = {sol(n, 1), sol(n + 1, 1), sol(n + 2, 1)};
}

Point2 TpsField::operator()(Point2 q) const noexcept {
  double x = ax_[0] + ax_[1] * q.x + ax_[2] * q.y;
  double y = ay_[0] + ay_[1] * q.x + ay_[2] * q.y;
  for (std::size_t i = 0; i < ctrl_.size(); ++i) {
    const double dx = q.x - ctrl_[i].x, dy = q.y - ctrl_[i].y;
    const double u = tps_kernel(dx * dx + dy * dy);
    x += wx_[i] * u;
    y += wy_[i] * u;
  }
  return {x, y};
}

IrImage tps_warp(const IrImage& img, std::span<const Point2> src, std::span<const Point2> dst) {
  const TpsField inverse(dst, src);
  IrImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Point2 s = inverse({double(x), double(y)});
      out(x, y) = img.bilinear(s.x, s.y);
    }
  return out;
}

double expected_loss(const ImageEvaluator& evaluator, const IrImage& x, const AugmentConfig& cfg, std::size_t n,
                     std::uint64_t seed) {
  if (n == 0) throw config_error("expected_loss needs at least one sample");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += evaluator(apply(sample_transform(cfg, seed + i), x));
  return total / static_cast<double>(n);
}

nlohmann::json to_json(const AugmentConfig& c) {
  const auto r = [](const Range& x) { return nlohmann::json::array({x.lo, x.hi}); };
  return {{"scale", r(c.scale)},
          {"translate", r(c.translate)},
          {"rotation_deg", r(c.rotation_deg)},
          {"corner_jitter", r(c.corner_jitter)},
          {"blur_sigma", r(c.blur_sigma)},
          {"noise_sigma", r(c.noise_sigma)},
          {"quantize_levels", r(c.quantize_levels)},
          {"brightness", r(c.brightness)},
          {"contrast", r(c.contrast)},
          {"tps_points", c.tps_points},
          {"tps_disp", r(c.tps_disp)},
          {"p_geometric", c.p_geometric},
          {"p_tps", c.p_tps},
          {"p_blur", c.p_blur},
          {"p_noise", c.p_noise},
          {"p_quantize", c.p_quantize},
          {"p_photometric", c.p_photometric}};
}

AugmentConfig augment_config_from_json(const nlohmann::json& j) {
  AugmentConfig c;
  const auto r = [&](const char* key, Range& out) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw config_error(std::string("augment.") + key + " must be [lo, hi]");
    out = {v[0], v[1]};
  };
  r("scale", c.scale);
  r("translate", c.translate);
  r("rotation_deg", c.rotation_deg);
  r("corner_jitter", c.corner_jitter);
  r("blur_sigma", c.blur_sigma);
  r("noise_sigma", c.noise_sigma);
  r("quantize_levels", c.quantize_levels);
  r("brightness", c.brightness);
  r("contrast", c.contrast);
  r("tps_disp", c.tps_disp);
  c.tps_points = j.value("tps_points", c.tps_points);
  c.p_geometric = j.value("p_geometric", c.p_geometric);
  c.p_tps = j.value("p_tps", c.p_tps);
  c.p_blur = j.value("p_blur", c.p_blur);
  c.p_noise = j.value("p_noise", c.p_noise);
  c.p_quantize = j.value("p_quantize", c.p_quantize);
  c.p_photometric = j.value("p_photometric", c.p_photometric);
  c.validate();
  return c;
}

}  // namespace ucgp
