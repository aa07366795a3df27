#include "ucgp/scenes.hpp"

#include "ucgp/rng.hpp"

#include <algorithm>
#include <cmath>

namespace ucgp {

namespace {

// Soft coverage of a signed distance (negative inside), ~1 px antialiasing.
double coverage(double sd) noexcept { return std::clamp(0.5 - sd, 0.0, 1.0); }

double capsule_sd(double px, double py, double ax, double ay, double bx, double by, double r) noexcept {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - ax - t * vx, py - ay - t * vy) - r;
}

double ellipse_sd(double px, double py, double cx, double cy, double rx, double ry) noexcept {
  // Approximate: scaled radial distance, good enough for soft drawing.
  const double d = std::hypot((px - cx) / rx, (py - cy) / ry);
  return (d - 1.0) * std::min(rx, ry);
}

double box_sd(double px, double py, double x0, double y0, double x1, double y1) noexcept {
  const double dx = std::max({x0 - px, 0.0, px - x1});
  const double dy = std::max({y0 - py, 0.0, py - y1});
  if (dx > 0 || dy > 0) return std::hypot(dx, dy);
  return -std::min({px - x0, x1 - px, py - y0, y1 - py});
}

template <typename Sd>
void blend(IrImage& img, double value, Sd&& sd) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double c = coverage(sd(x + 0.5, y + 0.5));
      if (c > 0.0) img(x, y) = (1.0 - c) * img(x, y) + c * value;
    }
}

}  // namespace

void draw_person(IrImage& canvas, const PersonPose& pose, std::optional<Roi> box) {
  const Roi b = box.value_or(Roi{0, 0, canvas.width(), canvas.height()});
  const double w = b.w, h = b.h;
  const double cx = b.x0 + pose.cx * w;
  const double top = b.y0 + pose.top * h;
  const double ht = pose.height * h;
  const double sw = pose.width * w;
  const double head_r = 0.075 * ht;
  const double v = pose.warmth;
  const double head_cy = top + head_r;
  const double neck = head_cy + head_r;
  const double hip = top + 0.55 * ht;
  const double foot = top + ht;

  blend(canvas, v, [&](double x, double y) { return ellipse_sd(x, y, cx, head_cy, head_r * 0.85, head_r); });
  // Torso: slightly cooler clothing.
  blend(canvas, v - pose.clothing, [&](double x, double y) {
    return box_sd(x, y, cx - 0.5 * sw * 0.72, neck + 0.02 * ht, cx + 0.5 * sw * 0.72, hip) - 0.03 * ht;
  });
  const double arm_r = 0.045 * ht;
  const double lean = pose.arm_spread * 0.12 * ht;
  // The right hand ends between the hip and the head, depending on arm_raise.
  const double hand_y = hip + pose.arm_raise * (head_cy - hip);
  const double hand_x = cx + 0.5 * sw + lean * (1.0 - pose.arm_raise);
  blend(canvas, v - 0.03, [&](double x, double y) {
    return std::min(capsule_sd(x, y, cx - 0.5 * sw * 0.8, neck + 0.06 * ht, cx - 0.5 * sw - lean, hip, arm_r),
                    capsule_sd(x, y, cx + 0.5 * sw * 0.8, neck + 0.06 * ht, hand_x, hand_y, arm_r));
  });
  const double leg_r = 0.06 * ht;
  const double spread = 0.22 + 0.35 * pose.stride;
  blend(canvas, v - 0.10, [&](double x, double y) {
    return std::min(capsule_sd(x, y, cx - 0.18 * sw, hip, cx - spread * sw, foot - leg_r, leg_r),
                    capsule_sd(x, y, cx + 0.18 * sw, hip, cx + spread * sw, foot - leg_r, leg_r));
  });
}

IrImage make_background(int width, int height, std::uint64_t seed, double lo, double hi, double grain) {
  CounterRng rng(seed);
  // A handful of broad Gaussian bumps gives low-frequency thermal clutter.
  struct Bump {
    double x, y, s, a;
  };
  std::vector<Bump> bumps(6);
  for (auto& b : bumps) b = {rng.uniform(0, width), rng.uniform(0, height), rng.uniform(0.2, 0.6) * height,
                             rng.uniform(-1.0, 1.0)};
  IrImage img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double v = 0.0;
      for (const auto& b : bumps) {
        const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
        v += b.a * std::exp(-0.5 * d2 / (b.s * b.s));
      }
      const double t = 0.5 + 0.35 * std::tanh(v);
      img(x, y) = std::clamp(lo + (hi - lo) * t + grain * rng.normal(), 0.0, 1.0);
    }
  return img;
}

std::optional<IrImage> label_sketch(const std::string& label, int width, int height, std::uint64_t variant) {
  CounterRng rng(derive_seed(variant, 0x736B6574ull));
  IrImage img = variant == 0 ? IrImage(width, height, 0.30)
                             : make_background(width, height, rng.next_u64(), rng.uniform(0.12, 0.27),
                                               rng.uniform(0.35, 0.55));
  const double w = width, h = height;
  if (label == "person") {
    PersonPose pose;
    if (variant != 0) {
      pose.cx = rng.uniform(0.42, 0.58);
      pose.top = rng.uniform(0.0, 0.10);
      pose.height = rng.uniform(0.84, 0.98);
      pose.width = rng.uniform(0.42, 0.66);
      pose.warmth = rng.uniform(0.62, 0.92);
      pose.arm_spread = rng.uniform(0.0, 1.0);
      pose.stride = rng.uniform(0.0, 1.0);
      pose.clothing = rng.uniform(0.0, 0.25);
    }
    draw_person(img, pose);
  } else if (label == "dog") {
    blend(img, 0.78, [&](double x, double y) { return ellipse_sd(x, y, 0.45 * w, 0.72 * h, 0.38 * w, 0.09 * h); });
    blend(img, 0.80, [&](double x, double y) { return ellipse_sd(x, y, 0.80 * w, 0.60 * h, 0.14 * w, 0.06 * h); });
    blend(img, 0.72, [&](double x, double y) {
      return std::min(capsule_sd(x, y, 0.22 * w, 0.75 * h, 0.20 * w, 0.92 * h, 0.05 * w),
                      capsule_sd(x, y, 0.66 * w, 0.75 * h, 0.68 * w, 0.92 * h, 0.05 * w));
    });
  } else if (label == "car") {
    blend(img, 0.70, [&](double x, double y) { return box_sd(x, y, 0.02 * w, 0.55 * h, 0.98 * w, 0.82 * h); });
    blend(img, 0.55, [&](double x, double y) { return box_sd(x, y, 0.2 * w, 0.45 * h, 0.8 * w, 0.56 * h); });
    blend(img, 0.12, [&](double x, double y) {
      return std::min(ellipse_sd(x, y, 0.22 * w, 0.84 * h, 0.14 * w, 0.05 * h),
                      ellipse_sd(x, y, 0.78 * w, 0.84 * h, 0.14 * w, 0.05 * h));
    });
  } else if (label == "bicycle") {
    const auto ring = [](double x, double y, double cx, double cy, double r, double t) {
      return std::abs(std::hypot(x - cx, y - cy) - r) - t;
    };
    blend(img, 0.75, [&](double x, double y) {
      return std::min({ring(x, y, 0.25 * w, 0.78 * h, 0.2 * w, 1.2), ring(x, y, 0.75 * w, 0.78 * h, 0.2 * w, 1.2),
                       capsule_sd(x, y, 0.25 * w, 0.78 * h, 0.5 * w, 0.62 * h, 1.2),
                       capsule_sd(x, y, 0.5 * w, 0.62 * h, 0.75 * w, 0.78 * h, 1.2)});
    });
  } else if (label == "chair") {
    blend(img, 0.68, [&](double x, double y) {
      return std::min({box_sd(x, y, 0.2 * w, 0.25 * h, 0.3 * w, 0.95 * h), box_sd(x, y, 0.2 * w, 0.58 * h, 0.85 * w, 0.64 * h),
                       box_sd(x, y, 0.75 * w, 0.6 * h, 0.85 * w, 0.95 * h)});
    });
  } else if (label == "bench") {
    blend(img, 0.66, [&](double x, double y) {
      double d = 1e9;
      for (int k = 0; k < 3; ++k) d = std::min(d, box_sd(x, y, 0.02 * w, (0.55 + 0.06 * k) * h, 0.98 * w, (0.57 + 0.06 * k) * h));
      d = std::min({d, box_sd(x, y, 0.1 * w, 0.6 * h, 0.16 * w, 0.9 * h), box_sd(x, y, 0.84 * w, 0.6 * h, 0.9 * w, 0.9 * h)});
      return d;
    });
  } else if (label == "fence") {
    for (double& v : img.values()) v = 0.3 * v + 0.45;
    blend(img, 0.10, [&](double x, double y) {
      double d = 1e9;
      for (int k = 0; k < 5; ++k) {
        const double bx = (0.1 + 0.2 * k) * w;
        d = std::min(d, box_sd(x, y, bx - 1.0, 0.0, bx + 1.0, h));
      }
      for (int k = 0; k < 4; ++k) {
        const double by = (0.15 + 0.22 * k) * h;
        d = std::min(d, box_sd(x, y, 0.0, by - 1.0, w, by + 1.0));
      }
      return d;
    });
  } else if (label == "kite") {
    blend(img, 0.72, [&](double x, double y) {
      const double dx = std::abs(x - 0.5 * w) / (0.35 * w);
      const double dy = std::abs(y - 0.3 * h) / (0.18 * h);
      return (dx + dy - 1.0) * 0.2 * w;
    });
    blend(img, 0.6, [&](double x, double y) { return capsule_sd(x, y, 0.5 * w, 0.48 * h, 0.42 * w, 0.95 * h, 1.0); });
  } else if (label == "umbrella") {
    blend(img, 0.74, [&](double x, double y) {
      return std::max(ellipse_sd(x, y, 0.5 * w, 0.35 * h, 0.48 * w, 0.2 * h), 0.35 * h - y);
    });
    blend(img, 0.6, [&](double x, double y) { return capsule_sd(x, y, 0.5 * w, 0.35 * h, 0.5 * w, 0.9 * h, 1.2); });
  } else if (label == "traffic light") {
    blend(img, 0.15, [&](double x, double y) { return box_sd(x, y, 0.35 * w, 0.05 * h, 0.65 * w, 0.6 * h); });
    blend(img, 0.9, [&](double x, double y) {
      return std::min({ellipse_sd(x, y, 0.5 * w, 0.15 * h, 0.1 * w, 0.045 * h), ellipse_sd(x, y, 0.5 * w, 0.32 * h, 0.1 * w, 0.045 * h),
                       ellipse_sd(x, y, 0.5 * w, 0.49 * h, 0.1 * w, 0.045 * h)});
    });
    blend(img, 0.5, [&](double x, double y) { return box_sd(x, y, 0.47 * w, 0.6 * h, 0.53 * w, h); });
  } else {
    return std::nullopt;
  }
  img.clamp01();
  return img;
}

}  // namespace ucgp
