#include "ucgp/paste.hpp"

#include "ucgp/error.hpp"

#include <algorithm>
#include <cmath>

namespace ucgp {

void PasteConfig::validate() const {
  if (!(side_ratio > 0.0 && side_ratio <= 1.0)) throw config_error("paste.side_ratio must be in (0,1]");
  if (!(anchor >= 0.0 && anchor <= 1.0)) throw config_error("paste.anchor must be in [0,1]");
  if (!(ring_ratio > 0.0 && ring_ratio < 1.0)) throw config_error("paste.ring_ratio must be in (0,1)");
  if (!(support_threshold > 0.0 && support_threshold < boundary_upper && boundary_upper < 1.0))
    throw config_error("paste thresholds must satisfy 0 < support < boundary_upper < 1");
}

int patch_side(const Roi& roi, const PasteConfig& cfg) noexcept {
  return static_cast<int>(std::lround(roi.h * cfg.side_ratio));
}

Roi patch_box(const Roi& roi, int side, const PasteConfig& cfg) {
  if (side < 8) throw runtime_error("patch side " + std::to_string(side) + " px is below 8 px");
  if (side > roi.w || side > roi.h) throw runtime_error("patch does not fit inside the target region");
  Roi box;
  box.w = box.h = side;
  box.x0 = roi.x0 + static_cast<int>(std::lround((roi.w - side) / 2.0));
  box.y0 = roi.y0 + static_cast<int>(std::lround(cfg.anchor * roi.h - side / 2.0));
  box.y0 = std::clamp(box.y0, roi.y0, roi.y0 + roi.h - side);
  return box;
}

PasteResult paste(const IrImage& x, const RenderedPatch& patch, const Roi& roi, const PasteConfig& cfg) {
  cfg.validate();
  if (!roi.inside(x)) throw runtime_error("ROI lies outside the image");
  const int side = patch_side(roi, cfg);
  if (patch.side != side)
    throw runtime_error("rendered patch side " + std::to_string(patch.side) + " != required " + std::to_string(side));
  const Roi box = patch_box(roi, side, cfg);

  const int w = x.width();
  const int h = x.height();
  PasteResult r;
  r.image = x;
  r.roi = roi;
  r.patch_box = box;
  r.support_threshold = cfg.support_threshold;
  r.boundary_upper = cfg.boundary_upper;
  r.alpha_full.assign(x.size(), 0.0);
  r.beta_full.assign(x.size(), 0.0);

  for (int py = 0; py < side; ++py) {
    for (int px = 0; px < side; ++px) {
      const std::size_t k = static_cast<std::size_t>(py) * side + px;
      const double a = patch.alpha[k];
      if (a <= 0.0) continue;
      const int gx = box.x0 + px;
      const int gy = box.y0 + py;
      const std::size_t g = static_cast<std::size_t>(gy) * w + gx;
      r.alpha_full[g] = a;
      r.image(gx, gy) = std::clamp((1.0 - a) * x(gx, gy) + a * patch.intensity[k], 0.0, 1.0);
    }
  }

  // Background ring: disk dilation of the thresholded support, minus the support.
  const int ring = std::max(1, static_cast<int>(std::lround(cfg.ring_ratio * side)));
  const int cx0 = std::max(0, box.x0 - ring), cy0 = std::max(0, box.y0 - ring);
  const int cx1 = std::min(w - 1, box.x0 + side - 1 + ring), cy1 = std::min(h - 1, box.y0 + side - 1 + ring);
  r.context_box = Roi{cx0, cy0, cx1 - cx0 + 1, cy1 - cy0 + 1};
  const auto support = [&](int gx, int gy) {
    return r.alpha_full[static_cast<std::size_t>(gy) * w + gx] > cfg.support_threshold;
  };
  const int r2 = ring * ring;
  for (int gy = box.y0; gy < box.y0 + side; ++gy) {
    for (int gx = box.x0; gx < box.x0 + side; ++gx) {
      if (!support(gx, gy)) continue;
      for (int dy = -ring; dy <= ring; ++dy) {
        const int yy = gy + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -ring; dx <= ring; ++dx) {
          if (dx * dx + dy * dy > r2) continue;
          const int xx = gx + dx;
          if (xx < 0 || xx >= w) continue;
          r.beta_full[static_cast<std::size_t>(yy) * w + xx] = 1.0;
        }
      }
    }
  }
  for (int gy = box.y0; gy < box.y0 + side; ++gy)
    for (int gx = box.x0; gx < box.x0 + side; ++gx)
      if (support(gx, gy)) r.beta_full[static_cast<std::size_t>(gy) * w + gx] = 0.0;
  return r;
}

PasteResult paste(const IrImage& x, const PatchParams& p, const CgmConfig& cgm, const Roi& roi,
                  const PasteConfig& cfg) {
  if (!roi.inside(x)) throw runtime_error("ROI lies outside the image");
  const int side = patch_side(roi, cfg);
  if (side < 8) throw runtime_error("patch side " + std::to_string(side) + " px is below 8 px");
  return paste(x, render(p, cgm, side), roi, cfg);
}

double gradient_magnitude(const IrImage& img, int x, int y) noexcept {
  const int w = img.width();
  const int h = img.height();
  double gx = 0.0, gy = 0.0;
  if (w > 1) {
    if (x == 0) gx = img(1, y) - img(0, y);
    else if (x == w - 1) gx = img(w - 1, y) - img(w - 2, y);
    else gx = 0.5 * (img(x + 1, y) - img(x - 1, y));
  }
  if (h > 1) {
    if (y == 0) gy = img(x, 1) - img(x, 0);
    else if (y == h - 1) gy = img(x, h - 1) - img(x, h - 2);
    else gy = 0.5 * (img(x, y + 1) - img(x, y - 1));
  }
  return std::sqrt(gx * gx + gy * gy);
}

bool has_context(const PasteResult& r) noexcept {
  bool alpha = false, beta = false;
  for (double a : r.alpha_full)
    if (a > 0.0) { alpha = true; break; }
  for (double b : r.beta_full)
    if (b > 0.0) { beta = true; break; }
  return alpha && beta;
}

ContextStats context_stats(const PasteResult& r) {
  const IrImage& img = r.image;
  const int w = img.width();
  const Roi& c = r.context_box;
  ContextStats s;
  double sa = 0, sb = 0, sax = 0, sbx = 0;
  double g_bound = 0, g_ring = 0;
  std::size_t n_bound = 0;
  for (int y = c.y0; y < c.y0 + c.h; ++y) {
    for (int x = c.x0; x < c.x0 + c.w; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * w + x;
      const double a = r.alpha_full[k];
      const double b = r.beta_full[k];
      if (a <= 0.0 && b <= 0.0) continue;
      const double v = img(x, y);
      sa += a;
      sax += a * v;
      sb += b;
      sbx += b * v;
      if (a > r.support_threshold && a < r.boundary_upper) {
        g_bound += gradient_magnitude(img, x, y);
        ++n_bound;
      }
      if (b > 0.0) g_ring += b * gradient_magnitude(img, x, y);
    }
  }
  if (!(sa > 0.0)) throw runtime_error("patch mask has no support");
  if (!(sb > 0.0)) throw runtime_error("background ring has no support");
  s.alpha_sum = sa;
  s.beta_sum = sb;
  s.mu_alpha = sax / sa;
  s.mu_beta = sbx / sb;
  double va = 0, vb = 0;
  for (int y = c.y0; y < c.y0 + c.h; ++y) {
    for (int x = c.x0; x < c.x0 + c.w; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * w + x;
      const double v = img(x, y);
      if (r.alpha_full[k] > 0.0) va += r.alpha_full[k] * (v - s.mu_alpha) * (v - s.mu_alpha);
      if (r.beta_full[k] > 0.0) vb += r.beta_full[k] * (v - s.mu_beta) * (v - s.mu_beta);
    }
  }
  s.sigma_alpha = std::sqrt(va / sa);
  s.sigma_beta = std::sqrt(vb / sb);
  // An all-saturated mask has no boundary band; its boundary gradient is taken as 0.
  s.grad_boundary = n_bound > 0 ? g_bound / static_cast<double>(n_bound) : 0.0;
  s.grad_ring = g_ring / sb;
  return s;
}

}  // namespace ucgp
