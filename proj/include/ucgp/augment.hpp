#pragma once

#include "ucgp/cgm.hpp"
#include "ucgp/core.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"

namespace ucgp {

struct Range {
  double lo = 0;
  double hi = 0;
  double mid() const noexcept { return 0.5 * (lo + hi); }
};

/// The physical-transformation distribution. Every stage draws its parameters
/// uniformly from the given ranges; `p_*` are per-stage application probabilities.
struct AugmentConfig {
  Range scale{0.9, 1.1};               // multiplicative
  Range translate{-4.0, 4.0};          // px, drawn independently for x and y
  Range rotation_deg{-5.0, 5.0};
  Range corner_jitter{-0.03, 0.03};    // fraction of the image side, per corner coordinate
  Range blur_sigma{0.0, 1.5};          // px
  Range noise_sigma{0.0, 0.03};        // intensity
  Range quantize_levels{32.0, 256.0};  // levels < 2 disables the stage
  Range brightness{-0.08, 0.08};       // additive
  Range contrast{0.9, 1.1};            // multiplicative about 0.5
  int tps_points = 9;                  // square control grid (4, 9, 16, ...)
  Range tps_disp{-0.02, 0.02};         // fraction of the shorter image side

  double p_geometric = 1.0;
  double p_tps = 1.0;
  double p_blur = 1.0;
  double p_noise = 1.0;
  double p_quantize = 1.0;
  double p_photometric = 1.0;

  void validate() const;
  /// Every range collapsed onto its identity value.
  static AugmentConfig identity();
};

/// One concrete draw from AugmentConfig. Geometric stages apply in the order
/// scale -> rotate -> homography -> translate -> TPS, then blur -> noise ->
/// quantize -> brightness/contrast.
struct TransformSpec {
  double scale = 1.0;
  double rotation_deg = 0.0;
  std::array<Point2, 4> corner_offsets{};  // fractions of width/height for TL, TR, BR, BL
  double tx = 0.0, ty = 0.0;
  std::vector<Point2> tps_src;     // normalized [0,1]^2 control points
  std::vector<Point2> tps_offset;  // displacement, fraction of the shorter side
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  int quantize_levels = 0;  // 0 = off
  double brightness = 0.0;
  double contrast = 1.0;

  bool geometric_identity() const noexcept;
  bool tps_identity() const noexcept;

  friend bool operator==(const TransformSpec& a, const TransformSpec& b);
};

TransformSpec sample_transform(const AugmentConfig& cfg, std::uint64_t seed);

IrImage apply(const TransformSpec& spec, const IrImage& img);

/// Thin-plate spline R^2 -> R^2 with kernel r^2 log r plus an affine part,
/// interpolating src[i] -> dst[i] exactly.
class TpsField {
 public:
  TpsField(std::span<const Point2> src, std::span<const Point2> dst);
  Point2 operator()(Point2 p) const noexcept;

 private:
  std::vector<Point2> ctrl_;
  std::vector<double> wx_, wy_;
  std::array<double, 3> ax_{}, ay_{};
};

/// Output pixel q takes the input at the TPS mapping dst -> src evaluated at q,
/// so content at src[i] moves to dst[i]. Throws on degenerate control sets.
IrImage tps_warp(const IrImage& img, std::span<const Point2> src, std::span<const Point2> dst);

/// Planar homography mapping the 4 `from` corners onto `to` (row-major 3x3).
std::array<double, 9> homography_from_corners(const std::array<Point2, 4>& from, const std::array<Point2, 4>& to);

IrImage gaussian_blur(const IrImage& img, double sigma);

using ImageEvaluator = std::function<double(const IrImage&)>;

/// Mean of `evaluator(apply(sample_transform(cfg, seed + i), x))` for i < n, summed in index order.
double expected_loss(const ImageEvaluator& evaluator, const IrImage& x, const AugmentConfig& cfg, std::size_t n,
                     std::uint64_t seed);

nlohmann::json to_json(const AugmentConfig& cfg);
AugmentConfig augment_config_from_json(const nlohmann::json& j);

}  // namespace ucgp
