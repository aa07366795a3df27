#pragma once

#include "ucgp/cgm.hpp"
#include "ucgp/core.hpp"

#include <vector>

namespace ucgp {

/// Where and how large the patch sits inside a target region.
struct PasteConfig {
  double side_ratio = 0.25;         // patch side / roi height
  double anchor = 0.30;             // patch center, as a fraction of roi height from its top
  double ring_ratio = 0.15;         // background ring width / patch side
  double support_threshold = 0.05;  // alpha above this belongs to the patch support
  double boundary_upper = 0.95;     // alpha in (support_threshold, boundary_upper) is the boundary band

  void validate() const;
};

struct PasteResult {
  IrImage image;                  // x' with the patch composited
  std::vector<double> alpha_full; // full-image soft mask
  std::vector<double> beta_full;  // full-image background ring (0/1)
  Roi roi;                        // target region the patch was placed in
  Roi patch_box;                  // where the rendered square landed
  Roi context_box;                // bounding box of alpha and beta supports (clipped)
  double boundary_upper = 0.95;
  double support_threshold = 0.05;
};

struct ContextStats {
  double mu_alpha = 0, sigma_alpha = 0;
  double mu_beta = 0, sigma_beta = 0;
  double grad_boundary = 0;  // mean gradient magnitude over the alpha boundary band
  double grad_ring = 0;      // mean gradient magnitude over beta
  double alpha_sum = 0;
  double beta_sum = 0;
};

int patch_side(const Roi& roi, const PasteConfig& cfg) noexcept;
/// Placement of a `side`-pixel patch inside `roi`; throws if it does not fit.
Roi patch_box(const Roi& roi, int side, const PasteConfig& cfg);

/// Composites an already-rendered patch. The patch must have side patch_side(roi).
PasteResult paste(const IrImage& x, const RenderedPatch& patch, const Roi& roi, const PasteConfig& cfg);
PasteResult paste(const IrImage& x, const PatchParams& p, const CgmConfig& cgm, const Roi& roi,
                  const PasteConfig& cfg);

/// Central-difference gradient magnitude (one-sided at the border).
double gradient_magnitude(const IrImage& img, int x, int y) noexcept;

/// Weighted statistics for the stealth terms; throws when alpha or beta has no support.
ContextStats context_stats(const PasteResult& r);

/// True when both supports are nonempty, i.e. context_stats is defined.
bool has_context(const PasteResult& r) noexcept;

}  // namespace ucgp
