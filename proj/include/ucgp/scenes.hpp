#pragma once

#include "ucgp/core.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace ucgp {

/// Procedural infrared-style drawings: a warm figure on a cool background.
/// Shared by the toy encoder (label prototypes) and the synthetic dataset generator.

struct PersonPose {
  double cx = 0.5;          // horizontal center, fraction of canvas width
  double top = 0.06;        // head top, fraction of canvas height
  double height = 0.90;     // figure height, fraction of canvas height
  double width = 0.55;      // shoulder width, fraction of canvas width
  double warmth = 0.82;     // body intensity
  double arm_spread = 0.0;  // arm outward lean, in [0,1]
  double stride = 0.0;      // leg spread, in [0,1]
  double clothing = 0.06;   // how much cooler the torso is than the skin
  double arm_raise = 0.0;   // one forearm lifted toward the head, in [0,1]
};

/// Blends a person silhouette into `canvas`; pose fractions are relative to
/// `box` (the whole canvas when omitted).
void draw_person(IrImage& canvas, const PersonPose& pose, std::optional<Roi> box = std::nullopt);

/// Sketch for one of default_labels(); nullopt for unknown labels. Variant 0 is
/// the canonical drawing on a flat background; other variants draw a jittered
/// figure over a seeded cluttered background.
std::optional<IrImage> label_sketch(const std::string& label, int width = 48, int height = 112,
                                    std::uint64_t variant = 0);

/// Smooth low-frequency background in [lo, hi] plus per-pixel noise of `grain`.
IrImage make_background(int width, int height, std::uint64_t seed, double lo = 0.18, double hi = 0.42,
                        double grain = 0.02);

}  // namespace ucgp
