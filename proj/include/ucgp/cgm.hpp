#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ucgp {

struct CgmConfig {
  int grid_dim = 5;               // G cells per side
  double curvature_limit = 0.40;  // δ: max control-point offset, in cell edges
  double line_width_ratio = 0.20; // stroke width, in cell edges
  double patch_intensity = 0.0;   // black
  int supersample = 4;

  /// Throws on out-of-range fields. δ may be up to 1 here; deployable() is the δ < 0.5 regime.
  void validate() const;
  bool deployable() const noexcept { return curvature_limit < 0.5; }
};

/// Decoded patch genome. Edges are stored once: first the G(G+1) horizontal
/// edges (row j of vertices, column i of cells: index j*G + i), then the G(G+1)
/// vertical edges (index G(G+1) + j*(G+1) + i for vertex column i, cell row j).
struct PatchParams {
  int grid_dim = 0;
  std::vector<double> gates;    // G*G, row-major by cell row v: index v*G + u
  std::vector<double> deforms;  // 2G(G+1), each in [-1,1] (scaled by δ when rendered)
};

struct RenderedPatch {
  int side = 0;
  std::vector<double> alpha;      // side*side, row-major
  std::vector<double> intensity;  // side*side
};

enum class Topology { valid, self_intersecting };

struct Point2 {
  double x = 0;
  double y = 0;
};

/// One quadratic Bézier edge in patch pixel coordinates.
struct EdgeCurve {
  std::size_t index = 0;
  Point2 p0, ctrl, p1;
  std::array<int, 2> from{};  // grid vertex (i, j) of p0
  std::array<int, 2> to{};    // grid vertex of p1
  double opacity = 0;         // max of the adjacent cell gates

  Point2 at(double t) const noexcept;
};

std::size_t edge_count(int grid_dim) noexcept;
std::size_t genome_dim(const CgmConfig& cfg) noexcept;

/// Genome -> params. Gates clamp to [0,1]; deforms clamp to [-1,1], so the
/// rendered control offset never exceeds δ cell edges.
PatchParams decode(std::span<const double> flat, const CgmConfig& cfg);
/// Params -> genome, the inverse of decode on in-box values.
std::vector<double> flatten(const PatchParams& p);

/// Per-edge opacity: max of the (one or two) adjacent cell gates.
std::vector<double> edge_opacity(const PatchParams& p);

/// Geometry of every edge for a patch rendered at `side` pixels. The grid is
/// inset so strokes and maximal bulges stay inside the square.
std::vector<EdgeCurve> edge_curves(const PatchParams& p, const CgmConfig& cfg, double side);
double cell_edge_length(const CgmConfig& cfg, double side) noexcept;
double grid_margin(const CgmConfig& cfg, double side) noexcept;

/// Edges with opacity above this count as present (topology, export).
inline constexpr double kActiveEdgeGate = 0.5;

Topology check_topology(const PatchParams& p, const CgmConfig& cfg);

RenderedPatch render(const PatchParams& p, const CgmConfig& cfg, int side);

/// SVG with one stroked quadratic path per active edge; `size_mm` sets the physical size.
std::string to_svg(const PatchParams& p, const CgmConfig& cfg, double size_mm = 100.0);
void export_vector(const PatchParams& p, const CgmConfig& cfg, const std::filesystem::path& path,
                   double size_mm = 100.0);

nlohmann::json to_json(const CgmConfig& cfg);
CgmConfig cgm_config_from_json(const nlohmann::json& j);
nlohmann::json patch_to_json(const PatchParams& p, const CgmConfig& cfg);
/// Reads {"grid_dim", "gates", "deforms", "config"}; validates lengths and boxes.
std::pair<PatchParams, CgmConfig> patch_from_json(const nlohmann::json& j);
void save_patch(const PatchParams& p, const CgmConfig& cfg, const std::filesystem::path& path);
std::pair<PatchParams, CgmConfig> load_patch(const std::filesystem::path& path);

}  // namespace ucgp
