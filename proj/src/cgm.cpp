#include "ucgp/cgm.hpp"

#include "ucgp/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ucgp {

void CgmConfig::validate() const {
  if (grid_dim < 2) throw config_error("cgm.grid_dim must be >= 2");
  if (!(curvature_limit >= 0.0 && curvature_limit < 1.0)) throw config_error("cgm.curvature_limit must be in [0,1)");
  if (!(line_width_ratio > 0.0 && line_width_ratio < 1.0)) throw config_error("cgm.line_width_ratio must be in (0,1)");
  if (!(patch_intensity >= 0.0 && patch_intensity <= 1.0)) throw config_error("cgm.patch_intensity must be in [0,1]");
  if (supersample < 1) throw config_error("cgm.supersample must be >= 1");
}

Point2 EdgeCurve::at(double t) const noexcept {
  const double s = 1.0 - t;
  return {s * s * p0.x + 2 * s * t * ctrl.x + t * t * p1.x, s * s * p0.y + 2 * s * t * ctrl.y + t * t * p1.y};
}

std::size_t edge_count(int grid_dim) noexcept {
  const auto g = static_cast<std::size_t>(grid_dim);
  return 2 * g * (g + 1);
}

std::size_t genome_dim(const CgmConfig& cfg) noexcept {
  const auto g = static_cast<std::size_t>(cfg.grid_dim);
  return g * g + edge_count(cfg.grid_dim);
}

PatchParams decode(std::span<const double> flat, const CgmConfig& cfg) {
  cfg.validate();
  if (flat.size() != genome_dim(cfg))
    throw runtime_error("genome length " + std::to_string(flat.size()) + " != expected " +
                        std::to_string(genome_dim(cfg)));
  const auto g = static_cast<std::size_t>(cfg.grid_dim);
  PatchParams p;
  p.grid_dim = cfg.grid_dim;
  p.gates.resize(g * g);
  p.deforms.resize(edge_count(cfg.grid_dim));
  for (std::size_t i = 0; i < p.gates.size(); ++i) p.gates[i] = std::clamp(flat[i], 0.0, 1.0);
  for (std::size_t i = 0; i < p.deforms.size(); ++i) p.deforms[i] = std::clamp(flat[g * g + i], -1.0, 1.0);
  return p;
}

std::vector<double> flatten(const PatchParams& p) {
  std::vector<double> out(p.gates);
  out.insert(out.end(), p.deforms.begin(), p.deforms.end());
  return out;
}

std::vector<double> edge_opacity(const PatchParams& p) {
  const int g = p.grid_dim;
  const auto gate = [&](int u, int v) { return p.gates[static_cast<std::size_t>(v * g + u)]; };
  std::vector<double> out(edge_count(g), 0.0);
  const std::size_t horizontal = static_cast<std::size_t>(g) * (g + 1);
  for (int j = 0; j <= g; ++j) {
    for (int i = 0; i < g; ++i) {
      double o = 0.0;
      if (j > 0) o = std::max(o, gate(i, j - 1));
      if (j < g) o = std::max(o, gate(i, j));
      out[static_cast<std::size_t>(j * g + i)] = o;
    }
  }
  for (int j = 0; j < g; ++j) {
    for (int i = 0; i <= g; ++i) {
      double o = 0.0;
      if (i > 0) o = std::max(o, gate(i - 1, j));
      if (i < g) o = std::max(o, gate(i, j));
      out[horizontal + static_cast<std::size_t>(j * (g + 1) + i)] = o;
    }
  }
  return out;
}

double cell_edge_length(const CgmConfig& cfg, double side) noexcept {
  // side = G*L + 2*margin, margin = L*(w/2 + δ/2): half a stroke plus the
  // largest bulge of a quadratic whose control point sits δ*L off the chord.
  return side / (cfg.grid_dim + cfg.line_width_ratio + cfg.curvature_limit);
}

double grid_margin(const CgmConfig& cfg, double side) noexcept {
  return 0.5 * cell_edge_length(cfg, side) * (cfg.line_width_ratio + cfg.curvature_limit);
}

std::vector<EdgeCurve> edge_curves(const PatchParams& p, const CgmConfig& cfg, double side) {
  const int g = p.grid_dim;
  if (g != cfg.grid_dim || p.gates.size() != static_cast<std::size_t>(g * g) || p.deforms.size() != edge_count(g))
    throw runtime_error("patch params do not match grid dimension");
  const double len = cell_edge_length(cfg, side);
  const double m = grid_margin(cfg, side);
  const auto opacity = edge_opacity(p);
  const auto vertex = [&](int i, int j) { return Point2{m + i * len, m + j * len}; };

  std::vector<EdgeCurve> out;
  out.reserve(edge_count(g));
  const auto make = [&](std::size_t idx, int i0, int j0, int i1, int j1) {
    EdgeCurve e;
    e.index = idx;
    e.p0 = vertex(i0, j0);
    e.p1 = vertex(i1, j1);
    e.from = {i0, j0};
    e.to = {i1, j1};
    const double dx = e.p1.x - e.p0.x;
    const double dy = e.p1.y - e.p0.y;
    const double n = std::hypot(dx, dy);
    // left normal of the edge direction
    const double nx = -dy / n;
    const double ny = dx / n;
    const double offset = p.deforms[idx] * cfg.curvature_limit * len;
    e.ctrl = {0.5 * (e.p0.x + e.p1.x) + nx * offset, 0.5 * (e.p0.y + e.p1.y) + ny * offset};
    e.opacity = opacity[idx];
    out.push_back(e);
  };
  for (int j = 0; j <= g; ++j)
    for (int i = 0; i < g; ++i) make(static_cast<std::size_t>(j * g + i), i, j, i + 1, j);
  const std::size_t horizontal = static_cast<std::size_t>(g) * (g + 1);
  for (int j = 0; j < g; ++j)
    for (int i = 0; i <= g; ++i) make(horizontal + static_cast<std::size_t>(j * (g + 1) + i), i, j, i, j + 1);
  return out;
}

namespace {

constexpr int kTopologySegments = 64;
constexpr int kRenderSegments = 16;

std::vector<Point2> flatten_curve(const EdgeCurve& e, int segments) {
  std::vector<Point2> pts(static_cast<std::size_t>(segments) + 1);
  for (int k = 0; k <= segments; ++k) pts[static_cast<std::size_t>(k)] = e.at(static_cast<double>(k) / segments);
  return pts;
}

double cross(Point2 o, Point2 a, Point2 b) noexcept { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool on_segment(Point2 a, Point2 b, Point2 p) noexcept {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) noexcept {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

struct Box {
  double x0, y0, x1, y1;
  bool overlaps(const Box& o) const noexcept { return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1; }
};

Box curve_box(const EdgeCurve& e, double pad) {
  return {std::min({e.p0.x, e.ctrl.x, e.p1.x}) - pad, std::min({e.p0.y, e.ctrl.y, e.p1.y}) - pad,
          std::max({e.p0.x, e.ctrl.x, e.p1.x}) + pad, std::max({e.p0.y, e.ctrl.y, e.p1.y}) + pad};
}

double point_segment_dist2(Point2 p, Point2 a, Point2 b) noexcept {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double wx = p.x - a.x;
  const double wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx;
  const double dy = wy - t * vy;
  return dx * dx + dy * dy;
}

}  // namespace

Topology check_topology(const PatchParams& p, const CgmConfig& cfg) {
  // Geometry is scale-free; unit cells keep the numbers tame.
  const auto curves = edge_curves(p, cfg, cfg.grid_dim + cfg.line_width_ratio + cfg.curvature_limit);
  std::vector<const EdgeCurve*> active;
  for (const auto& e : curves)
    if (e.opacity > kActiveEdgeGate) active.push_back(&e);

  std::vector<std::vector<Point2>> polylines;
  std::vector<Box> boxes;
  for (const auto* e : active) {
    polylines.push_back(flatten_curve(*e, kTopologySegments));
    boxes.push_back(curve_box(*e, 1e-9));
  }

  for (std::size_t a = 0; a < active.size(); ++a) {
    for (std::size_t b = a + 1; b < active.size(); ++b) {
      if (!boxes[a].overlaps(boxes[b])) continue;
      const auto& ea = *active[a];
      const auto& eb = *active[b];
      // Which ends (if any) coincide at a shared grid vertex.
      const bool a0b0 = ea.from == eb.from, a0b1 = ea.from == eb.to;
      const bool a1b0 = ea.to == eb.from, a1b1 = ea.to == eb.to;
      const auto& pa = polylines[a];
      const auto& pb = polylines[b];
      const int last = kTopologySegments - 1;
      for (int sa = 0; sa < kTopologySegments; ++sa) {
        for (int sb = 0; sb < kTopologySegments; ++sb) {
          // Segments meeting at the shared vertex touch there by construction.
          if ((a0b0 && sa == 0 && sb == 0) || (a0b1 && sa == 0 && sb == last) ||
              (a1b0 && sa == last && sb == 0) || (a1b1 && sa == last && sb == last))
            continue;
          if (segments_intersect(pa[sa], pa[sa + 1], pb[sb], pb[sb + 1])) return Topology::self_intersecting;
        }
      }
    }
  }
  return Topology::valid;
}

RenderedPatch render(const PatchParams& p, const CgmConfig& cfg, int side) {
  cfg.validate();
  if (side < 8) throw runtime_error("patch side must be at least 8 px, got " + std::to_string(side));
  // The δ < 0.5 regime is intersection-free for this curve family, so only
  // configurations beyond it pay for the explicit check.
  if (!cfg.deployable() && check_topology(p, cfg) != Topology::valid)
    throw runtime_error("patch topology is self-intersecting");

  const int ss = cfg.supersample;
  const int fine = side * ss;
  const double inv = 1.0 / ss;
  const auto curves = edge_curves(p, cfg, side);
  const double half_width = 0.5 * cfg.line_width_ratio * cell_edge_length(cfg, side);
  const double hw2 = half_width * half_width;

  std::vector<double> cover(static_cast<std::size_t>(fine) * fine, 0.0);
  for (const auto& e : curves) {
    if (e.opacity <= 0.0) continue;
    const auto pts = flatten_curve(e, kRenderSegments);
    const Box box = curve_box(e, half_width);
    const int fx0 = std::max(0, static_cast<int>(std::floor(box.x0 * ss)));
    const int fy0 = std::max(0, static_cast<int>(std::floor(box.y0 * ss)));
    const int fx1 = std::min(fine - 1, static_cast<int>(std::ceil(box.x1 * ss)));
    const int fy1 = std::min(fine - 1, static_cast<int>(std::ceil(box.y1 * ss)));
    for (int fy = fy0; fy <= fy1; ++fy) {
      const double y = (fy + 0.5) * inv;
      for (int fx = fx0; fx <= fx1; ++fx) {
        double& c = cover[static_cast<std::size_t>(fy) * fine + fx];
        if (c >= e.opacity) continue;
        const Point2 q{(fx + 0.5) * inv, y};
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
          if (point_segment_dist2(q, pts[k], pts[k + 1]) <= hw2) {
            c = e.opacity;
            break;
          }
        }
      }
    }
  }

  RenderedPatch out;
  out.side = side;
  out.alpha.assign(static_cast<std::size_t>(side) * side, 0.0);
  out.intensity.assign(out.alpha.size(), cfg.patch_intensity);
  const double norm = 1.0 / (ss * ss);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      double sum = 0.0;
      for (int dy = 0; dy < ss; ++dy) {
        const double* row = cover.data() + static_cast<std::size_t>(y * ss + dy) * fine + x * ss;
        for (int dx = 0; dx < ss; ++dx) sum += row[dx];
      }
      out.alpha[static_cast<std::size_t>(y) * side + x] = std::min(1.0, sum * norm);
    }
  }
  return out;
}

std::string to_svg(const PatchParams& p, const CgmConfig& cfg, double size_mm) {
  constexpr double kViewBox = 1000.0;
  const auto curves = edge_curves(p, cfg, kViewBox);
  const double stroke = cfg.line_width_ratio * cell_edge_length(cfg, kViewBox);
  std::ostringstream os;
  os.precision(10);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_mm << "mm\" height=\"" << size_mm
     << "mm\" viewBox=\"0 0 " << kViewBox << ' ' << kViewBox << "\">\n";
  for (const auto& e : curves) {
    if (e.opacity <= kActiveEdgeGate) continue;
    os << "  <path id=\"e" << e.index << "\" d=\"M " << e.p0.x << ' ' << e.p0.y << " Q " << e.ctrl.x << ' '
       << e.ctrl.y << ' ' << e.p1.x << ' ' << e.p1.y << "\" fill=\"none\" stroke=\"black\" stroke-width=\""
       << stroke << "\" stroke-linecap=\"round\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void export_vector(const PatchParams& p, const CgmConfig& cfg, const std::filesystem::path& path, double size_mm) {
  if (check_topology(p, cfg) != Topology::valid) throw runtime_error("refusing to export a self-intersecting patch");
  const auto svg = to_svg(p, cfg, size_mm);
  std::ofstream out(path);
  if (!out) throw runtime_error("cannot write " + path.string());
  out << svg;
  if (!out) throw runtime_error("write failed for " + path.string());
}

nlohmann::json to_json(const CgmConfig& cfg) {
  return {{"grid_dim", cfg.grid_dim},
          {"curvature_limit", cfg.curvature_limit},
          {"line_width_ratio", cfg.line_width_ratio},
          {"patch_intensity", cfg.patch_intensity},
          {"supersample", cfg.supersample}};
}

CgmConfig cgm_config_from_json(const nlohmann::json& j) {
  CgmConfig cfg;
  cfg.grid_dim = j.value("grid_dim", cfg.grid_dim);
  cfg.curvature_limit = j.value("curvature_limit", cfg.curvature_limit);
  cfg.line_width_ratio = j.value("line_width_ratio", cfg.line_width_ratio);
  cfg.patch_intensity = j.value("patch_intensity", cfg.patch_intensity);
  cfg.supersample = j.value("supersample", cfg.supersample);
  cfg.validate();
  return cfg;
}

nlohmann::json patch_to_json(const PatchParams& p, const CgmConfig& cfg) {
  return {{"grid_dim", p.grid_dim}, {"gates", p.gates}, {"deforms", p.deforms}, {"config", to_json(cfg)}};
}

std::pair<PatchParams, CgmConfig> patch_from_json(const nlohmann::json& j) {
  try {
    CgmConfig cfg = j.contains("config") ? cgm_config_from_json(j.at("config")) : CgmConfig{};
    PatchParams p;
    p.grid_dim = j.at("grid_dim").get<int>();
    p.gates = j.at("gates").get<std::vector<double>>();
    p.deforms = j.at("deforms").get<std::vector<double>>();
    if (p.grid_dim != cfg.grid_dim) throw config_error("patch grid_dim disagrees with its config");
    if (p.gates.size() != static_cast<std::size_t>(p.grid_dim * p.grid_dim) || p.deforms.size() != edge_count(p.grid_dim))
      throw config_error("patch gate/deform counts do not match grid_dim");
    for (double g : p.gates)
      if (!(g >= 0.0 && g <= 1.0)) throw config_error("patch gate outside [0,1]");
    for (double d : p.deforms)
      if (!(d >= -1.0 && d <= 1.0)) throw config_error("patch deform outside [-1,1]");
    return {std::move(p), cfg};
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed patch JSON: ") + e.what());
  }
}

void save_patch(const PatchParams& p, const CgmConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw runtime_error("cannot write " + path.string());
  out << patch_to_json(p, cfg).dump(2) << '\n';
}

std::pair<PatchParams, CgmConfig> load_patch(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw missing_input("patch file not found: " + path.string());
  std::ifstream in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("malformed patch file " + path.string() + ": " + e.what());
  }
  return patch_from_json(j);
}

}  // namespace ucgp
