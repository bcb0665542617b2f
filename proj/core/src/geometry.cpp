#include "palletize/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace palletize {

namespace {

constexpr double kAreaEps = 1e-9;
constexpr double kHullTol = 1e-9;
constexpr double kCornerInset = 1e-7;
constexpr double kPi = 3.14159265358979323846;

// Axis permutations for the six orientations. oriented[i] = dims[perm[i]].
constexpr std::array<std::array<int, 3>, 6> kPerms = {{
    {0, 1, 2},
    {0, 2, 1},
    {1, 0, 2},
    {1, 2, 0},
    {2, 0, 1},
    {2, 1, 0},
}};
constexpr std::array<int, 6> kInversePerm = {0, 1, 2, 4, 3, 5};

using Point = std::array<double, 2>;

double polygon_area(const std::vector<Point>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    twice += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * std::abs(twice);
}

// Clip a convex polygon with the half-plane keep_below ? (coord <= bound)
// : (coord >= bound) along the given axis (Sutherland-Hodgman step).
std::vector<Point> clip_halfplane(const std::vector<Point>& poly, int axis,
                                  double bound, bool keep_below) {
  std::vector<Point> out;
  out.reserve(poly.size() + 2);
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& cur = poly[i];
    const Point& nxt = poly[(i + 1) % n];
    const double cv = cur[axis] - bound;
    const double nv = nxt[axis] - bound;
    const bool cur_in = keep_below ? cv <= 0.0 : cv >= 0.0;
    const bool nxt_in = keep_below ? nv <= 0.0 : nv >= 0.0;
    if (cur_in) out.push_back(cur);
    if (cur_in != nxt_in) {
      const double t = cv / (cv - nv);
      Point inter;
      inter[axis] = bound;
      inter[1 - axis] = cur[1 - axis] + t * (nxt[1 - axis] - cur[1 - axis]);
      out.push_back(inter);
    }
  }
  return out;
}

std::vector<Point> clip_to_cell(const std::vector<Point>& poly, double x0, double y0) {
  auto p = clip_halfplane(poly, 0, x0, false);
  if (p.empty()) return p;
  p = clip_halfplane(p, 0, x0 + 1.0, true);
  if (p.empty()) return p;
  p = clip_halfplane(p, 1, y0, false);
  if (p.empty()) return p;
  return clip_halfplane(p, 1, y0 + 1.0, true);
}

double cross(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Monotone chain; returns counter-clockwise hull without repeated endpoint.
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point& a, const Point& b) {
                          return std::abs(a[0] - b[0]) < 1e-12 &&
                                 std::abs(a[1] - b[1]) < 1e-12;
                        }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Point> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const double vx = b[0] - a[0], vy = b[1] - a[1];
  const double wx = p[0] - a[0], wy = p[1] - a[1];
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

void GridConfig::validate() const {
  if (length_cells < 1 || width_cells < 1 || height_cells < 1) {
    throw ConfigError("grid cell counts must be >= 1");
  }
  if (!(cell_size > 0.0)) {
    throw ConfigError("grid cell_size must be positive");
  }
}

void BoxSpec::validate() const {
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
    throw ConfigError("box dims must be positive");
  }
  if (!(density > 0.0) || !(rigidity > 0.0)) {
    throw ConfigError("box density and rigidity must be positive");
  }
}

std::array<int, 3> oriented_dims(const BoxSpec& box, Orientation o) {
  if (o.code < 0 || o.code >= Orientation::kCount) {
    throw ConfigError("orientation code out of range");
  }
  const auto& p = kPerms[o.code];
  return {box.dims[p[0]], box.dims[p[1]], box.dims[p[2]]};
}

Orientation inverse_orientation(Orientation o) {
  if (o.code < 0 || o.code >= Orientation::kCount) {
    throw ConfigError("orientation code out of range");
  }
  return Orientation{kInversePerm[o.code]};
}

double SupportContact::total_area() const {
  double s = 0.0;
  for (const auto& [id, a] : contacts) s += a;
  return s;
}

double SupportContact::area_for(int supporter_id) const {
  for (const auto& [id, a] : contacts) {
    if (id == supporter_id) return a;
  }
  return 0.0;
}

PalletState::PalletState(GridConfig config) : config_(config) {
  config_.validate();
  const std::size_t n = static_cast<std::size_t>(config_.max_volume_cells());
  cells_.assign(n, kEmptyCell);
  density_.assign(n, 0.0);
  rigidity_.assign(n, 0.0);
  heightmap_.assign(static_cast<std::size_t>(config_.length_cells) * config_.width_cells, 0);
}

int PalletState::rest_height(const BoxSpec& box, Orientation o, int x, int y) const {
  const auto od = oriented_dims(box, o);
  if (!in_bounds(od, x, y)) {
    throw OutOfBoundsError("footprint exceeds grid bounds");
  }
  int z = 0;
  for (int cx = x; cx < x + od[0]; ++cx) {
    for (int cy = y; cy < y + od[1]; ++cy) {
      z = std::max(z, height_at(cx, cy));
    }
  }
  return z;
}

void PalletState::place(const Placement& placement) {
  placement.box.validate();
  const auto od = placement.oriented();
  if (!in_bounds(od, placement.x, placement.y) || placement.z < 0) {
    throw OutOfBoundsError("placement outside grid");
  }
  if (placement.z + od[2] > config_.height_cells) {
    throw HeightExceededError("stack would exceed max height");
  }
  for (int cx = placement.x; cx < placement.x + od[0]; ++cx) {
    for (int cy = placement.y; cy < placement.y + od[1]; ++cy) {
      for (int cz = placement.z; cz < placement.z + od[2]; ++cz) {
        if (cells_[index(cx, cy, cz)] != kEmptyCell) {
          throw OverlapError("placement overlaps an existing box");
        }
      }
    }
  }

  // Capture the contact map before committing cells; it stays valid because
  // boxes are never removed.
  SupportContact contact = support_contact(*this, placement);

  for (int cx = placement.x; cx < placement.x + od[0]; ++cx) {
    for (int cy = placement.y; cy < placement.y + od[1]; ++cy) {
      for (int cz = placement.z; cz < placement.z + od[2]; ++cz) {
        const std::size_t i = index(cx, cy, cz);
        cells_[i] = placement.box.id;
        density_[i] = placement.box.density;
        rigidity_[i] = placement.box.rigidity;
      }
      auto& h = heightmap_[static_cast<std::size_t>(cx) * config_.width_cells + cy];
      h = std::max(h, placement.z + od[2]);
    }
  }
  placed_.push_back(placement);
  recorded_contacts_.push_back(std::move(contact.contacts));
}

std::int64_t PalletState::occupied_cell_count() const {
  return static_cast<std::int64_t>(
      std::count_if(cells_.begin(), cells_.end(),
                    [](int c) { return c != kEmptyCell; }));
}

std::int64_t PalletState::placed_volume_cells() const {
  std::int64_t v = 0;
  for (const auto& p : placed_) v += p.box.volume_cells();
  return v;
}

SupportContact support_contact(const PalletState& pallet, const Placement& placement,
                               double dx, double dy, double rot_deg) {
  const auto od = placement.oriented();
  if (!pallet.in_bounds(od, placement.x, placement.y)) {
    throw OutOfBoundsError("footprint exceeds grid bounds");
  }
  const GridConfig& cfg = pallet.config();
  const int z = placement.z;

  // A cell column supports the base at level z when its stack top is exactly
  // at z (the floor for z == 0) and nothing other than the evaluated box
  // occupies level z there.
  auto supporter_id_at = [&](int cx, int cy) -> int {
    if (cx < 0 || cy < 0 || cx >= cfg.length_cells || cy >= cfg.width_cells) {
      return kEmptyCell;
    }
    if (z < cfg.height_cells) {
      const int at_z = pallet.cell(cx, cy, z);
      if (at_z != kEmptyCell && at_z != placement.box.id) return kEmptyCell;
    }
    if (z == 0) return kFloorId;
    const int below = pallet.cell(cx, cy, z - 1);
    return below;  // kEmptyCell when unsupported
  };

  SupportContact result;
  auto add_contact = [&](int id, double area) {
    for (auto& [cid, a] : result.contacts) {
      if (cid == id) {
        a += area;
        return;
      }
    }
    result.contacts.emplace_back(id, area);
  };

  const double footprint_area = static_cast<double>(od[0]) * od[1];
  std::vector<Point> hull_points;

  if (dx == 0.0 && dy == 0.0 && rot_deg == 0.0) {
    double supported = 0.0;
    for (int cx = placement.x; cx < placement.x + od[0]; ++cx) {
      for (int cy = placement.y; cy < placement.y + od[1]; ++cy) {
        const int sid = supporter_id_at(cx, cy);
        if (sid == kEmptyCell) continue;
        supported += 1.0;
        add_contact(sid, 1.0);
        hull_points.push_back({static_cast<double>(cx), static_cast<double>(cy)});
        hull_points.push_back({static_cast<double>(cx + 1), static_cast<double>(cy)});
        hull_points.push_back({static_cast<double>(cx + 1), static_cast<double>(cy + 1)});
        hull_points.push_back({static_cast<double>(cx), static_cast<double>(cy + 1)});
      }
    }
    result.ratio = supported / footprint_area;
    const std::array<std::pair<int, int>, 4> corner_cells = {{
        {placement.x, placement.y},
        {placement.x + od[0] - 1, placement.y},
        {placement.x, placement.y + od[1] - 1},
        {placement.x + od[0] - 1, placement.y + od[1] - 1},
    }};
    for (const auto& [cx, cy] : corner_cells) {
      if (supporter_id_at(cx, cy) != kEmptyCell) ++result.corners;
    }
  } else {
    const double cx0 = placement.x + dx + 0.5 * od[0];
    const double cy0 = placement.y + dy + 0.5 * od[1];
    const double hx = 0.5 * od[0];
    const double hy = 0.5 * od[1];
    const double theta = rot_deg * kPi / 180.0;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    auto base_point = [&](double ux, double uy) -> Point {
      return {cx0 + ux * ct - uy * st, cy0 + ux * st + uy * ct};
    };
    const std::vector<Point> base = {
        base_point(-hx, -hy), base_point(hx, -hy),
        base_point(hx, hy), base_point(-hx, hy)};

    double minx = base[0][0], maxx = base[0][0];
    double miny = base[0][1], maxy = base[0][1];
    for (const auto& p : base) {
      minx = std::min(minx, p[0]);
      maxx = std::max(maxx, p[0]);
      miny = std::min(miny, p[1]);
      maxy = std::max(maxy, p[1]);
    }
    const int x_lo = std::max(0, static_cast<int>(std::floor(minx)));
    const int x_hi = std::min(cfg.length_cells - 1, static_cast<int>(std::floor(maxx)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(miny)));
    const int y_hi = std::min(cfg.width_cells - 1, static_cast<int>(std::floor(maxy)));

    double supported = 0.0;
    for (int cx = x_lo; cx <= x_hi; ++cx) {
      for (int cy = y_lo; cy <= y_hi; ++cy) {
        const int sid = supporter_id_at(cx, cy);
        if (sid == kEmptyCell) continue;
        const auto clipped = clip_to_cell(base, cx, cy);
        const double area = polygon_area(clipped);
        if (area <= kAreaEps) continue;
        supported += area;
        add_contact(sid, area);
        hull_points.insert(hull_points.end(), clipped.begin(), clipped.end());
      }
    }
    result.ratio = supported / footprint_area;

    const std::array<std::pair<double, double>, 4> corner_offsets = {{
        {-(hx - kCornerInset), -(hy - kCornerInset)},
        {hx - kCornerInset, -(hy - kCornerInset)},
        {-(hx - kCornerInset), hy - kCornerInset},
        {hx - kCornerInset, hy - kCornerInset},
    }};
    for (const auto& [ux, uy] : corner_offsets) {
      const Point p = base_point(ux, uy);
      const int cx = static_cast<int>(std::floor(p[0]));
      const int cy = static_cast<int>(std::floor(p[1]));
      if (supporter_id_at(cx, cy) != kEmptyCell) ++result.corners;
    }
  }

  result.region_hull = convex_hull(std::move(hull_points));
  return result;
}

bool hull_contains(const std::vector<std::array<double, 2>>& hull, double px,
                   double py, double margin) {
  if (hull.empty()) return false;
  const Point p{px, py};
  if (hull.size() == 1) {
    return point_segment_distance(p, hull[0], hull[0]) <= margin + kHullTol;
  }
  if (hull.size() == 2) {
    return point_segment_distance(p, hull[0], hull[1]) <= margin + kHullTol;
  }
  bool inside = true;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point& a = hull[i];
    const Point& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, p) < -kHullTol) {
      inside = false;
      break;
    }
  }
  if (inside) return true;
  if (margin <= 0.0) return false;
  double dist = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    dist = std::min(dist, point_segment_distance(p, hull[i], hull[(i + 1) % hull.size()]));
  }
  return dist <= margin + kHullTol;
}

}  // namespace palletize
