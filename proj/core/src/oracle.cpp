#include "palletize/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace palletize {

namespace {

constexpr double kRatioTol = 1e-12;
constexpr double kLoadTol = 1e-9;
constexpr double kMaxOffsetCells = 0.5;
constexpr double kMaxRotDeg = 15.0;

struct LoadNode {
  int id;
  double mass;
  double capacity;  // rigidity * C0 * top_area
  int base_z;
  const std::vector<std::pair<int, double>>* contacts;
};

// Propagates weights top-down. Returns per-id incoming load; appends floor
// absorption to *floor_load.
std::unordered_map<int, double> propagate_loads(std::vector<LoadNode>& nodes,
                                                double* floor_load) {
  std::stable_sort(nodes.begin(), nodes.end(),
                   [](const LoadNode& a, const LoadNode& b) { return a.base_z > b.base_z; });
  std::unordered_map<int, double> incoming;
  incoming.reserve(nodes.size());
  for (const auto& n : nodes) incoming.emplace(n.id, 0.0);
  for (const auto& n : nodes) {
    const double weight = n.mass + incoming[n.id];
    double total_area = 0.0;
    for (const auto& [sid, area] : *n.contacts) total_area += area;
    if (total_area <= 0.0) continue;  // floating box transmits nothing
    for (const auto& [sid, area] : *n.contacts) {
      const double share = weight * area / total_area;
      if (sid == kFloorId) {
        *floor_load += share;
      } else {
        incoming[sid] += share;
      }
    }
  }
  return incoming;
}

std::vector<LoadNode> pallet_nodes(const PalletState& pallet, const OracleConfig& cfg) {
  std::vector<LoadNode> nodes;
  nodes.reserve(pallet.placed().size());
  for (std::size_t i = 0; i < pallet.placed().size(); ++i) {
    const Placement& p = pallet.placed()[i];
    const auto od = p.oriented();
    nodes.push_back(LoadNode{
        p.box.id,
        p.box.mass(),
        p.box.rigidity * cfg.crush_coefficient * static_cast<double>(od[0]) * od[1],
        p.z,
        &pallet.recorded_contacts(i),
    });
  }
  return nodes;
}

// First box in placement order whose load exceeds its capacity, if any.
std::optional<int> first_crushed(const PalletState& pallet, const OracleConfig& cfg,
                                 const SupportContact* candidate_contact,
                                 const Placement* candidate) {
  std::vector<LoadNode> nodes = pallet_nodes(pallet, cfg);
  if (candidate != nullptr) {
    const auto od = candidate->oriented();
    nodes.push_back(LoadNode{
        candidate->box.id,
        candidate->box.mass(),
        candidate->box.rigidity * cfg.crush_coefficient * static_cast<double>(od[0]) * od[1],
        candidate->z,
        &candidate_contact->contacts,
    });
  }
  double floor_load = 0.0;
  const auto incoming = propagate_loads(nodes, &floor_load);
  for (const Placement& p : pallet.placed()) {
    const auto od = p.oriented();
    const double capacity =
        p.box.rigidity * cfg.crush_coefficient * static_cast<double>(od[0]) * od[1];
    const auto it = incoming.find(p.box.id);
    if (it != incoming.end() && it->second > capacity * (1.0 + kLoadTol) + kLoadTol) {
      return p.box.id;
    }
  }
  return std::nullopt;
}

}  // namespace

void OracleConfig::validate() const {
  if (!(min_support_ratio > 0.0) || min_support_ratio > 1.0) {
    throw ConfigError("min_support_ratio must be in (0, 1]");
  }
  if (noise_samples < 1) throw ConfigError("noise_samples must be >= 1");
  if (!(crush_coefficient > 0.0)) throw ConfigError("crush_coefficient must be positive");
  if (noise_sigma_xy < 0.0 || noise_sigma_rot_deg < 0.0) {
    throw ConfigError("noise sigmas must be non-negative");
  }
}

LoadReport compute_loads(const PalletState& pallet) {
  OracleConfig cfg;  // capacity values unused in the report
  std::vector<LoadNode> nodes = pallet_nodes(pallet, cfg);
  LoadReport report;
  const auto incoming = propagate_loads(nodes, &report.floor_load);
  for (const Placement& p : pallet.placed()) {
    const auto it = incoming.find(p.box.id);
    report.box_loads.emplace_back(p.box.id, it != incoming.end() ? it->second : 0.0);
    report.total_mass += p.box.mass();
  }
  return report;
}

StabilityVerdict check_placement(const PalletState& pallet, const Placement& placement,
                                 double dx, double dy, double rot_deg,
                                 const OracleConfig& cfg) {
  const SupportContact sc = support_contact(pallet, placement, dx, dy, rot_deg);

  if (sc.ratio + kRatioTol < cfg.min_support_ratio) {
    return StabilityVerdict::fail(StabilityCause::InsufficientSupport);
  }

  const auto od = placement.oriented();
  const double com_x = placement.x + dx + 0.5 * od[0];
  const double com_y = placement.y + dy + 0.5 * od[1];
  if (!hull_contains(sc.region_hull, com_x, com_y, cfg.com_margin)) {
    return StabilityVerdict::fail(StabilityCause::ComOutsideSupport);
  }

  if (const auto crushed = first_crushed(pallet, cfg, &sc, &placement)) {
    return StabilityVerdict::fail(StabilityCause::CrushCollapse, crushed);
  }
  return StabilityVerdict::ok();
}

FeasibilityMap annotate_feasibility(const PalletState& pallet, const BoxSpec& box,
                                    Orientation o, const OracleConfig& cfg,
                                    std::uint64_t seed, bool use_shortcuts) {
  cfg.validate();
  const GridConfig& grid = pallet.config();
  FeasibilityMap map(grid.length_cells, grid.width_cells, false);
  const auto od = oriented_dims(box, o);
  if (od[0] > grid.length_cells || od[1] > grid.width_cells) return map;

  // When some box already exceeds its capacity, every candidate inherits the
  // violation through condition (c); skip the per-position work.
  if (use_shortcuts && first_crushed(pallet, cfg, nullptr, nullptr).has_value()) {
    return map;
  }

  // Floor fast path precomputation: the worst-case noisy base stays fully on
  // empty floor whenever the bounding box of any clamped draw is in bounds
  // and covers only height-0 columns. Every such draw has full support, so
  // all conditions hold for any config.
  const double ct = std::cos(kMaxRotDeg * 3.14159265358979323846 / 180.0);
  const double st = std::sin(kMaxRotDeg * 3.14159265358979323846 / 180.0);
  const double worst_hx = 0.5 * od[0] * ct + 0.5 * od[1] * st + kMaxOffsetCells;
  const double worst_hy = 0.5 * od[1] * ct + 0.5 * od[0] * st + kMaxOffsetCells;

  const double sigma_cells = cfg.noise_sigma_xy / grid.cell_size;

  for (int x = 0; x + od[0] <= grid.length_cells; ++x) {
    for (int y = 0; y + od[1] <= grid.width_cells; ++y) {
      const int z = pallet.rest_height(box, o, x, y);
      if (z + od[2] > grid.height_cells) continue;
      const Placement candidate{box, o, x, y, z};

      if (use_shortcuts && z == 0) {
        const double cx0 = x + 0.5 * od[0];
        const double cy0 = y + 0.5 * od[1];
        const int bx_lo = static_cast<int>(std::floor(cx0 - worst_hx));
        const int bx_hi = static_cast<int>(std::ceil(cx0 + worst_hx));
        const int by_lo = static_cast<int>(std::floor(cy0 - worst_hy));
        const int by_hi = static_cast<int>(std::ceil(cy0 + worst_hy));
        if (bx_lo >= 0 && by_lo >= 0 && bx_hi <= grid.length_cells &&
            by_hi <= grid.width_cells) {
          bool clear = true;
          for (int cx = bx_lo; cx < bx_hi && clear; ++cx) {
            for (int cy = by_lo; cy < by_hi; ++cy) {
              if (pallet.height_at(cx, cy) != 0) {
                clear = false;
                break;
              }
            }
          }
          if (clear) {
            map.set(x, y, true);
            continue;
          }
        }
      }

      if (!check_placement(pallet, candidate, 0.0, 0.0, 0.0, cfg).stable) {
        continue;
      }

      Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(x),
                       static_cast<std::uint64_t>(y)));
      bool feasible = true;
      for (int k = 0; k < cfg.noise_samples; ++k) {
        const double ddx = std::clamp(rng.normal(0.0, sigma_cells),
                                      -kMaxOffsetCells, kMaxOffsetCells);
        const double ddy = std::clamp(rng.normal(0.0, sigma_cells),
                                      -kMaxOffsetCells, kMaxOffsetCells);
        const double rot = std::clamp(rng.normal(0.0, cfg.noise_sigma_rot_deg),
                                      -kMaxRotDeg, kMaxRotDeg);
        if (!check_placement(pallet, candidate, ddx, ddy, rot, cfg).stable) {
          feasible = false;
          break;
        }
      }
      map.set(x, y, feasible);
    }
  }
  return map;
}

StabilityVerdict check_pallet_stable(const PalletState& pallet, const OracleConfig& cfg) {
  PalletState replay(pallet.config());
  for (const Placement& p : pallet.placed()) {
    const StabilityVerdict v = check_placement(replay, p, 0.0, 0.0, 0.0, cfg);
    if (!v.stable) return v;
    replay.place(p);
  }
  return StabilityVerdict::ok();
}

}  // namespace palletize
