#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "palletize/feasibility_map.hpp"
#include "palletize/geometry.hpp"

namespace palletize {

struct OracleConfig {
  double min_support_ratio = 0.25;
  // Load capacity per unit rigidity per cell^2 of top area. Calibrated so a
  // soft 6x6 top carries up to three soft 6x6x6 boxes but no hard one.
  double crush_coefficient = 20000.0;
  double noise_sigma_xy = 0.05;      // inches
  double noise_sigma_rot_deg = 5.0;  // degrees
  int noise_samples = 5;             // draws per annotated position
  double com_margin = 0.0;           // cells

  void validate() const;
  bool operator==(const OracleConfig&) const = default;
};

enum class StabilityCause {
  Ok,
  InsufficientSupport,
  ComOutsideSupport,
  CrushCollapse,
};

struct StabilityVerdict {
  bool stable = true;
  StabilityCause cause = StabilityCause::Ok;
  std::optional<int> crushed_box_id;

  static StabilityVerdict ok() { return {}; }
  static StabilityVerdict fail(StabilityCause c, std::optional<int> box = {}) {
    return {false, c, box};
  }
  bool operator==(const StabilityVerdict&) const = default;
};

// Per-box incoming loads after propagating every box's weight down through
// its contact map (proportional to contact area; the floor absorbs all).
struct LoadReport {
  std::vector<std::pair<int, double>> box_loads;  // box id -> incoming load
  double floor_load = 0.0;
  double total_mass = 0.0;
};

LoadReport compute_loads(const PalletState& pallet);

// Quasi-static verdict for a candidate placement at its rest height with an
// optional sub-cell offset (cells) and z-rotation (degrees). Stable iff the
// supported fraction reaches min_support_ratio, the center of mass projects
// into the supported region's hull, and no box's load exceeds
// rigidity * crush_coefficient * top_area after the candidate is added.
StabilityVerdict check_placement(const PalletState& pallet, const Placement& placement,
                                 double dx, double dy, double rot_deg,
                                 const OracleConfig& cfg);

// Full feasibility annotation for one (box, orientation) over every (x, y).
// A position is labeled feasible iff the zero-noise placement is stable and
// stays stable for noise_samples independent noise draws; positions whose
// footprint leaves the grid or whose stack would exceed max height are
// infeasible. Deterministic per seed: each position draws from a generator
// seeded by (seed, x, y). use_shortcuts toggles the sampling-free fast paths,
// which label identically to the full path.
FeasibilityMap annotate_feasibility(const PalletState& pallet, const BoxSpec& box,
                                    Orientation o, const OracleConfig& cfg,
                                    std::uint64_t seed, bool use_shortcuts = true);

// Re-judges the whole stack: replays placements in order onto an empty grid
// and checks each at zero noise.
StabilityVerdict check_pallet_stable(const PalletState& pallet, const OracleConfig& cfg);

}  // namespace palletize
