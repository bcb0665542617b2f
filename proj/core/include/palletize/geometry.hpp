#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "palletize/errors.hpp"

namespace palletize {

inline constexpr int kEmptyCell = -1;
// The floor participates in contact accounting as a supporter with
// unlimited capacity.
inline constexpr int kFloorId = -2;

struct GridConfig {
  int length_cells = 25;
  int width_cells = 25;
  int height_cells = 20;
  double cell_size = 1.0;  // inches per cell

  void validate() const;
  std::int64_t max_volume_cells() const {
    return static_cast<std::int64_t>(length_cells) * width_cells * height_cells;
  }
  bool operator==(const GridConfig&) const = default;
};

struct BoxSpec {
  int id = 0;
  std::array<int, 3> dims{1, 1, 1};  // length, width, height in cells
  double density = 1.0;              // mass per cell volume
  double rigidity = 1.0;             // load capacity coefficient

  std::int64_t volume_cells() const {
    return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  }
  double mass() const { return density * static_cast<double>(volume_cells()); }
  void validate() const;
  bool operator==(const BoxSpec&) const = default;
};

// One of the six axis-aligned poses of a box.
struct Orientation {
  int code = 0;
  static constexpr int kCount = 6;
  bool operator==(const Orientation&) const = default;
};

std::array<int, 3> oriented_dims(const BoxSpec& box, Orientation o);
Orientation inverse_orientation(Orientation o);

struct Placement {
  BoxSpec box;
  Orientation orientation;
  int x = 0;
  int y = 0;
  int z = 0;  // rest height, in cells

  std::array<int, 3> oriented() const { return oriented_dims(box, orientation); }
  bool operator==(const Placement&) const = default;
};

struct SupportContact {
  double ratio = 0.0;                            // supported base area / footprint area
  int corners = 0;                               // supported base corners, 0..4
  std::vector<std::pair<int, double>> contacts;  // supporter id -> contact area
  // Convex hull of the supported contact region, in cell coordinates.
  std::vector<std::array<double, 2>> region_hull;

  double total_area() const;
  double area_for(int supporter_id) const;
};

// Voxel state of one pallet. Value type: copy freely, no internal sharing.
class PalletState {
 public:
  explicit PalletState(GridConfig config);

  const GridConfig& config() const { return config_; }
  int cell(int x, int y, int z) const { return cells_[index(x, y, z)]; }
  double density_at(int x, int y, int z) const { return density_[index(x, y, z)]; }
  double rigidity_at(int x, int y, int z) const { return rigidity_[index(x, y, z)]; }
  int height_at(int x, int y) const {
    return heightmap_[static_cast<std::size_t>(x) * config_.width_cells + y];
  }
  const std::vector<int>& heightmap() const { return heightmap_; }
  const std::vector<Placement>& placed() const { return placed_; }
  // Contact map captured when the box was placed; stable under later placements.
  const std::vector<std::pair<int, double>>& recorded_contacts(std::size_t i) const {
    return recorded_contacts_[i];
  }

  int rest_height(const BoxSpec& box, Orientation o, int x, int y) const;
  void place(const Placement& placement);

  std::int64_t occupied_cell_count() const;
  std::int64_t placed_volume_cells() const;
  bool in_bounds(const std::array<int, 3>& od, int x, int y) const {
    return x >= 0 && y >= 0 && x + od[0] <= config_.length_cells &&
           y + od[1] <= config_.width_cells;
  }

 private:
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * config_.width_cells + y) *
               config_.height_cells +
           z;
  }

  GridConfig config_;
  std::vector<int> cells_;
  std::vector<double> density_;
  std::vector<double> rigidity_;
  std::vector<int> heightmap_;
  std::vector<Placement> placed_;
  std::vector<std::vector<std::pair<int, double>>> recorded_contacts_;
};

// Contact geometry of a placement's base at level placement.z. The optional
// continuous offset (|dx|,|dy| <= 0.5 cells) and z-rotation (degrees, about
// the base center) model sub-cell placement noise; overlap areas against
// supporter cells are computed by polygon clipping. Works both for candidate
// placements (box absent from the pallet) and recorded ones (box present).
SupportContact support_contact(const PalletState& pallet, const Placement& placement,
                               double dx = 0.0, double dy = 0.0,
                               double rot_deg = 0.0);

// Point-in-hull test used for center-of-mass containment. The hull may be
// degenerate (segment or point); margin expands it outward.
bool hull_contains(const std::vector<std::array<double, 2>>& hull,
                   double px, double py, double margin);

}  // namespace palletize
