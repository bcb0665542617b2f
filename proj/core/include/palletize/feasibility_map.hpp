#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "palletize/errors.hpp"
#include "palletize/rng.hpp"

namespace palletize {

// Per-(x, y) binary action-space mask for one (box, orientation) on one
// pallet. Row-major over x (length) then y (width).
class FeasibilityMap {
 public:
  FeasibilityMap() = default;
  FeasibilityMap(int length_cells, int width_cells, bool value = false);

  int length() const { return length_; }
  int width() const { return width_; }
  bool at(int x, int y) const { return cells_[idx(x, y)] != 0; }
  void set(int x, int y, bool v) { cells_[idx(x, y)] = v ? 1 : 0; }

  std::size_t feasible_count() const;
  bool empty_mask() const { return feasible_count() == 0; }
  std::vector<std::pair<int, int>> feasible_cells() const;

  // Nearest feasible cell to (x, y) by Euclidean distance; ties broken
  // uniformly with the supplied generator. Requires a non-empty mask.
  std::pair<int, int> nearest_feasible(int x, int y, Rng& rng) const;

  bool operator==(const FeasibilityMap&) const = default;

  // Packed little-endian bitmap with a (length, width) header.
  std::vector<std::uint8_t> to_bitmap() const;
  static FeasibilityMap from_bitmap(const std::vector<std::uint8_t>& bytes);

  void save_bitmap(const std::string& path) const;
  static FeasibilityMap load_bitmap(const std::string& path);
  // Plain PGM (P2) for eyeballing maps; feasible cells are white.
  void save_pgm(const std::string& path) const;

 private:
  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(x) * width_ + y;
  }

  int length_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> cells_;
};

}  // namespace palletize
