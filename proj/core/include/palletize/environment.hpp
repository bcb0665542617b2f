#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "palletize/feasibility_map.hpp"
#include "palletize/geometry.hpp"
#include "palletize/oracle.hpp"
#include "palletize/rng.hpp"

namespace palletize {

// Staging area of up to N pending boxes plus the undrawn remainder.
struct BufferState {
  std::vector<std::optional<BoxSpec>> slots;
  std::deque<BoxSpec> remaining;

  int boxes_left() const;
  bool empty() const { return boxes_left() == 0; }
  // Flat policy encoding: (l, w, h, density, rigidity) per slot, zeros for
  // empty slots.
  std::vector<double> encode() const;
  void consume_slot(int slot);
};

struct Action {
  int slot = 0;
  Orientation orientation;
  int x = 0;
  int y = 0;

  // Flat index layout: ((slot * 6 + orientation) * l_p + x) * w_p + y.
  std::int64_t flat(int buffer_size, const GridConfig& grid) const;
  static Action from_flat(std::int64_t index, int buffer_size, const GridConfig& grid);
  static std::int64_t space_size(int buffer_size, const GridConfig& grid);
  bool operator==(const Action&) const = default;
};

enum class EndReason { Infeasible, Unstable, Success };

const char* to_string(EndReason r);
EndReason end_reason_from_string(const std::string& s);

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
  std::optional<EndReason> end_reason;
  // Metrics snapshot.
  double space_utilization = 0.0;
  int boxes_placed = 0;
  // Step detail for logging and replay.
  bool penalty = false;  // empty slot selected
  bool placed = false;
  std::optional<Placement> placement;  // committed pose after snapping
  StabilityVerdict verdict;
};

struct InventoryEntry {
  BoxSpec prototype;
  int count = 1;
};

struct EpisodeConfig {
  GridConfig grid;
  std::vector<InventoryEntry> inventory;
  int buffer_size = 5;
  std::uint64_t shuffle_seed = 0;
  // Safety cap applied by rollout/eval collectors (an episode stuck on empty
  // slot picks would never terminate otherwise). 0 derives a generous default.
  int max_steps = 0;

  void validate() const;
  int total_boxes() const;
  int effective_max_steps() const;
};

// Source of action-space masks for the environment step.
class MaskProvider {
 public:
  virtual ~MaskProvider() = default;
  virtual FeasibilityMap mask(const PalletState& pallet, const BoxSpec& box,
                              Orientation o) = 0;
};

// Marks every geometrically legal cell feasible (footprint in bounds, stack
// under the height cap). This is the "no mask" provider.
class PassThroughMaskProvider : public MaskProvider {
 public:
  FeasibilityMap mask(const PalletState& pallet, const BoxSpec& box,
                      Orientation o) override;
};

// Uses the stability oracle itself as the mask.
class OracleMaskProvider : public MaskProvider {
 public:
  OracleMaskProvider(OracleConfig cfg, std::uint64_t seed)
      : cfg_(cfg), seed_(seed) {}
  FeasibilityMap mask(const PalletState& pallet, const BoxSpec& box,
                      Orientation o) override;

 private:
  OracleConfig cfg_;
  std::uint64_t seed_;
};

// Geometric legality mask used to keep snapped placements well defined.
FeasibilityMap legality_mask(const PalletState& pallet, const BoxSpec& box,
                             Orientation o);

double space_utilization(const PalletState& pallet);

// Reward for one step: -1 for an empty-slot pick (no box), otherwise the
// stability indicator times box volume over pallet capacity.
double reward_for(const StabilityVerdict& verdict, const std::optional<BoxSpec>& box,
                  const GridConfig& grid);

// One episode of the palletization MDP. Value machine: copyable, no shared
// state; all randomness derives from the episode config seed.
class Environment {
 public:
  explicit Environment(EpisodeConfig cfg);

  void reset();
  StepOutcome step(const Action& action, MaskProvider& mask_provider,
                   const OracleConfig& oracle_cfg);

  const EpisodeConfig& config() const { return cfg_; }
  const PalletState& pallet() const { return pallet_; }
  const BufferState& buffer() const { return buffer_; }
  bool done() const { return done_; }
  std::optional<EndReason> end_reason() const { return end_reason_; }
  int steps() const { return steps_; }
  // Steps that selected a box (placement attempts); penalty steps excluded.
  int length() const { return length_; }
  double cumulative_reward() const { return cumulative_reward_; }

 private:
  EpisodeConfig cfg_;
  PalletState pallet_;
  BufferState buffer_;
  Rng tie_rng_;
  bool done_ = false;
  std::optional<EndReason> end_reason_;
  int steps_ = 0;
  int length_ = 0;
  double cumulative_reward_ = 0.0;
};

}  // namespace palletize
