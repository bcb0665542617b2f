#include "palletize/environment.hpp"

#include <algorithm>
#include <string>

namespace palletize {

int BufferState::boxes_left() const {
  int n = static_cast<int>(remaining.size());
  for (const auto& s : slots) {
    if (s.has_value()) ++n;
  }
  return n;
}

std::vector<double> BufferState::encode() const {
  std::vector<double> out(slots.size() * 5, 0.0);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].has_value()) continue;
    const BoxSpec& b = *slots[i];
    out[i * 5 + 0] = b.dims[0];
    out[i * 5 + 1] = b.dims[1];
    out[i * 5 + 2] = b.dims[2];
    out[i * 5 + 3] = b.density;
    out[i * 5 + 4] = b.rigidity;
  }
  return out;
}

void BufferState::consume_slot(int slot) {
  if (remaining.empty()) {
    slots[slot].reset();
  } else {
    slots[slot] = remaining.front();
    remaining.pop_front();
  }
}

std::int64_t Action::flat(int buffer_size, const GridConfig& grid) const {
  (void)buffer_size;
  return ((static_cast<std::int64_t>(slot) * Orientation::kCount + orientation.code) *
              grid.length_cells +
          x) *
             grid.width_cells +
         y;
}

Action Action::from_flat(std::int64_t index, int buffer_size, const GridConfig& grid) {
  if (index < 0 || index >= space_size(buffer_size, grid)) {
    throw ConfigError("flat action index out of range");
  }
  Action a;
  a.y = static_cast<int>(index % grid.width_cells);
  index /= grid.width_cells;
  a.x = static_cast<int>(index % grid.length_cells);
  index /= grid.length_cells;
  a.orientation.code = static_cast<int>(index % Orientation::kCount);
  a.slot = static_cast<int>(index / Orientation::kCount);
  return a;
}

std::int64_t Action::space_size(int buffer_size, const GridConfig& grid) {
  return static_cast<std::int64_t>(buffer_size) * Orientation::kCount *
         grid.length_cells * grid.width_cells;
}

const char* to_string(EndReason r) {
  switch (r) {
    case EndReason::Infeasible:
      return "Infeasible";
    case EndReason::Unstable:
      return "Unstable";
    case EndReason::Success:
      return "Success";
  }
  return "?";
}

EndReason end_reason_from_string(const std::string& s) {
  if (s == "Infeasible") return EndReason::Infeasible;
  if (s == "Unstable") return EndReason::Unstable;
  if (s == "Success") return EndReason::Success;
  throw CorruptLogError("unknown end reason: " + s);
}

void EpisodeConfig::validate() const {
  grid.validate();
  if (buffer_size < 1) throw ConfigError("buffer_size must be >= 1");
  if (inventory.empty()) throw ConfigError("inventory must not be empty");
  for (const auto& e : inventory) {
    e.prototype.validate();
    if (e.count < 1) throw ConfigError("inventory counts must be >= 1");
  }
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
}

int EpisodeConfig::total_boxes() const {
  int n = 0;
  for (const auto& e : inventory) n += e.count;
  return n;
}

int EpisodeConfig::effective_max_steps() const {
  return max_steps > 0 ? max_steps : 10 * total_boxes() + 20;
}

FeasibilityMap legality_mask(const PalletState& pallet, const BoxSpec& box,
                             Orientation o) {
  const GridConfig& grid = pallet.config();
  FeasibilityMap map(grid.length_cells, grid.width_cells, false);
  const auto od = oriented_dims(box, o);
  for (int x = 0; x + od[0] <= grid.length_cells; ++x) {
    for (int y = 0; y + od[1] <= grid.width_cells; ++y) {
      const int z = pallet.rest_height(box, o, x, y);
      map.set(x, y, z + od[2] <= grid.height_cells);
    }
  }
  return map;
}

FeasibilityMap PassThroughMaskProvider::mask(const PalletState& pallet,
                                             const BoxSpec& box, Orientation o) {
  return legality_mask(pallet, box, o);
}

FeasibilityMap OracleMaskProvider::mask(const PalletState& pallet, const BoxSpec& box,
                                        Orientation o) {
  return annotate_feasibility(pallet, box, o, cfg_, seed_);
}

double space_utilization(const PalletState& pallet) {
  return static_cast<double>(pallet.placed_volume_cells()) /
         static_cast<double>(pallet.config().max_volume_cells());
}

double reward_for(const StabilityVerdict& verdict, const std::optional<BoxSpec>& box,
                  const GridConfig& grid) {
  if (!box.has_value()) return -1.0;
  if (!verdict.stable) return 0.0;
  return static_cast<double>(box->volume_cells()) /
         static_cast<double>(grid.max_volume_cells());
}

Environment::Environment(EpisodeConfig cfg)
    : cfg_(std::move(cfg)), pallet_(cfg_.grid), tie_rng_(0) {
  cfg_.validate();
  reset();
}

void Environment::reset() {
  pallet_ = PalletState(cfg_.grid);
  done_ = false;
  end_reason_.reset();
  steps_ = 0;
  length_ = 0;
  cumulative_reward_ = 0.0;
  tie_rng_ = Rng(Rng::mix(cfg_.shuffle_seed, 2));

  std::vector<BoxSpec> expanded;
  expanded.reserve(static_cast<std::size_t>(cfg_.total_boxes()));
  int next_id = 0;
  for (const auto& entry : cfg_.inventory) {
    for (int i = 0; i < entry.count; ++i) {
      BoxSpec b = entry.prototype;
      b.id = next_id++;
      expanded.push_back(b);
    }
  }
  Rng shuffle_rng(Rng::mix(cfg_.shuffle_seed, 1));
  shuffle_rng.shuffle(expanded);

  buffer_.slots.assign(static_cast<std::size_t>(cfg_.buffer_size), std::nullopt);
  buffer_.remaining.clear();
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    if (i < buffer_.slots.size()) {
      buffer_.slots[i] = expanded[i];
    } else {
      buffer_.remaining.push_back(expanded[i]);
    }
  }
}

StepOutcome Environment::step(const Action& action, MaskProvider& mask_provider,
                              const OracleConfig& oracle_cfg) {
  if (done_) throw EpisodeDoneError("step called after episode end");
  if (action.slot < 0 || action.slot >= cfg_.buffer_size ||
      action.orientation.code < 0 || action.orientation.code >= Orientation::kCount ||
      action.x < 0 || action.x >= cfg_.grid.length_cells || action.y < 0 ||
      action.y >= cfg_.grid.width_cells) {
    throw ConfigError("action outside the action space");
  }
  ++steps_;

  StepOutcome out;
  out.boxes_placed = static_cast<int>(pallet_.placed().size());
  out.space_utilization = space_utilization(pallet_);

  const auto& slot = buffer_.slots[static_cast<std::size_t>(action.slot)];
  if (!slot.has_value()) {
    out.penalty = true;
    out.reward = reward_for(StabilityVerdict::ok(), std::nullopt, cfg_.grid);
    cumulative_reward_ += out.reward;
    return out;
  }
  const BoxSpec box = *slot;
  ++length_;

  FeasibilityMap map = mask_provider.mask(pallet_, box, action.orientation);
  // Keep the snapped placement well defined regardless of provider quality.
  const FeasibilityMap legal = legality_mask(pallet_, box, action.orientation);
  FeasibilityMap combined(map.length(), map.width(), false);
  for (int x = 0; x < map.length(); ++x) {
    for (int y = 0; y < map.width(); ++y) {
      combined.set(x, y, map.at(x, y) && legal.at(x, y));
    }
  }

  if (combined.empty_mask()) {
    done_ = true;
    end_reason_ = EndReason::Infeasible;
    out.done = true;
    out.end_reason = end_reason_;
    out.reward = 0.0;
    return out;
  }

  const auto [sx, sy] = combined.nearest_feasible(action.x, action.y, tie_rng_);
  const int z = pallet_.rest_height(box, action.orientation, sx, sy);
  const Placement placement{box, action.orientation, sx, sy, z};
  out.placement = placement;
  out.verdict = check_placement(pallet_, placement, 0.0, 0.0, 0.0, oracle_cfg);

  if (!out.verdict.stable) {
    done_ = true;
    end_reason_ = EndReason::Unstable;
    out.done = true;
    out.end_reason = end_reason_;
    out.reward = reward_for(out.verdict, box, cfg_.grid);
    cumulative_reward_ += out.reward;
    return out;
  }

  pallet_.place(placement);
  buffer_.consume_slot(action.slot);
  out.placed = true;
  out.reward = reward_for(out.verdict, box, cfg_.grid);
  cumulative_reward_ += out.reward;
  out.boxes_placed = static_cast<int>(pallet_.placed().size());
  out.space_utilization = space_utilization(pallet_);

  if (buffer_.empty()) {
    done_ = true;
    end_reason_ = EndReason::Success;
    out.done = true;
    out.end_reason = end_reason_;
  }
  return out;
}

}  // namespace palletize
