#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "palletize/environment.hpp"
#include "palletize/feasibility_map.hpp"
#include "palletize/geometry.hpp"
#include "palletize/nn.hpp"
#include "palletize/oracle.hpp"

namespace palletize {

struct MaskLearningConfig {
  std::size_t dataset_capacity = 16000;
  double record_prob_regular = 0.1;
  double record_prob_unstable = 1.0;
  int epochs_per_update = 2;
  double threshold = 0.5;
  double learning_rate = 1e-3;
  std::vector<int> hidden_sizes = {64, 64};
  int batch_cells = 4096;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 17;
  int annotation_workers = 2;
  double pos_weight_cap = 10.0;

  void validate() const;
};

// Normalization constants for feature construction, taken from the episode
// inventory so channels land in comparable ranges.
struct FeatureScales {
  double density = 5000.0;
  double rigidity = 3.0;

  static FeatureScales from_inventory(const std::vector<InventoryEntry>& inventory);
};

// One (pallet, box, orientation) query; the pallet is stored compactly as its
// placement list and rebuilt on demand.
struct MaskSample {
  GridConfig grid;
  std::vector<Placement> placements;
  BoxSpec box;
  Orientation orientation;
  std::uint64_t annotation_seed = 0;
  std::optional<FeasibilityMap> label;

  static MaskSample from(const PalletState& pallet, const BoxSpec& box,
                         Orientation o, std::uint64_t annotation_seed);
  PalletState rebuild_pallet() const;
};

// Bounded FIFO store of annotated samples.
class FeasibleDataset {
 public:
  explicit FeasibleDataset(std::size_t capacity);

  void push(MaskSample sample);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const MaskSample& at(std::size_t i) const { return entries_[i]; }

 private:
  std::size_t capacity_;
  std::deque<MaskSample> entries_;
};

// Whether a rollout step's sample enters the annotation queue: always for
// steps that ended an episode as unstable, with record_prob_regular otherwise.
bool should_record(bool step_was_unstable, Rng& rng, const MaskLearningConfig& cfg);

// Fills labels for the pending samples with the oracle, fanned out over
// worker threads. Labels depend only on each sample's stored annotation seed,
// so results are identical for any worker count.
void annotate_batch(std::vector<MaskSample>& pending, const OracleConfig& oracle_cfg,
                    int workers);

// Per-cell pooled features consumed by the mask model: window statistics of
// the heightmap and top-layer channels under the oriented footprint, edge
// slacks, and the box descriptor broadcast to every cell.
class MaskFeaturizer {
 public:
  MaskFeaturizer() = default;
  MaskFeaturizer(GridConfig grid, FeatureScales scales);

  int feature_count() const { return kFeatureCount; }
  const GridConfig& grid() const { return grid_; }
  const FeatureScales& scales() const { return scales_; }

  // Rows are all l_p*w_p cells in x-major order; out-of-bounds rows are
  // zeroed and flagged false in *in_bounds.
  void features(const PalletState& pallet, const BoxSpec& box, Orientation o,
                nn::Matrix* rows, std::vector<std::uint8_t>* in_bounds) const;

  static constexpr int kFeatureCount = 26;

 private:
  GridConfig grid_;
  FeatureScales scales_;
};

// Trainable map from (pallet, box, orientation) to a per-cell feasibility
// probability; thresholded to produce the action-space mask. Out-of-bounds
// footprints are forced infeasible regardless of the net output.
class MaskModel {
 public:
  MaskModel() = default;
  MaskModel(GridConfig grid, const MaskLearningConfig& cfg, FeatureScales scales,
            std::uint64_t seed);

  FeasibilityMap predict(const PalletState& pallet, const BoxSpec& box,
                         Orientation o) const;
  // Probabilities in [0,1]; out-of-bounds cells are 0.
  std::vector<double> predict_probabilities(const PalletState& pallet,
                                            const BoxSpec& box, Orientation o) const;

  double threshold() const { return threshold_; }
  const MaskFeaturizer& featurizer() const { return featurizer_; }
  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

 private:
  MaskFeaturizer featurizer_;
  nn::Mlp net_;
  double threshold_ = 0.5;
};

class LearnedMaskProvider : public MaskProvider {
 public:
  explicit LearnedMaskProvider(const MaskModel& model) : model_(&model) {}
  FeasibilityMap mask(const PalletState& pallet, const BoxSpec& box,
                      Orientation o) override {
    return model_->predict(pallet, box, o);
  }

 private:
  const MaskModel* model_;
};

// Intersection-over-union of feasible cells; 1.0 when both maps are empty.
double iou(const FeasibilityMap& prediction, const FeasibilityMap& label);

// Trains the model on an 80/20 split of the dataset (weighted per-cell
// binary cross entropy) and returns the validation IoU of the thresholded
// predictions. Throws EmptyDatasetError on an empty dataset.
double train_epochs(MaskModel& model, nn::Adam& optimizer, const FeasibleDataset& data,
                    int epochs, std::uint64_t split_seed, const MaskLearningConfig& cfg);

// Orchestrates online mask learning: records rollout samples, annotates them
// at update time, maintains the FIFO dataset, and trains the model.
class OnlineMaskLearner {
 public:
  OnlineMaskLearner(GridConfig grid, MaskLearningConfig cfg, OracleConfig oracle_cfg,
                    FeatureScales scales, std::uint64_t seed);

  // Returns true when the sample was queued for annotation.
  bool maybe_record(const PalletState& pallet, const BoxSpec& box, Orientation o,
                    bool step_was_unstable, Rng& rng);
  // Annotate pending samples, append to the dataset, train, return val IoU.
  // Returns NaN when the dataset is still empty.
  double update();

  const MaskModel& model() const { return model_; }
  MaskModel& model() { return model_; }
  nn::Adam& optimizer() { return optimizer_; }
  const FeasibleDataset& dataset() const { return dataset_; }
  std::size_t pending_count() const { return pending_.size(); }
  const MaskLearningConfig& config() const { return cfg_; }

 private:
  MaskLearningConfig cfg_;
  OracleConfig oracle_cfg_;
  MaskModel model_;
  nn::Adam optimizer_;
  FeasibleDataset dataset_;
  std::vector<MaskSample> pending_;
  std::uint64_t seed_;
  std::uint64_t next_sample_seq_ = 0;
};

}  // namespace palletize
