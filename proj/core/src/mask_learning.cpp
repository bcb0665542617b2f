#include "palletize/mask_learning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace palletize {

void MaskLearningConfig::validate() const {
  if (dataset_capacity < 1) throw ConfigError("dataset_capacity must be >= 1");
  if (record_prob_regular < 0.0 || record_prob_regular > 1.0 ||
      record_prob_unstable < 0.0 || record_prob_unstable > 1.0) {
    throw ConfigError("record probabilities must be in [0, 1]");
  }
  if (epochs_per_update < 1) throw ConfigError("epochs_per_update must be >= 1");
  if (!(threshold > 0.0) || !(threshold < 1.0)) {
    throw ConfigError("threshold must be in (0, 1)");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_cells < 1) throw ConfigError("batch_cells must be >= 1");
  if (!(val_fraction > 0.0) || !(val_fraction < 1.0)) {
    throw ConfigError("val_fraction must be in (0, 1)");
  }
  if (annotation_workers < 1) throw ConfigError("annotation_workers must be >= 1");
  if (hidden_sizes.empty()) throw ConfigError("hidden_sizes must not be empty");
}

FeatureScales FeatureScales::from_inventory(
    const std::vector<InventoryEntry>& inventory) {
  FeatureScales s{1.0, 1.0};
  for (const auto& e : inventory) {
    s.density = std::max(s.density, e.prototype.density);
    s.rigidity = std::max(s.rigidity, e.prototype.rigidity);
  }
  return s;
}

MaskSample MaskSample::from(const PalletState& pallet, const BoxSpec& box,
                            Orientation o, std::uint64_t annotation_seed) {
  MaskSample s;
  s.grid = pallet.config();
  s.placements = pallet.placed();
  s.box = box;
  s.orientation = o;
  s.annotation_seed = annotation_seed;
  return s;
}

PalletState MaskSample::rebuild_pallet() const {
  PalletState pallet(grid);
  for (const auto& p : placements) pallet.place(p);
  return pallet;
}

FeasibleDataset::FeasibleDataset(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ConfigError("dataset capacity must be >= 1");
}

void FeasibleDataset::push(MaskSample sample) {
  entries_.push_back(std::move(sample));
  while (entries_.size() > capacity_) entries_.pop_front();
}

bool should_record(bool step_was_unstable, Rng& rng, const MaskLearningConfig& cfg) {
  const double p =
      step_was_unstable ? cfg.record_prob_unstable : cfg.record_prob_regular;
  return rng.uniform() < p;
}

void annotate_batch(std::vector<MaskSample>& pending, const OracleConfig& oracle_cfg,
                    int workers) {
  if (pending.empty()) return;
  const std::size_t n = pending.size();
  const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(n)));

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        MaskSample& s = pending[i];
        const PalletState pallet = s.rebuild_pallet();
        s.label = annotate_feasibility(pallet, s.box, s.orientation, oracle_cfg,
                                       s.annotation_seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  if (nthreads == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
}

MaskFeaturizer::MaskFeaturizer(GridConfig grid, FeatureScales scales)
    : grid_(grid), scales_(scales) {
  grid_.validate();
}

void MaskFeaturizer::features(const PalletState& pallet, const BoxSpec& box,
                              Orientation o, nn::Matrix* rows,
                              std::vector<std::uint8_t>* in_bounds) const {
  const int lp = grid_.length_cells;
  const int wp = grid_.width_cells;
  const int hp = grid_.height_cells;
  const auto od = oriented_dims(box, o);
  const int ox = od[0], oy = od[1], oz = od[2];

  rows->setZero(static_cast<Eigen::Index>(lp) * wp, kFeatureCount);
  in_bounds->assign(static_cast<std::size_t>(lp) * wp, 0);

  // Column mass proxy shared by all cells.
  std::vector<double> column_mass(static_cast<std::size_t>(lp) * wp, 0.0);
  for (int cx = 0; cx < lp; ++cx) {
    for (int cy = 0; cy < wp; ++cy) {
      double m = 0.0;
      const int top = pallet.height_at(cx, cy);
      for (int cz = 0; cz < top; ++cz) m += pallet.density_at(cx, cy, cz);
      column_mass[static_cast<std::size_t>(cx) * wp + cy] = m;
    }
  }

  const double density_scale = scales_.density;
  const double rigidity_scale = scales_.rigidity;
  const double mass_norm = density_scale * static_cast<double>(grid_.max_volume_cells());

  for (int x = 0; x < lp; ++x) {
    for (int y = 0; y < wp; ++y) {
      const std::size_t row = static_cast<std::size_t>(x) * wp + y;
      if (x + ox > lp || y + oy > wp) continue;
      (*in_bounds)[row] = 1;

      int max_h = 0, min_h = hp;
      double sum_h = 0.0;
      for (int cx = x; cx < x + ox; ++cx) {
        for (int cy = y; cy < y + oy; ++cy) {
          const int h = pallet.height_at(cx, cy);
          max_h = std::max(max_h, h);
          min_h = std::min(min_h, h);
          sum_h += h;
        }
      }
      const double area = static_cast<double>(ox) * oy;

      int at_max = 0, within_1 = 0;
      std::array<int, 4> quad_at_max{0, 0, 0, 0};
      std::array<int, 4> quad_cells{0, 0, 0, 0};
      double sum_rig = 0.0, min_rig = rigidity_scale;
      double sum_den = 0.0, max_den = 0.0;
      double mass_under = 0.0;
      const int mid_x = x + (ox + 1) / 2;
      const int mid_y = y + (oy + 1) / 2;
      for (int cx = x; cx < x + ox; ++cx) {
        for (int cy = y; cy < y + oy; ++cy) {
          const int h = pallet.height_at(cx, cy);
          const int quad = (cx >= mid_x ? 2 : 0) + (cy >= mid_y ? 1 : 0);
          ++quad_cells[quad];
          if (h >= max_h - 1) ++within_1;
          mass_under += column_mass[static_cast<std::size_t>(cx) * wp + cy];
          if (h == max_h) {
            ++at_max;
            ++quad_at_max[quad];
            if (max_h > 0) {
              const double r = pallet.rigidity_at(cx, cy, max_h - 1);
              const double d = pallet.density_at(cx, cy, max_h - 1);
              sum_rig += r;
              min_rig = std::min(min_rig, r);
              sum_den += d;
              max_den = std::max(max_den, d);
            }
          }
        }
      }
      if (max_h == 0) min_rig = 0.0;

      int dilated_max = max_h;
      for (int cx = std::max(0, x - 1); cx < std::min(lp, x + ox + 1); ++cx) {
        for (int cy = std::max(0, y - 1); cy < std::min(wp, y + oy + 1); ++cy) {
          dilated_max = std::max(dilated_max, pallet.height_at(cx, cy));
        }
      }

      auto r = rows->row(static_cast<Eigen::Index>(row));
      r(0) = static_cast<double>(max_h) / hp;
      r(1) = sum_h / area / hp;
      r(2) = static_cast<double>(min_h) / hp;
      r(3) = at_max / area;
      r(4) = within_1 / area;
      for (int q = 0; q < 4; ++q) {
        r(5 + q) = quad_cells[q] > 0
                       ? static_cast<double>(quad_at_max[q]) / quad_cells[q]
                       : 0.0;
      }
      r(9) = static_cast<double>(max_h + oz) / hp;
      r(10) = static_cast<double>(dilated_max) / hp;
      r(11) = at_max > 0 ? sum_rig / at_max / rigidity_scale : 0.0;
      r(12) = min_rig / rigidity_scale;
      r(13) = at_max > 0 ? sum_den / at_max / density_scale : 0.0;
      r(14) = max_den / density_scale;
      r(15) = mass_under / area / (density_scale * hp);
      r(16) = static_cast<double>(x) / lp;
      r(17) = static_cast<double>(y) / wp;
      r(18) = static_cast<double>(lp - ox - x) / lp;
      r(19) = static_cast<double>(wp - oy - y) / wp;
      r(20) = static_cast<double>(ox) / lp;
      r(21) = static_cast<double>(oy) / wp;
      r(22) = static_cast<double>(oz) / hp;
      r(23) = box.density / density_scale;
      r(24) = box.rigidity / rigidity_scale;
      r(25) = box.mass() / mass_norm;
    }
  }
}

MaskModel::MaskModel(GridConfig grid, const MaskLearningConfig& cfg,
                     FeatureScales scales, std::uint64_t seed)
    : featurizer_(grid, scales), threshold_(cfg.threshold) {
  cfg.validate();
  std::vector<int> sizes;
  sizes.push_back(MaskFeaturizer::kFeatureCount);
  sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  sizes.push_back(1);
  net_ = nn::Mlp(sizes, seed);
}

std::vector<double> MaskModel::predict_probabilities(const PalletState& pallet,
                                                     const BoxSpec& box,
                                                     Orientation o) const {
  nn::Matrix rows;
  std::vector<std::uint8_t> in_bounds;
  featurizer_.features(pallet, box, o, &rows, &in_bounds);
  const nn::Matrix logits = net_.infer(rows);
  std::vector<double> probs(in_bounds.size(), 0.0);
  for (std::size_t i = 0; i < in_bounds.size(); ++i) {
    if (in_bounds[i]) {
      probs[i] = 1.0 / (1.0 + std::exp(-logits(static_cast<Eigen::Index>(i), 0)));
    }
  }
  return probs;
}

FeasibilityMap MaskModel::predict(const PalletState& pallet, const BoxSpec& box,
                                  Orientation o) const {
  const auto probs = predict_probabilities(pallet, box, o);
  const GridConfig& grid = featurizer_.grid();
  FeasibilityMap map(grid.length_cells, grid.width_cells, false);
  for (int x = 0; x < grid.length_cells; ++x) {
    for (int y = 0; y < grid.width_cells; ++y) {
      const std::size_t i = static_cast<std::size_t>(x) * grid.width_cells + y;
      map.set(x, y, probs[i] >= threshold_);
    }
  }
  return map;
}

double iou(const FeasibilityMap& prediction, const FeasibilityMap& label) {
  if (prediction.length() != label.length() || prediction.width() != label.width()) {
    throw ConfigError("iou: map shapes differ");
  }
  std::size_t inter = 0, uni = 0;
  for (int x = 0; x < prediction.length(); ++x) {
    for (int y = 0; y < prediction.width(); ++y) {
      const bool a = prediction.at(x, y);
      const bool b = label.at(x, y);
      inter += (a && b) ? 1 : 0;
      uni += (a || b) ? 1 : 0;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct SampleRows {
  nn::Matrix x;
  nn::Matrix t;  // one column
};

SampleRows sample_rows(const MaskModel& model, const MaskSample& s) {
  const PalletState pallet = s.rebuild_pallet();
  nn::Matrix rows;
  std::vector<std::uint8_t> in_bounds;
  model.featurizer().features(pallet, s.box, s.orientation, &rows, &in_bounds);

  Eigen::Index n_in = 0;
  for (auto b : in_bounds) n_in += b ? 1 : 0;
  SampleRows out;
  out.x.resize(n_in, rows.cols());
  out.t.resize(n_in, 1);
  const int wp = s.grid.width_cells;
  Eigen::Index at = 0;
  for (int x = 0; x < s.grid.length_cells; ++x) {
    for (int y = 0; y < wp; ++y) {
      const std::size_t i = static_cast<std::size_t>(x) * wp + y;
      if (!in_bounds[i]) continue;
      out.x.row(at) = rows.row(static_cast<Eigen::Index>(i));
      out.t(at, 0) = s.label->at(x, y) ? 1.0 : 0.0;
      ++at;
    }
  }
  return out;
}

}  // namespace

double train_epochs(MaskModel& model, nn::Adam& optimizer, const FeasibleDataset& data,
                    int epochs, std::uint64_t split_seed,
                    const MaskLearningConfig& cfg) {
  const std::size_t n = data.size();
  if (n == 0) throw EmptyDatasetError("cannot train on an empty dataset");
  for (std::size_t i = 0; i < n; ++i) {
    if (!data.at(i).label.has_value()) {
      throw EmptyDatasetError("dataset contains unannotated samples");
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng split_rng(split_seed);
  split_rng.shuffle(order);

  std::size_t n_val = 0;
  if (n >= 2) {
    n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  }
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
  if (train_idx.empty()) train_idx = val_idx;  // single-sample dataset
  if (val_idx.empty()) val_idx = train_idx;

  // Positive-class weight balances feasible/infeasible cell counts over the
  // in-bounds rows that actually enter training.
  double pos_cells = 0.0, neg_cells = 0.0;
  for (std::size_t i : train_idx) {
    const MaskSample& s = data.at(i);
    const auto od = oriented_dims(s.box, s.orientation);
    const double in_bounds_count =
        static_cast<double>(std::max(0, s.grid.length_cells - od[0] + 1)) *
        std::max(0, s.grid.width_cells - od[1] + 1);
    const double pos = static_cast<double>(s.label->feasible_count());
    pos_cells += pos;
    neg_cells += std::max(0.0, in_bounds_count - pos);
  }
  double pos_weight = 1.0;
  if (pos_cells > 0.0 && neg_cells > 0.0) {
    pos_weight = std::clamp(neg_cells / pos_cells, 1.0 / cfg.pos_weight_cap,
                            cfg.pos_weight_cap);
  }

  const int feature_count = model.featurizer().feature_count();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::size_t> epoch_order = train_idx;
    Rng epoch_rng(Rng::mix(split_seed, static_cast<std::uint64_t>(epoch) + 1));
    epoch_rng.shuffle(epoch_order);

    nn::Matrix batch_x(cfg.batch_cells, feature_count);
    nn::Matrix batch_t(cfg.batch_cells, 1);
    Eigen::Index fill = 0;
    auto flush = [&]() {
      if (fill == 0) return;
      const nn::Matrix x = batch_x.topRows(fill);
      const nn::Matrix t = batch_t.topRows(fill);
      nn::Matrix w = t.unaryExpr(
          [&](double v) { return v > 0.5 ? pos_weight : 1.0; });
      const nn::Matrix logits = model.net().forward(x);
      nn::Matrix grad;
      nn::weighted_bce_with_logits(logits, t, w, &grad);
      model.net().backward(grad);
      optimizer.step(model.net());
      model.net().zero_grad();
      fill = 0;
    };

    for (std::size_t i : epoch_order) {
      const SampleRows rows = sample_rows(model, data.at(i));
      Eigen::Index taken = 0;
      while (taken < rows.x.rows()) {
        const Eigen::Index room = cfg.batch_cells - fill;
        const Eigen::Index take = std::min<Eigen::Index>(room, rows.x.rows() - taken);
        batch_x.middleRows(fill, take) = rows.x.middleRows(taken, take);
        batch_t.middleRows(fill, take) = rows.t.middleRows(taken, take);
        fill += take;
        taken += take;
        if (fill == cfg.batch_cells) flush();
      }
    }
    flush();
  }

  double iou_sum = 0.0;
  for (std::size_t i : val_idx) {
    const MaskSample& s = data.at(i);
    const PalletState pallet = s.rebuild_pallet();
    const FeasibilityMap pred = model.predict(pallet, s.box, s.orientation);
    iou_sum += iou(pred, *s.label);
  }
  return iou_sum / static_cast<double>(val_idx.size());
}

OnlineMaskLearner::OnlineMaskLearner(GridConfig grid, MaskLearningConfig cfg,
                                     OracleConfig oracle_cfg, FeatureScales scales,
                                     std::uint64_t seed)
    : cfg_(cfg),
      oracle_cfg_(oracle_cfg),
      model_(grid, cfg, scales, Rng::mix(seed, 0xde1)),
      optimizer_(model_.net(), cfg.learning_rate),
      dataset_(cfg.dataset_capacity),
      seed_(seed) {
  cfg_.validate();
  oracle_cfg_.validate();
}

bool OnlineMaskLearner::maybe_record(const PalletState& pallet, const BoxSpec& box,
                                     Orientation o, bool step_was_unstable, Rng& rng) {
  if (!should_record(step_was_unstable, rng, cfg_)) return false;
  const std::uint64_t sample_seed = Rng::mix(seed_, 0xa110, next_sample_seq_++);
  pending_.push_back(MaskSample::from(pallet, box, o, sample_seed));
  return true;
}

double OnlineMaskLearner::update() {
  annotate_batch(pending_, oracle_cfg_, cfg_.annotation_workers);
  for (auto& s : pending_) dataset_.push(std::move(s));
  pending_.clear();
  if (dataset_.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return train_epochs(model_, optimizer_, dataset_, cfg_.epochs_per_update,
                      cfg_.split_seed, cfg_);
}

}  // namespace palletize
