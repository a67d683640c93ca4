#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "floodtile/inference.hpp"
#include "floodtile/metrics.hpp"
#include "floodtile/optim.hpp"
#include "floodtile/patches.hpp"
#include "floodtile/unet.hpp"

namespace floodtile {

struct TrainConfig {
  UNetConfig model{4, 16, 3, 1};
  SamplerConfig sampler;
  AugmentConfig augment;
  AdamConfig adam;
  int batch_size = 32;
  int max_epochs = 750;
  int early_stop_patience = 75;
  double scheduler_factor = 0.1;
  int scheduler_patience = 10;
  double min_lr = 1e-8;
  bool target_normalization = true;
  InferenceConfig validation{Strategy::center_crop, 128, 64, 64};
  uint64_t seed = 0;

  void validate() const;
  int steps_per_epoch(size_t n_train_images) const;
};

struct Dataset {
  Raster dem;
  std::vector<DomainImage> train, val, test;
};

// Couples one discharge with its simulated target; invalid target cells
// are zeroed (they never enter statistics, loss or metrics).
DomainImage make_domain_image(const Raster& dem, float discharge, const Raster& target);

struct EpochRecord {
  int epoch = 0;
  double train_rmse = 0, val_rmse = 0, lr = 0;
  bool stopped = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct FitResult {
  std::unique_ptr<UNet> model;  // best-validation snapshot
  std::unique_ptr<Adam> optimizer;
  NormStats stats;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_rmse = 0;
};

// One pass over the per-epoch patch budget: every batch slot draws a
// fresh patch from its round-robin image under a stream seeded by
// (run seed, epoch, slot), normalizes, augments, then forward /
// masked-RMSE loss / backward / Adam step. Returns the mean batch loss
// (in normalized target space when target normalization is on).
double train_epoch(UNet& model, Adam& optimizer, std::span<const DomainImage> train,
                   const TrainConfig& cfg, const NormStats& stats, int epoch_index);

// Full-domain prediction in meters.
Plane<float> predict_image(const TileFn& fn, const DomainImage& image, const NormStats& stats,
                           const InferenceConfig& cfg);

// Mean over images of the full-domain masked RMSE in original units.
double validate_with(const TileFn& fn, std::span<const DomainImage> images,
                     const NormStats& stats, const InferenceConfig& cfg);
double validate(const UNet& model, std::span<const DomainImage> images, const NormStats& stats,
                const InferenceConfig& cfg);

// Epoch loop: train, validate with the configured strategy, feed the
// scheduler and the early stopper with the epoch's validation loss,
// record history. Returns the best snapshot.
FitResult fit(const TrainConfig& cfg, const Dataset& data, const EpochCallback& on_epoch = {});

struct SplitEval {
  MetricReport pooled;
  std::vector<MetricReport> per_image;  // nse is NaN for constant targets
  double target_min = 0, target_max = 0;
};
SplitEval evaluate_split(const UNet& model, std::span<const DomainImage> images,
                         const NormStats& stats, const InferenceConfig& cfg);

struct FoldReport {
  double held_out_q = 0;
  MetricReport report;
};

// Leave-one-out over discharges: fold i trains on the rest and uses the
// held-out image for validation and evaluation.
std::vector<FoldReport> cross_validate(TrainConfig cfg, const Raster& dem,
                                       const std::vector<DomainImage>& images,
                                       const EpochCallback& on_epoch = {});

// Foreign-domain evaluation with the source domain's normalization
// statistics; logs a warning to stderr when the foreign elevations fall
// outside the fitted range.
MetricReport zero_shot_eval(const UNet& model, const NormStats& source_stats,
                            std::span<const DomainImage> foreign_images,
                            const InferenceConfig& cfg);

}  // namespace floodtile
