#include "floodtile/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <limits>
#include <set>
#include <stdexcept>

namespace floodtile {

void TrainConfig::validate() const {
  model.validate();
  sampler.validate();
  augment.validate();
  validation.validate();
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
  if (early_stop_patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (adam.lr <= 0) throw std::invalid_argument("train: learning rate must be > 0");
  if (!model.patch_compatible(sampler.patch_size))
    throw std::invalid_argument("train: patch size must be divisible by 2^depth");
  if (!model.patch_compatible(validation.patch_size))
    throw std::invalid_argument("train: validation patch size must be divisible by 2^depth");
}

int TrainConfig::steps_per_epoch(size_t n_train_images) const {
  long total = long(n_train_images) * sampler.patches_per_image;
  return int((total + batch_size - 1) / batch_size);
}

DomainImage make_domain_image(const Raster& dem, float discharge, const Raster& target) {
  if (dem.rows != target.rows || dem.cols != target.cols)
    throw std::invalid_argument("domain image: dem/target dimension mismatch");
  DomainImage img;
  img.discharge = discharge;
  img.mask = build_validity_mask(target);
  img.input = stack_input_channels(dem, discharge, img.mask);
  img.target.resize(target.values.size());
  for (size_t i = 0; i < target.values.size(); ++i)
    img.target[i] = img.mask.bits[i] ? target.values[i] : 0.0f;
  return img;
}

double train_epoch(UNet& model, Adam& optimizer, std::span<const DomainImage> train,
                   const TrainConfig& cfg, const NormStats& stats, int epoch_index) {
  if (train.empty()) throw std::invalid_argument("train_epoch: empty training split");
  int steps = cfg.steps_per_epoch(train.size());
  int p = cfg.sampler.patch_size;
  size_t pp = size_t(p) * p;

  double loss_sum = 0;
  for (int step = 0; step < steps; ++step) {
    Tensor4f x(cfg.batch_size, 3, p, p);
    Tensor4f y(cfg.batch_size, 1, p, p);
    std::vector<uint8_t> mask(size_t(cfg.batch_size) * pp);

    for (int j = 0; j < cfg.batch_size; ++j) {
      long slot = long(step) * cfg.batch_size + j;
      const DomainImage& img = train[size_t(slot) % train.size()];
      Rng rng(derive_seed(cfg.seed, uint64_t(epoch_index), uint64_t(slot)));
      PatchPair pair = sample_valid_patch(img, cfg.sampler, rng);
      normalize_pair(pair, stats);
      augment(pair, cfg.augment, rng);

      std::memcpy(x.plane(j, 0), pair.input.data(), 3 * pp * sizeof(float));
      std::memcpy(y.plane(j, 0), pair.target.data(), pp * sizeof(float));
      std::memcpy(mask.data() + size_t(j) * pp, pair.mask.data(), pp);
    }

    UNetTrace<float> trace;
    Tensor4f out;
    try {
      out = model.forward_train(x, trace);
      double loss = masked_rmse(out.data, y.data, mask);
      loss_sum += loss;

      auto grad = masked_rmse_grad(out.data, y.data, mask);
      Tensor4f grad_t(cfg.batch_size, 1, p, p);
      grad_t.data = std::move(grad);
      model.zero_grads();
      model.backward(trace, grad_t);
      optimizer.step();
    } catch (const std::exception& e) {
      throw std::runtime_error("epoch " + std::to_string(epoch_index) + ", step " +
                               std::to_string(step) + ": " + e.what());
    }
  }
  return loss_sum / steps;
}

Plane<float> predict_image(const TileFn& fn, const DomainImage& image, const NormStats& stats,
                           const InferenceConfig& cfg) {
  InputStack stack = image.input;
  normalize_stack(stack, stats);
  Plane<float> pred = run_inference(stack, cfg, fn);
  if (stats.target_norm_enabled)
    denormalize_span(pred.v, stats.target_min, stats.target_max);
  return pred;
}

double validate_with(const TileFn& fn, std::span<const DomainImage> images,
                     const NormStats& stats, const InferenceConfig& cfg) {
  if (images.empty()) throw std::invalid_argument("validate: empty validation set");
  double sum = 0;
  for (const auto& img : images) {
    Plane<float> pred = predict_image(fn, img, stats, cfg);
    sum += masked_rmse(pred.v, img.target, img.mask.bits);
  }
  return sum / double(images.size());
}

double validate(const UNet& model, std::span<const DomainImage> images, const NormStats& stats,
                const InferenceConfig& cfg) {
  return validate_with(tile_fn(model), images, stats, cfg);
}

namespace {

void check_split_hygiene(const Dataset& data) {
  std::set<float> seen;
  auto add = [&](const std::vector<DomainImage>& part, const char* name) {
    for (const auto& img : part)
      if (!seen.insert(img.discharge).second)
        throw std::invalid_argument(std::string("split hygiene: discharge ") +
                                    std::to_string(img.discharge) + " appears twice (" + name +
                                    ")");
  };
  add(data.train, "train");
  add(data.val, "val");
  add(data.test, "test");
}

}  // namespace

FitResult fit(const TrainConfig& cfg, const Dataset& data, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("fit: empty training split");
  if (data.val.empty()) throw std::invalid_argument("fit: empty validation split");
  check_split_hygiene(data);

  FitResult result;
  result.stats = fit_norm_stats(data.dem, data.train, cfg.target_normalization);
  result.model = std::make_unique<UNet>(cfg.model, cfg.seed);
  result.optimizer = std::make_unique<Adam>(result.model->params(), cfg.adam);
  PlateauScheduler scheduler(cfg.adam.lr, cfg.scheduler_factor, cfg.scheduler_patience,
                             cfg.min_lr);
  EarlyStopper stopper(cfg.early_stop_patience);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double train_loss =
        train_epoch(*result.model, *result.optimizer, data.train, cfg, result.stats, epoch);
    double val_loss = validate(*result.model, data.val, result.stats, cfg.validation);
    // the scheduler and stopper both observe this epoch's validation loss
    result.optimizer->set_lr(scheduler.observe(val_loss));
    bool stop = stopper.observe(val_loss, *result.model);

    EpochRecord rec{epoch, train_loss, val_loss, result.optimizer->lr(), stop};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stop) break;
  }

  stopper.restore_best(*result.model);
  result.best_epoch = stopper.best_epoch();
  result.best_val_rmse = stopper.best_loss();
  return result;
}

SplitEval evaluate_split(const UNet& model, std::span<const DomainImage> images,
                         const NormStats& stats, const InferenceConfig& cfg) {
  if (images.empty()) throw std::invalid_argument("evaluate_split: empty split");
  SplitEval ev;
  MetricAccumulator pooled;
  ev.target_min = std::numeric_limits<double>::infinity();
  ev.target_max = -ev.target_min;
  auto fn = tile_fn(model);
  for (const auto& img : images) {
    Plane<float> pred = predict_image(fn, img, stats, cfg);
    MetricAccumulator acc;
    for (size_t i = 0; i < pred.v.size(); ++i) {
      if (!img.mask.bits[i]) continue;
      acc.add(pred.v[i], img.target[i]);
      ev.target_min = std::min(ev.target_min, double(img.target[i]));
      ev.target_max = std::max(ev.target_max, double(img.target[i]));
    }
    MetricReport r;
    try {
      r = finalize_report(acc);
    } catch (const std::invalid_argument&) {
      r.rmse = acc.n ? std::sqrt(acc.sse / double(acc.n)) : 0;
      r.n_valid = acc.n;
      r.max_abs_error = acc.max_abs;
      r.nse = std::numeric_limits<double>::quiet_NaN();
    }
    ev.per_image.push_back(r);
    pooled.merge(acc);
  }
  ev.pooled = finalize_report(pooled);
  return ev;
}

std::vector<FoldReport> cross_validate(TrainConfig cfg, const Raster& dem,
                                       const std::vector<DomainImage>& images,
                                       const EpochCallback& on_epoch) {
  if (images.size() < 3) throw std::invalid_argument("cross_validate: need at least 3 discharges");
  std::vector<FoldReport> folds;
  uint64_t base_seed = cfg.seed;
  for (size_t i = 0; i < images.size(); ++i) {
    Dataset d;
    d.dem = dem;
    for (size_t j = 0; j < images.size(); ++j)
      (j == i ? d.val : d.train).push_back(images[j]);
    cfg.seed = derive_seed(base_seed, uint64_t(i));
    FitResult res = fit(cfg, d, on_epoch);
    SplitEval ev = evaluate_split(*res.model, d.val, res.stats, cfg.validation);
    folds.push_back({double(images[i].discharge), ev.pooled});
  }
  return folds;
}

MetricReport zero_shot_eval(const UNet& model, const NormStats& source_stats,
                            std::span<const DomainImage> foreign_images,
                            const InferenceConfig& cfg) {
  if (foreign_images.empty()) throw std::invalid_argument("zero_shot_eval: empty split");
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (const auto& img : foreign_images) {
    const float* elev = img.input.channel(0);
    size_t n = size_t(img.input.rows) * img.input.cols;
    for (size_t i = 0; i < n; ++i) {
      lo = std::min(lo, elev[i]);
      hi = std::max(hi, elev[i]);
    }
  }
  if (lo < source_stats.elev_min || hi > source_stats.elev_max)
    std::cerr << "warning: foreign elevation range [" << lo << ", " << hi
              << "] falls outside the fitted statistics [" << source_stats.elev_min << ", "
              << source_stats.elev_max << "]; inputs normalize outside [0, 1]\n";
  return evaluate_split(model, foreign_images, source_stats, cfg).pooled;
}

}  // namespace floodtile
