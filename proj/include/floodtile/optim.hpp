#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "floodtile/unet.hpp"

namespace floodtile {

struct AdamConfig {
  double lr = 4.27e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter set (running statistics are
// not optimized). Throws on non-finite gradients, naming the parameter.
class Adam {
 public:
  Adam(std::vector<Param<float>*> params, AdamConfig cfg);

  void step();
  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  long step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

  // checkpoint plumbing
  struct State {
    long step_count;
    std::vector<std::vector<float>> m, v;
  };
  State state() const;
  void restore(const State& s);

 private:
  std::vector<Param<float>*> params_;
  AdamConfig cfg_;
  long step_count_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Multiplies the learning rate by `factor` after `patience`+1 consecutive
// observations without a strict improvement of the best seen loss, then
// resets its stale counter. The rate never increases and never drops
// below min_lr.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor = 0.1, int patience = 10,
                   double min_lr = 1e-8);

  double observe(double val_loss);  // returns the (possibly reduced) lr
  double lr() const { return lr_; }
  double best_seen() const { return best_; }
  int stale_count() const { return stale_; }

 private:
  double lr_, factor_, min_lr_;
  int patience_, stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

// Tracks the best validation loss, snapshots the full model state (incl.
// batch-norm running statistics) on every strict improvement, and signals
// stop once `patience` consecutive epochs fail to improve. Ties keep the
// earliest snapshot.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience = 75);

  bool observe(double val_loss, const UNet& model);  // true = stop now
  void restore_best(UNet& model) const;
  bool has_snapshot() const { return !best_state_.empty(); }
  double best_loss() const { return best_; }
  int best_epoch() const { return best_epoch_; }
  int counter() const { return counter_; }

 private:
  int patience_, counter_ = 0, epoch_ = 0, best_epoch_ = -1;
  double best_ = std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best_state_;
};

}  // namespace floodtile
