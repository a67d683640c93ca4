#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floodtile/inference.hpp"
#include "floodtile/oracle.hpp"
#include "floodtile/training.hpp"

namespace floodtile::cli {

// Experiment configuration: JSON file plus flag overrides (flags win).
// Field names double as JSON keys.
struct ExperimentConfig {
  int depth = 4;
  int width = 16;
  int patch_size = 128;
  int patches_per_image = 400;
  double valid_threshold = 0.0;
  int max_attempts = 1000;
  double p_hflip = 0.5, p_vflip = 0.5, p_rot = 0.5;
  double lr = 4.27e-5;
  int batch_size = 32;
  int max_epochs = 750;
  int early_stop_patience = 75;
  double scheduler_factor = 0.1;
  int scheduler_patience = 10;
  double min_lr = 1e-8;
  bool target_normalization = true;
  std::string strategy = "center_crop";
  int infer_patch = 0;   // 0 = patch_size
  int infer_stride = 0;  // 0 = patch/2
  int infer_center = 0;  // 0 = patch/2
  uint64_t seed = 42;

  // sized so the whole acceptance suite fits one CPU core
  static ExperimentConfig desk_preset();

  void apply_json(const std::string& path);
  std::string to_json() const;
  TrainConfig to_train_config() const;
  InferenceConfig to_inference_config() const;
};

struct GenArgs {
  std::string out;
  uint64_t seed = 42;
  int rows = 256, cols = 512;
  std::string preset = "primary";
  std::vector<double> discharges;      // empty = default grid
  std::vector<double> val_q, test_q;   // empty = default interleave
  double flood_fraction = 0.25;
};

struct TrainArgs {
  std::string data, out;
  ExperimentConfig cfg;
};

struct InferArgs {
  std::string checkpoint, stats, data, out;
  double discharge = 0;
  std::vector<std::string> strategies;  // empty = all three
  ExperimentConfig cfg;                 // inference geometry
};

struct EvalArgs {
  std::string checkpoint, stats, data, out;
  std::string split = "test";
  double error_threshold = 0.01;  // meters; smaller errors render as zero
  ExperimentConfig cfg;
};

struct XvalArgs {
  std::string data, out;
  ExperimentConfig cfg;  // max_epochs acts as the per-fold cap
};

struct ZeroShotArgs {
  std::string checkpoint, stats, data, out;  // data = foreign domain dir
  ExperimentConfig cfg;
};

struct AblateArgs {
  std::string data, out, kind;  // depth | width | patch-size | patch-amount | target-norm
  std::vector<double> grid;
  ExperimentConfig cfg;
};

int cmd_gen(const GenArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_infer(const InferArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_xval(const XvalArgs& args);
int cmd_zeroshot(const ZeroShotArgs& args);
int cmd_ablate(const AblateArgs& args);
int cmd_count_params(int depth, int width);

// Data directory access (produced by cmd_gen).
struct LoadedData {
  Raster dem;
  std::vector<double> discharges;
  Splits splits;
  Dataset dataset;
};
LoadedData load_data_dir(const std::string& dir);

}  // namespace floodtile::cli
