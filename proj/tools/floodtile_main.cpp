#include <CLI11.hpp>
#include <iostream>

#include "floodtile/cli.hpp"

using namespace floodtile;

namespace {

// Layered configuration: built-in defaults (or the desk preset), then the
// JSON config file, then explicit flags.
struct ConfigFlags {
  std::string config_path, preset;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--preset", preset, "named preset: desk")->check(CLI::IsMember({"desk"}));
    sub->add_option("--depth", "encoder/decoder stages");
    sub->add_option("--width", "filters in the first block");
    sub->add_option("--patch-size", "training patch side");
    sub->add_option("--patches-per-image", "patches sampled per image per epoch");
    sub->add_option("--valid-threshold", "minimum valid fraction per patch");
    sub->add_option("--lr", "learning rate");
    sub->add_option("--batch-size", "patches per optimizer step");
    sub->add_option("--max-epochs", "epoch cap");
    sub->add_option("--patience", "early stopping patience");
    sub->add_option("--strategy", "validation/eval strategy")
        ->check(CLI::IsMember({"no_overlap", "overlap", "center_crop"}));
    sub->add_option("--infer-patch", "inference tile size (P or P_total)");
    sub->add_option("--infer-stride", "overlap stride");
    sub->add_option("--infer-center", "center-crop kept size");
    sub->add_option("--seed", "run seed");
    sub->add_flag("--no-target-norm", "disable target normalization");
  }

  cli::ExperimentConfig resolve(CLI::App* sub) const {
    cli::ExperimentConfig cfg =
        preset == "desk" ? cli::ExperimentConfig::desk_preset() : cli::ExperimentConfig{};
    if (!config_path.empty()) cfg.apply_json(config_path);
    auto ov = [&](const char* flag, auto& dst) {
      auto* opt = sub->get_option_no_throw(flag);
      if (opt && opt->count()) dst = opt->as<std::remove_reference_t<decltype(dst)>>();
    };
    ov("--depth", cfg.depth);
    ov("--width", cfg.width);
    ov("--patch-size", cfg.patch_size);
    ov("--patches-per-image", cfg.patches_per_image);
    ov("--valid-threshold", cfg.valid_threshold);
    ov("--lr", cfg.lr);
    ov("--batch-size", cfg.batch_size);
    ov("--max-epochs", cfg.max_epochs);
    ov("--patience", cfg.early_stop_patience);
    ov("--strategy", cfg.strategy);
    ov("--infer-patch", cfg.infer_patch);
    ov("--infer-stride", cfg.infer_stride);
    ov("--infer-center", cfg.infer_center);
    ov("--seed", cfg.seed);
    if (sub->count("--no-target-norm")) cfg.target_normalization = false;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"floodtile: patch-trained raster water-level surrogate"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic domain and targets");
  cli::GenArgs gen_args;
  gen->add_option("--out", gen_args.out, "output directory")->required();
  gen->add_option("--seed", gen_args.seed, "terrain seed");
  gen->add_option("--rows", gen_args.rows, "domain rows");
  gen->add_option("--cols", gen_args.cols, "domain cols");
  gen->add_option("--preset", gen_args.preset, "terrain preset: primary | alternate")
      ->check(CLI::IsMember({"primary", "alternate"}));
  gen->add_option("--discharges", gen_args.discharges, "explicit discharge grid");
  gen->add_option("--val-q", gen_args.val_q, "validation discharges");
  gen->add_option("--test-q", gen_args.test_q, "test discharges");
  gen->add_option("--flood-fraction", gen_args.flood_fraction,
                  "flooded share at the largest discharge");

  // train
  auto* train = app.add_subcommand("train", "train a model on a generated domain");
  cli::TrainArgs train_args;
  ConfigFlags train_flags;
  train->add_option("--data", train_args.data, "data directory from gen")->required();
  train->add_option("--out", train_args.out, "run output directory")->required();
  train_flags.attach(train);

  // infer
  auto* infer = app.add_subcommand("infer", "full-domain prediction for one discharge");
  cli::InferArgs infer_args;
  ConfigFlags infer_flags;
  infer->add_option("--checkpoint", infer_args.checkpoint)->required();
  infer->add_option("--stats", infer_args.stats, "norm_stats.json")->required();
  infer->add_option("--data", infer_args.data)->required();
  infer->add_option("--out", infer_args.out)->required();
  infer->add_option("--discharge", infer_args.discharge)->required();
  infer->add_option("--strategies", infer_args.strategies,
                    "subset of {no_overlap, overlap, center_crop}");
  infer_flags.attach(infer);

  // eval
  auto* eval = app.add_subcommand("eval", "metrics and error maps for a split");
  cli::EvalArgs eval_args;
  ConfigFlags eval_flags;
  eval->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval->add_option("--stats", eval_args.stats)->required();
  eval->add_option("--data", eval_args.data)->required();
  eval->add_option("--out", eval_args.out)->required();
  eval->add_option("--split", eval_args.split)->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--error-threshold", eval_args.error_threshold,
                   "suppress |error| below this in maps (m)");
  eval_flags.attach(eval);

  // xval
  auto* xval = app.add_subcommand("xval", "leave-one-discharge-out cross-validation");
  cli::XvalArgs xval_args;
  ConfigFlags xval_flags;
  xval->add_option("--data", xval_args.data)->required();
  xval->add_option("--out", xval_args.out)->required();
  xval_flags.attach(xval);

  // zeroshot
  auto* zs = app.add_subcommand("zeroshot", "evaluate a model on a foreign domain");
  cli::ZeroShotArgs zs_args;
  ConfigFlags zs_flags;
  zs->add_option("--checkpoint", zs_args.checkpoint)->required();
  zs->add_option("--stats", zs_args.stats, "source-domain norm_stats.json")->required();
  zs->add_option("--data", zs_args.data, "foreign data directory")->required();
  zs->add_option("--out", zs_args.out)->required();
  zs_flags.attach(zs);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "grid of training runs over one knob");
  cli::AblateArgs ablate_args;
  ConfigFlags ablate_flags;
  ablate->add_option("--data", ablate_args.data)->required();
  ablate->add_option("--out", ablate_args.out)->required();
  ablate
      ->add_option("--kind", ablate_args.kind,
                   "depth | width | patch-size | patch-amount | target-norm")
      ->required()
      ->check(CLI::IsMember({"depth", "width", "patch-size", "patch-amount", "target-norm"}));
  ablate->add_option("--grid", ablate_args.grid, "values to sweep")->required();
  ablate_flags.attach(ablate);

  // count-params
  auto* cp = app.add_subcommand("count-params", "trainable parameter count for depth/width");
  int cp_depth = 4, cp_width = 16;
  cp->add_option("--depth", cp_depth)->required();
  cp->add_option("--width", cp_width)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cli::cmd_gen(gen_args);
    if (train->parsed()) {
      train_args.cfg = train_flags.resolve(train);
      return cli::cmd_train(train_args);
    }
    if (infer->parsed()) {
      infer_args.cfg = infer_flags.resolve(infer);
      return cli::cmd_infer(infer_args);
    }
    if (eval->parsed()) {
      eval_args.cfg = eval_flags.resolve(eval);
      return cli::cmd_eval(eval_args);
    }
    if (xval->parsed()) {
      xval_args.cfg = xval_flags.resolve(xval);
      if (!xval->count("--max-epochs") && xval_args.cfg.max_epochs > 200)
        xval_args.cfg.max_epochs = 200;  // per-fold cap default
      return cli::cmd_xval(xval_args);
    }
    if (zs->parsed()) {
      zs_args.cfg = zs_flags.resolve(zs);
      return cli::cmd_zeroshot(zs_args);
    }
    if (ablate->parsed()) {
      ablate_args.cfg = ablate_flags.resolve(ablate);
      return cli::cmd_ablate(ablate_args);
    }
    if (cp->parsed()) return cli::cmd_count_params(cp_depth, cp_width);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
