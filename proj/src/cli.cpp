#include "floodtile/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "floodtile/hash.hpp"
#include "floodtile/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace floodtile::cli {

namespace {

std::string format_q(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", q);
  return buf;
}

std::string target_name(double q) { return "target_q" + format_q(q) + ".asc"; }
std::string mask_name(double q) { return "mask_q" + format_q(q) + ".asc"; }

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void ensure_outdir(const std::string& out) {
  if (out.empty()) throw std::invalid_argument("output directory required");
  fs::create_directories(out);
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

struct Manifest {
  json j;

  Manifest(const std::string& command, uint64_t seed) {
    j["command"] = command;
    j["format_version"] = 1;
    j["seed"] = seed;
    j["inputs"] = json::object();
    j["outputs"] = json::object();
  }
  void input(const std::string& path) {
    j["inputs"][fs::path(path).filename().string()] = sha256_file(path);
  }
  void output(const std::string& path) {
    j["outputs"][fs::path(path).filename().string()] = sha256_file(path);
  }
  void write(const std::string& dir) {
    std::ofstream out(join(dir, "manifest.json"));
    if (!out) throw std::runtime_error("cannot write manifest in " + dir);
    out << j.dump(2) << '\n';
  }
};

class Csv {
 public:
  Csv(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write csv: " + path);
    out_ << header << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, put(fields)), ...);
    out_ << '\n';
    out_.flush();
  }

 private:
  void put(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out_ << buf;
  }
  void put(int v) { out_ << v; }
  void put(long v) { out_ << v; }
  void put(const std::string& s) { out_ << s; }
  void put(const char* s) { out_ << s; }
  std::ofstream out_;
};

json config_to_json_obj(const ExperimentConfig& c) {
  return json::parse(c.to_json());
}

}  // namespace

ExperimentConfig ExperimentConfig::desk_preset() {
  ExperimentConfig c;
  c.depth = 3;
  c.width = 8;
  c.patch_size = 32;
  c.patches_per_image = 200;
  c.max_epochs = 200;
  return c;
}

void ExperimentConfig::apply_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file: " + path);
  json j;
  in >> j;
  auto opt = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::remove_reference_t<decltype(dst)>>();
  };
  opt("depth", depth);
  opt("width", width);
  opt("patch_size", patch_size);
  opt("patches_per_image", patches_per_image);
  opt("valid_threshold", valid_threshold);
  opt("max_attempts", max_attempts);
  opt("p_hflip", p_hflip);
  opt("p_vflip", p_vflip);
  opt("p_rot", p_rot);
  opt("lr", lr);
  opt("batch_size", batch_size);
  opt("max_epochs", max_epochs);
  opt("early_stop_patience", early_stop_patience);
  opt("scheduler_factor", scheduler_factor);
  opt("scheduler_patience", scheduler_patience);
  opt("min_lr", min_lr);
  opt("target_normalization", target_normalization);
  opt("strategy", strategy);
  opt("infer_patch", infer_patch);
  opt("infer_stride", infer_stride);
  opt("infer_center", infer_center);
  opt("seed", seed);
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["depth"] = depth;
  j["width"] = width;
  j["patch_size"] = patch_size;
  j["patches_per_image"] = patches_per_image;
  j["valid_threshold"] = valid_threshold;
  j["max_attempts"] = max_attempts;
  j["p_hflip"] = p_hflip;
  j["p_vflip"] = p_vflip;
  j["p_rot"] = p_rot;
  j["lr"] = lr;
  j["batch_size"] = batch_size;
  j["max_epochs"] = max_epochs;
  j["early_stop_patience"] = early_stop_patience;
  j["scheduler_factor"] = scheduler_factor;
  j["scheduler_patience"] = scheduler_patience;
  j["min_lr"] = min_lr;
  j["target_normalization"] = target_normalization;
  j["strategy"] = strategy;
  j["infer_patch"] = infer_patch;
  j["infer_stride"] = infer_stride;
  j["infer_center"] = infer_center;
  j["seed"] = seed;
  return j.dump(2);
}

InferenceConfig ExperimentConfig::to_inference_config() const {
  InferenceConfig ic;
  ic.strategy = strategy_from_string(strategy);
  ic.patch_size = infer_patch > 0 ? infer_patch : patch_size;
  ic.stride = infer_stride > 0 ? infer_stride : ic.patch_size / 2;
  ic.center_size = infer_center > 0 ? infer_center : ic.patch_size / 2;
  ic.validate();
  return ic;
}

TrainConfig ExperimentConfig::to_train_config() const {
  TrainConfig t;
  t.model = UNetConfig{depth, width, 3, 1};
  t.sampler.patch_size = patch_size;
  t.sampler.patches_per_image = patches_per_image;
  t.sampler.valid_threshold = valid_threshold;
  t.sampler.max_attempts = max_attempts;
  t.sampler.seed = seed;
  t.augment = AugmentConfig{p_hflip, p_vflip, p_rot};
  t.adam.lr = lr;
  t.batch_size = batch_size;
  t.max_epochs = max_epochs;
  t.early_stop_patience = early_stop_patience;
  t.scheduler_factor = scheduler_factor;
  t.scheduler_patience = scheduler_patience;
  t.min_lr = min_lr;
  t.target_normalization = target_normalization;
  t.validation = to_inference_config();
  t.seed = seed;
  t.validate();
  return t;
}

int cmd_gen(const GenArgs& args) {
  ensure_outdir(args.out);

  std::vector<double> grid = args.discharges.empty() ? default_discharge_grid() : args.discharges;
  std::sort(grid.begin(), grid.end());

  SplitSpec spec;
  if (args.val_q.empty() && args.test_q.empty()) {
    spec = default_split_spec(grid.size());
  } else {
    auto find_index = [&](double q) {
      for (size_t i = 0; i < grid.size(); ++i)
        if (grid[i] == q) return int(i);
      throw std::invalid_argument("split value " + format_q(q) + " is not in the discharge grid");
    };
    for (double q : args.val_q) spec.val_indices.push_back(find_index(q));
    for (double q : args.test_q) spec.test_indices.push_back(find_index(q));
  }
  // validates overlap and interpolation-only holdouts before any file IO
  Splits splits = make_splits(grid, spec);

  TerrainPreset preset;
  if (args.preset == "primary") preset = TerrainPreset::primary;
  else if (args.preset == "alternate") preset = TerrainPreset::alternate;
  else throw std::invalid_argument("unknown terrain preset: " + args.preset);

  SyntheticDomain dom =
      gen_terrain(args.seed, args.rows, args.cols, preset, grid.back(), args.flood_fraction);

  Manifest man("gen", args.seed);
  write_ascii_grid(dom.dem, join(args.out, "dem.asc"));
  man.output(join(args.out, "dem.asc"));

  for (double q : grid) {
    Raster level = simulate_water_level(dom, q);
    write_ascii_grid(level, join(args.out, target_name(q)));
    man.output(join(args.out, target_name(q)));

    Raster mask;
    mask.rows = level.rows;
    mask.cols = level.cols;
    mask.cell_size = level.cell_size;
    mask.origin_x = level.origin_x;
    mask.origin_y = level.origin_y;
    mask.nodata = -1.0f;
    mask.values.resize(level.values.size());
    for (size_t i = 0; i < level.values.size(); ++i)
      mask.values[i] = level.is_nodata(level.values[i]) ? 0.0f : 1.0f;
    write_ascii_grid(mask, join(args.out, mask_name(q)));
    man.output(join(args.out, mask_name(q)));
  }

  man.j["rows"] = args.rows;
  man.j["cols"] = args.cols;
  man.j["preset"] = args.preset;
  man.j["flood_fraction"] = args.flood_fraction;
  man.j["rating"] = {{"k", dom.rating_k}, {"e", dom.rating_e}};
  man.j["discharges"] = grid;
  man.j["splits"] = {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
  json cells = json::array();
  for (auto [r, c] : dom.channel_cells) cells.push_back({r, c});
  man.j["channel_cells"] = std::move(cells);
  man.write(args.out);

  std::cout << "generated " << args.rows << "x" << args.cols << " domain with " << grid.size()
            << " discharges (" << splits.train.size() << "/" << splits.val.size() << "/"
            << splits.test.size() << " split) in " << args.out << "\n";
  return 0;
}

LoadedData load_data_dir(const std::string& dir) {
  std::string manifest_path = join(dir, "manifest.json");
  if (!fs::exists(manifest_path))
    throw std::invalid_argument("missing " + manifest_path +
                                " (expected a data directory produced by 'floodtile gen' "
                                "holding dem.asc, target_q*.asc and manifest.json)");
  std::ifstream in(manifest_path);
  json man;
  in >> man;

  LoadedData data;
  std::string dem_path = join(dir, "dem.asc");
  if (!fs::exists(dem_path)) throw std::invalid_argument("missing " + dem_path);
  data.dem = read_ascii_grid(dem_path);
  data.discharges = man.at("discharges").get<std::vector<double>>();
  data.splits.train = man.at("splits").at("train").get<std::vector<double>>();
  data.splits.val = man.at("splits").at("val").get<std::vector<double>>();
  data.splits.test = man.at("splits").at("test").get<std::vector<double>>();

  auto load_part = [&](const std::vector<double>& qs, std::vector<DomainImage>& out) {
    for (double q : qs) {
      std::string path = join(dir, target_name(q));
      if (!fs::exists(path)) throw std::invalid_argument("missing " + path);
      out.push_back(make_domain_image(data.dem, float(q), read_ascii_grid(path)));
    }
  };
  load_part(data.splits.train, data.dataset.train);
  load_part(data.splits.val, data.dataset.val);
  load_part(data.splits.test, data.dataset.test);
  data.dataset.dem = data.dem;
  return data;
}

int cmd_train(const TrainArgs& args) {
  ensure_outdir(args.out);
  LoadedData data = load_data_dir(args.data);
  TrainConfig cfg = args.cfg.to_train_config();

  Manifest man("train", args.cfg.seed);
  man.input(join(args.data, "manifest.json"));
  man.input(join(args.data, "dem.asc"));
  for (double q : data.discharges) man.input(join(args.data, target_name(q)));
  man.j["config"] = config_to_json_obj(args.cfg);
  man.j["splits"] = {{"train", data.splits.train},
                     {"val", data.splits.val},
                     {"test", data.splits.test}};

  Csv history(join(args.out, "history.csv"), "epoch,train_rmse,val_rmse,lr,stopped");
  double t0 = now_seconds();
  FitResult res = fit(cfg, data.dataset, [&](const EpochRecord& r) {
    history.row(r.epoch, r.train_rmse, r.val_rmse, r.lr, r.stopped ? 1 : 0);
    std::cout << "epoch " << r.epoch << "  train " << r.train_rmse << "  val " << r.val_rmse
              << "  lr " << r.lr << (r.stopped ? "  [stopped]" : "") << "\n";
  });
  double train_seconds = now_seconds() - t0;

  save_checkpoint(join(args.out, "checkpoint.ftck"), *res.model, res.optimizer.get());
  res.stats.save(join(args.out, "norm_stats.json"));
  man.output(join(args.out, "checkpoint.ftck"));
  man.output(join(args.out, "norm_stats.json"));
  man.output(join(args.out, "history.csv"));
  man.j["best_epoch"] = res.best_epoch;
  man.j["best_val_rmse"] = res.best_val_rmse;
  man.j["epochs_run"] = res.history.size();
  man.j["train_seconds"] = train_seconds;
  man.j["norm_stats"] = json::parse(res.stats.to_json());
  man.write(args.out);

  std::cout << "best epoch " << res.best_epoch << " (val rmse " << res.best_val_rmse << ") in "
            << train_seconds << " s; wrote " << join(args.out, "checkpoint.ftck") << "\n";
  return 0;
}

namespace {

// Find or synthesize the image for one discharge: targets give the mask
// when present, otherwise the domain mask alone drives the input stack.
DomainImage image_for_discharge(const std::string& dir, const LoadedData& data, double q) {
  std::string path = join(dir, target_name(q));
  if (fs::exists(path))
    return make_domain_image(data.dem, float(q), read_ascii_grid(path));
  Raster empty = data.dem;  // all-valid surrogate target extent
  for (auto& v : empty.values) v = 0.0f;
  DomainImage img = make_domain_image(data.dem, float(q), empty);
  return img;
}

void write_prediction(const std::string& path, const Plane<float>& pred, const ValidityMask& mask,
                      const Raster& like) {
  Raster out;
  out.rows = pred.rows;
  out.cols = pred.cols;
  out.cell_size = like.cell_size;
  out.origin_x = like.origin_x;
  out.origin_y = like.origin_y;
  out.nodata = -9999.0f;
  out.values.resize(pred.v.size());
  for (size_t i = 0; i < pred.v.size(); ++i)
    out.values[i] = mask.bits[i] ? pred.v[i] : out.nodata;
  write_ascii_grid(out, path);
}

}  // namespace

int cmd_infer(const InferArgs& args) {
  ensure_outdir(args.out);
  LoadedData data = load_data_dir(args.data);
  auto loaded = load_checkpoint(args.checkpoint);
  NormStats stats = NormStats::load(args.stats);

  std::vector<std::string> strategies = args.strategies;
  if (strategies.empty()) strategies = {"no_overlap", "overlap", "center_crop"};

  Manifest man("infer", args.cfg.seed);
  man.input(args.checkpoint);
  man.input(args.stats);
  man.input(join(args.data, "dem.asc"));
  man.j["discharge"] = args.discharge;

  DomainImage img = image_for_discharge(args.data, data, args.discharge);
  InputStack normalized = img.input;
  normalize_stack(normalized, stats);
  auto fn = tile_fn(*loaded.model);

  Csv timing(join(args.out, "timing.csv"), "strategy,discharge,seconds_per_image");
  for (const auto& name : strategies) {
    ExperimentConfig geo = args.cfg;
    geo.strategy = name;
    InferenceConfig ic = geo.to_inference_config();
    if (!loaded.model->config().patch_compatible(ic.patch_size))
      throw std::invalid_argument("strategy " + name + ": patch size " +
                                  std::to_string(ic.patch_size) +
                                  " is not divisible by 2^depth of the checkpoint");

    // timed around the stitching loop only
    double t0 = now_seconds();
    Plane<float> pred = run_inference(normalized, ic, fn);
    double dt = now_seconds() - t0;
    if (stats.target_norm_enabled)
      denormalize_span(pred.v, stats.target_min, stats.target_max);

    std::string out_name = "prediction_" + name + "_q" + format_q(args.discharge) + ".asc";
    write_prediction(join(args.out, out_name), pred, img.mask, data.dem);
    man.output(join(args.out, out_name));
    timing.row(name, args.discharge, dt);
    std::cout << name << ": " << dt << " s\n";
  }
  man.output(join(args.out, "timing.csv"));
  man.write(args.out);
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  ensure_outdir(args.out);
  LoadedData data = load_data_dir(args.data);
  auto loaded = load_checkpoint(args.checkpoint);
  NormStats stats = NormStats::load(args.stats);
  InferenceConfig ic = args.cfg.to_inference_config();

  const std::vector<DomainImage>* part;
  const std::vector<double>* qs;
  if (args.split == "train") { part = &data.dataset.train; qs = &data.splits.train; }
  else if (args.split == "val") { part = &data.dataset.val; qs = &data.splits.val; }
  else if (args.split == "test") { part = &data.dataset.test; qs = &data.splits.test; }
  else throw std::invalid_argument("unknown split: " + args.split);
  if (part->empty()) throw std::invalid_argument("split '" + args.split + "' holds no images");

  Manifest man("eval", args.cfg.seed);
  man.input(args.checkpoint);
  man.input(args.stats);
  man.j["split"] = args.split;
  man.j["strategy"] = strategy_name(ic.strategy);
  man.j["error_threshold_m"] = args.error_threshold;

  std::string run_id = fs::path(args.checkpoint).parent_path().filename();
  if (run_id.empty()) run_id = "run";

  SplitEval ev = evaluate_split(*loaded.model, *part, stats, ic);
  Csv pooled(join(args.out, "metrics.csv"),
             "run_id,split,strategy,rmse_m,nse,n_valid,max_abs_error_m");
  pooled.row(run_id, args.split, strategy_name(ic.strategy), ev.pooled.rmse, ev.pooled.nse,
             ev.pooled.n_valid, ev.pooled.max_abs_error);
  Csv per_image(join(args.out, "metrics_per_image.csv"),
                "run_id,split,strategy,discharge,rmse_m,nse,n_valid,max_abs_error_m");

  auto fn = tile_fn(*loaded.model);
  for (size_t i = 0; i < part->size(); ++i) {
    const DomainImage& img = (*part)[i];
    const MetricReport& r = ev.per_image[i];
    per_image.row(run_id, args.split, strategy_name(ic.strategy), (*qs)[i], r.rmse, r.nse,
                  r.n_valid, r.max_abs_error);

    // signed error map, over-prediction positive; small errors drop out
    Plane<float> pred = predict_image(fn, img, stats, ic);
    Plane<float> err(pred.rows, pred.cols);
    float max_abs = 0;
    for (size_t k = 0; k < pred.v.size(); ++k) {
      float e = img.mask.bits[k] ? pred.v[k] - img.target[k] : 0.0f;
      if (std::fabs(e) < args.error_threshold) e = 0.0f;
      err.v[k] = e;
      max_abs = std::max(max_abs, std::fabs(e));
    }
    if (max_abs == 0) max_abs = 1.0f;
    std::string map_name = "errmap_q" + format_q((*qs)[i]) + ".pgm";
    write_pgm(err, join(args.out, map_name), -max_abs, max_abs);
    man.output(join(args.out, map_name));
  }
  man.output(join(args.out, "metrics.csv"));
  man.output(join(args.out, "metrics_per_image.csv"));
  man.write(args.out);

  std::cout << "split " << args.split << ": rmse " << ev.pooled.rmse << " m, nse "
            << ev.pooled.nse << ", n " << ev.pooled.n_valid << "\n";
  return 0;
}

int cmd_xval(const XvalArgs& args) {
  ensure_outdir(args.out);
  LoadedData data = load_data_dir(args.data);
  TrainConfig cfg = args.cfg.to_train_config();

  std::vector<DomainImage> all;
  for (double q : data.discharges) {
    std::string path = join(args.data, target_name(q));
    all.push_back(make_domain_image(data.dem, float(q), read_ascii_grid(path)));
  }

  Manifest man("xval", args.cfg.seed);
  man.input(join(args.data, "manifest.json"));
  man.j["config"] = config_to_json_obj(args.cfg);

  Csv csv(join(args.out, "xval_metrics.csv"),
          "fold,held_out_q,rmse_m,nse,n_valid,max_abs_error_m");
  int fold = 0;
  auto reports = cross_validate(cfg, data.dem, all, [&](const EpochRecord& r) {
    if (r.epoch % 25 == 0 || r.stopped)
      std::cout << "  fold " << fold << " epoch " << r.epoch << " val " << r.val_rmse << "\n";
  });
  for (const auto& fr : reports) {
    csv.row(fold, fr.held_out_q, fr.report.rmse, fr.report.nse, fr.report.n_valid,
            fr.report.max_abs_error);
    ++fold;
  }
  man.output(join(args.out, "xval_metrics.csv"));
  man.write(args.out);
  std::cout << reports.size() << " folds written to " << join(args.out, "xval_metrics.csv")
            << "\n";
  return 0;
}

int cmd_zeroshot(const ZeroShotArgs& args) {
  ensure_outdir(args.out);
  LoadedData foreign = load_data_dir(args.data);
  auto loaded = load_checkpoint(args.checkpoint);
  NormStats stats = NormStats::load(args.stats);  // source-domain statistics
  InferenceConfig ic = args.cfg.to_inference_config();

  Manifest man("zeroshot", args.cfg.seed);
  man.input(args.checkpoint);
  man.input(args.stats);
  man.input(join(args.data, "manifest.json"));

  MetricReport r = zero_shot_eval(*loaded.model, stats, foreign.dataset.test, ic);
  Csv csv(join(args.out, "zeroshot_metrics.csv"),
          "run_id,split,strategy,rmse_m,nse,n_valid,max_abs_error_m");
  csv.row("zeroshot", "test", strategy_name(ic.strategy), r.rmse, r.nse, r.n_valid,
          r.max_abs_error);
  man.output(join(args.out, "zeroshot_metrics.csv"));
  man.write(args.out);
  std::cout << "zero-shot: rmse " << r.rmse << " m, nse " << r.nse << "\n";
  return 0;
}

int cmd_ablate(const AblateArgs& args) {
  ensure_outdir(args.out);
  LoadedData data = load_data_dir(args.data);
  if (args.grid.empty()) throw std::invalid_argument("ablate: empty grid");

  Manifest man("ablate", args.cfg.seed);
  man.input(join(args.data, "manifest.json"));
  man.j["kind"] = args.kind;
  man.j["grid"] = args.grid;

  std::string csv_path = join(args.out, "ablate_" + args.kind + ".csv");
  Csv csv(csv_path, "kind,value,parameters,rmse_m,nse,train_seconds,infer_seconds_per_image");
  std::unique_ptr<Csv> curves;
  if (args.kind == "patch-amount") {
    curves = std::make_unique<Csv>(join(args.out, "ablate_patch_amount_curves.csv"),
                                   "patch_amount,update_step,val_rmse");
  }

  for (double value : args.grid) {
    ExperimentConfig cfg = args.cfg;
    if (args.kind == "depth") cfg.depth = int(value);
    else if (args.kind == "width") cfg.width = int(value);
    else if (args.kind == "patch-size") cfg.patch_size = int(value);
    else if (args.kind == "patch-amount") cfg.patches_per_image = int(value);
    else if (args.kind == "target-norm") cfg.target_normalization = value != 0;
    else throw std::invalid_argument("unknown ablation kind: " + args.kind);

    TrainConfig tc = cfg.to_train_config();
    int steps = tc.steps_per_epoch(data.dataset.train.size());
    double t0 = now_seconds();
    FitResult res = fit(tc, data.dataset, [&](const EpochRecord& r) {
      if (curves) curves->row(cfg.patches_per_image, r.epoch * steps, r.val_rmse);
    });
    double train_seconds = now_seconds() - t0;

    double e0 = now_seconds();
    SplitEval ev = evaluate_split(*res.model, data.dataset.test, res.stats, tc.validation);
    double infer_per_image = (now_seconds() - e0) / double(data.dataset.test.size());

    csv.row(args.kind, value, count_parameters(tc.model), ev.pooled.rmse, ev.pooled.nse,
            train_seconds, infer_per_image);
    std::cout << args.kind << "=" << value << ": rmse " << ev.pooled.rmse << ", nse "
              << ev.pooled.nse << ", " << train_seconds << " s\n";
  }
  man.output(csv_path);
  man.write(args.out);
  return 0;
}

int cmd_count_params(int depth, int width) {
  UNetConfig cfg{depth, width, 3, 1};
  long n = count_parameters(cfg);
  std::printf("%ld (%.3fM)\n", n, double(n) / 1e6);
  return 0;
}

}  // namespace floodtile::cli
