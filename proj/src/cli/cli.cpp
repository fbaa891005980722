#include "paint/cli/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "paint/cli/commands.hpp"
#include "paint/core/error.hpp"
#include "paint/core/io.hpp"

namespace paint::cli {

namespace {

// Settings resolve in three layers: built-in defaults, then the JSON config
// file (--config), then explicit command-line flags.
class ConfigLayer {
 public:
  void load(const std::string& path) {
    if (path.empty()) return;
    auto bytes = io::read_file(path);
    try {
      cfg_ = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("config file " + path + " is not valid JSON: " +
                      e.what());
    }
    PAINT_CHECK_DATA(cfg_.is_object(),
                     "config file " + path + " must hold a JSON object");
  }

  template <class T>
  void fill(const CLI::Option* opt, const std::string& key, T& var) {
    if (opt->count() > 0 || !cfg_.contains(key)) return;
    try {
      var = cfg_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw DataError("config key '" + key + "' has the wrong type");
    }
  }

 private:
  nlohmann::json cfg_ = nlohmann::json::object();
};

std::string default_out_dir() {
  const char* env = std::getenv("PAINT_OUT_DIR");
  return env && *env ? env : ".";
}

int dispatch(CLI::App& app, int argc, const char* const* argv,
             const std::function<int()>& body) {
  // Subcommand callbacks (config-file merging) run inside parse(), so project
  // errors can surface from either phase; both map the same way.
  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return 2;
    }
    return body();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"stroke-based painting engine"};
  app.require_subcommand(1);

  std::string config_path;

  // ---------------------------------------------------------- train-renderer
  auto* tr = app.add_subcommand(
      "train-renderer", "train a neural stroke renderer against the rasterizer");
  TrainRendererArgs tra;
  tra.out = default_out_dir();
  tr->add_option("--config", config_path, "JSON config file");
  auto* tr_stroke = tr->add_option("--stroke", tra.stroke,
                                   "stroke design: qbc|straight|triangle|circle");
  auto* tr_opaque = tr->add_flag("--opaque", tra.opaque, "force full opacity");
  auto* tr_batches = tr->add_option("--batches", tra.batches, "training batches");
  auto* tr_bs = tr->add_option("--batch-size", tra.batch_size, "batch size");
  auto* tr_res = tr->add_option("--resolution", tra.resolution,
                                "output resolution (32|64|128)");
  auto* tr_seed = tr->add_option("--seed", tra.seed, "global seed");
  auto* tr_out = tr->add_option("--out", tra.out, "output directory");
  auto* tr_ve = tr->add_option("--val-every", tra.val_every,
                               "validation cadence in batches");
  auto* tr_vs = tr->add_option("--val-size", tra.val_size,
                               "held-out stroke count");
  auto* tr_lr = tr->add_option("--lr", tra.lr, "learning rate");
  tr->callback([&] {
    ConfigLayer layer;
    layer.load(config_path);
    layer.fill(tr_stroke, "stroke", tra.stroke);
    layer.fill(tr_opaque, "opaque", tra.opaque);
    layer.fill(tr_batches, "batches", tra.batches);
    layer.fill(tr_bs, "batch_size", tra.batch_size);
    layer.fill(tr_res, "resolution", tra.resolution);
    layer.fill(tr_seed, "seed", tra.seed);
    layer.fill(tr_out, "out", tra.out);
    layer.fill(tr_ve, "val_every", tra.val_every);
    layer.fill(tr_vs, "val_size", tra.val_size);
    layer.fill(tr_lr, "lr", tra.lr);
  });

  // ------------------------------------------------------------ train-agent
  auto* ta = app.add_subcommand("train-agent",
                                "train the painting agent against a renderer");
  TrainAgentArgs taa;
  taa.out = default_out_dir();
  ta->add_option("--config", config_path, "JSON config file");
  auto* ta_ds = ta->add_option("--dataset", taa.dataset,
                               "mnist|synthetic|<image directory>");
  auto* ta_dsdir = ta->add_option("--dataset-dir", taa.dataset_dir,
                                  "data location for mnist");
  auto* ta_rend = ta->add_option("--renderer", taa.renderer,
                                 "renderer checkpoint path");
  auto* ta_rew = ta->add_option("--reward", taa.reward, "wgan|l2");
  auto* ta_strokes = ta->add_option("--strokes", taa.strokes,
                                    "total strokes per painting");
  auto* ta_bundle = ta->add_option("--bundle", taa.bundle,
                                   "strokes per action bundle");
  auto* ta_batches = ta->add_option("--batches", taa.batches,
                                    "training batches");
  auto* ta_bs = ta->add_option("--batch-size", taa.batch_size, "batch size");
  auto* ta_seed = ta->add_option("--seed", taa.seed, "global seed");
  auto* ta_out = ta->add_option("--out", taa.out, "output directory");
  auto* ta_me = ta->add_option("--metrics-every", taa.metrics_every,
                               "test-metric cadence in batches");
  auto* ta_trs = ta->add_option("--train-size", taa.train_size,
                                "materialized training target pool");
  auto* ta_tes = ta->add_option("--test-size", taa.test_size,
                                "held-out targets per metrics row");
  ta->callback([&] {
    ConfigLayer layer;
    layer.load(config_path);
    layer.fill(ta_ds, "dataset", taa.dataset);
    layer.fill(ta_dsdir, "dataset_dir", taa.dataset_dir);
    layer.fill(ta_rend, "renderer", taa.renderer);
    layer.fill(ta_rew, "reward", taa.reward);
    layer.fill(ta_strokes, "strokes", taa.strokes);
    layer.fill(ta_bundle, "bundle", taa.bundle);
    layer.fill(ta_batches, "batches", taa.batches);
    layer.fill(ta_bs, "batch_size", taa.batch_size);
    layer.fill(ta_seed, "seed", taa.seed);
    layer.fill(ta_out, "out", taa.out);
    layer.fill(ta_me, "metrics_every", taa.metrics_every);
    layer.fill(ta_trs, "train_size", taa.train_size);
    layer.fill(ta_tes, "test_size", taa.test_size);
  });

  // ------------------------------------------------------------------ paint
  auto* pa = app.add_subcommand("paint", "paint one target image");
  PaintArgs paa;
  paa.out = default_out_dir();
  pa->add_option("--config", config_path, "JSON config file");
  auto* pa_img = pa->add_option("--image", paa.image, "target image (PNG/JPEG)");
  auto* pa_agent = pa->add_option("--agent", paa.agent, "agent checkpoint");
  auto* pa_rend = pa->add_option("--renderer", paa.renderer,
                                 "renderer checkpoint");
  auto* pa_out = pa->add_option("--out", paa.out, "output directory");
  auto* pa_steps = pa->add_flag("--save-steps", paa.save_steps,
                                "write one frame per environment step");
  auto* pa_gt = pa->add_flag("--use-ground-truth-raster", paa.use_gt_raster,
                             "replay predicted strokes through the rasterizer");
  auto* pa_seed = pa->add_option("--seed", paa.seed, "global seed");
  pa->callback([&] {
    ConfigLayer layer;
    layer.load(config_path);
    layer.fill(pa_img, "image", paa.image);
    layer.fill(pa_agent, "agent", paa.agent);
    layer.fill(pa_rend, "renderer", paa.renderer);
    layer.fill(pa_out, "out", paa.out);
    layer.fill(pa_steps, "save_steps", paa.save_steps);
    layer.fill(pa_gt, "use_ground_truth_raster", paa.use_gt_raster);
    layer.fill(pa_seed, "seed", paa.seed);
  });

  // ------------------------------------------------------------------- eval
  auto* ev = app.add_subcommand("eval", "evaluate an agent on a test set");
  EvalArgs eva;
  eva.out = default_out_dir();
  ev->add_option("--config", config_path, "JSON config file");
  auto* ev_ds = ev->add_option("--dataset", eva.dataset,
                               "mnist|synthetic|<image directory>");
  auto* ev_dsdir = ev->add_option("--dataset-dir", eva.dataset_dir,
                                  "data location for mnist");
  auto* ev_agent = ev->add_option("--agent", eva.agent, "agent checkpoint");
  auto* ev_rend = ev->add_option("--renderer", eva.renderer,
                                 "renderer checkpoint");
  auto* ev_limit = ev->add_option("--limit", eva.limit,
                                  "max test images (0 = all)");
  auto* ev_out = ev->add_option("--out", eva.out, "output directory");
  auto* ev_seed = ev->add_option("--seed", eva.seed, "global seed");
  ev->callback([&] {
    ConfigLayer layer;
    layer.load(config_path);
    layer.fill(ev_ds, "dataset", eva.dataset);
    layer.fill(ev_dsdir, "dataset_dir", eva.dataset_dir);
    layer.fill(ev_agent, "agent", eva.agent);
    layer.fill(ev_rend, "renderer", eva.renderer);
    layer.fill(ev_limit, "limit", eva.limit);
    layer.fill(ev_out, "out", eva.out);
    layer.fill(ev_seed, "seed", eva.seed);
  });

  // ---------------------------------------------------------- render-stroke
  auto* rs = app.add_subcommand("render-stroke",
                                "rasterize one stroke to PNG (debug)");
  RenderStrokeArgs rsa;
  rsa.out = default_out_dir();
  rs->add_option("--config", config_path, "JSON config file");
  auto* rs_params = rs->add_option("--params", rsa.params,
                                   "13 comma-separated reals in [0,1]");
  auto* rs_stroke = rs->add_option("--stroke", rsa.stroke,
                                   "qbc|straight|triangle|circle");
  auto* rs_opaque = rs->add_flag("--opaque", rsa.opaque, "force full opacity");
  auto* rs_rend = rs->add_option("--renderer", rsa.renderer,
                                 "also render through this checkpoint");
  auto* rs_res = rs->add_option("--resolution", rsa.resolution,
                                "rasterizer resolution");
  auto* rs_out = rs->add_option("--out", rsa.out, "output directory");
  rs->callback([&] {
    ConfigLayer layer;
    layer.load(config_path);
    layer.fill(rs_params, "params", rsa.params);
    layer.fill(rs_stroke, "stroke", rsa.stroke);
    layer.fill(rs_opaque, "opaque", rsa.opaque);
    layer.fill(rs_rend, "renderer", rsa.renderer);
    layer.fill(rs_res, "resolution", rsa.resolution);
    layer.fill(rs_out, "out", rsa.out);
  });

  return dispatch(app, argc, argv, [&]() -> int {
    if (tr->parsed()) return cmd_train_renderer(tra);
    if (ta->parsed()) return cmd_train_agent(taa);
    if (pa->parsed()) return cmd_paint(paa);
    if (ev->parsed()) return cmd_eval(eva);
    if (rs->parsed()) return cmd_render_stroke(rsa);
    throw UsageError("no subcommand given");
  });
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("painter");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run((int)argv.size(), argv.data());
}

}  // namespace paint::cli
