#pragma once

#include <cstdint>
#include <string>

namespace paint::cli {

// Parsed + config-merged settings per subcommand. Every command writes a
// config.json snapshot of these next to its artifacts.

struct TrainRendererArgs {
  std::string stroke = "qbc";
  bool opaque = false;
  int batches = 30000;
  int batch_size = 64;
  int resolution = 128;
  uint64_t seed = 0;
  std::string out;
  int val_every = 500;
  int val_size = 1024;
  double lr = 3e-4;
};
int cmd_train_renderer(const TrainRendererArgs& a);

struct TrainAgentArgs {
  std::string dataset = "mnist";
  std::string dataset_dir;
  std::string renderer;
  std::string reward = "wgan";  // wgan|l2
  int strokes = 5;
  int bundle = 5;
  int batches = 20000;
  int batch_size = 16;
  uint64_t seed = 0;
  std::string out;
  int metrics_every = 250;
  int train_size = 2000;  // materialized target pool
  int test_size = 64;     // held-out pool scored at each metrics row
};
int cmd_train_agent(const TrainAgentArgs& a);

struct PaintArgs {
  std::string image;
  std::string agent;
  std::string renderer;
  std::string out;
  bool save_steps = false;
  bool use_gt_raster = false;
  uint64_t seed = 0;
};
int cmd_paint(const PaintArgs& a);

struct EvalArgs {
  std::string dataset = "mnist";
  std::string dataset_dir;
  std::string agent;
  std::string renderer;
  int limit = 0;
  std::string out;
  uint64_t seed = 0;
};
int cmd_eval(const EvalArgs& a);

struct RenderStrokeArgs {
  std::string params;
  std::string stroke = "qbc";
  bool opaque = false;
  std::string renderer;
  int resolution = 128;
  std::string out;
};
int cmd_render_stroke(const RenderStrokeArgs& a);

}  // namespace paint::cli
