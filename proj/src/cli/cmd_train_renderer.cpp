#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "paint/cli/commands.hpp"
#include "paint/core/error.hpp"
#include "paint/core/io.hpp"
#include "paint/renderer/renderer.hpp"

namespace paint::cli {

int cmd_train_renderer(const TrainRendererArgs& a) {
  RendererTrainConfig cfg;
  cfg.design.kind = stroke_kind_from_string(a.stroke);
  cfg.design.opaque = a.opaque;
  cfg.batches = a.batches;
  cfg.batch_size = a.batch_size;
  cfg.resolution = a.resolution;
  cfg.seed = a.seed;
  cfg.val_every = a.val_every;
  cfg.val_size = a.val_size;
  cfg.lr = a.lr;
  PAINT_CHECK(cfg.batches >= 0, "--batches must be >= 0");

  std::filesystem::create_directories(a.out);
  nlohmann::json snapshot{
      {"command", "train-renderer"}, {"stroke", a.stroke},
      {"opaque", a.opaque},          {"batches", a.batches},
      {"batch_size", a.batch_size},  {"resolution", a.resolution},
      {"seed", a.seed},              {"out", a.out},
      {"val_every", a.val_every},    {"val_size", a.val_size},
      {"lr", a.lr}};
  io::write_text_atomic(a.out + "/config.json", snapshot.dump(2) + "\n");

  NeuralRenderer renderer;
  RendererTrainResult result = train_renderer(
      renderer, cfg, {}, [](int batch, double val) {
        std::cout << "batch " << batch << " val_mse " << val << std::endl;
      });

  save_renderer(a.out + "/renderer.ckpt", renderer);
  std::ostringstream csv;
  csv << "batch,val_mse\n";
  for (auto& [b, v] : result.val_history) csv << b << "," << v << "\n";
  io::write_text_atomic(a.out + "/renderer_loss.csv", csv.str());

  std::cout << "final val_mse " << result.final_val_mse << " val_mae "
            << result.final_val_mae << "\nwrote " << a.out << "/renderer.ckpt"
            << std::endl;
  return 0;
}

}  // namespace paint::cli
