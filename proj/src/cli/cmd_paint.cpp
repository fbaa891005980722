#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "paint/agent/agent.hpp"
#include "paint/cli/commands.hpp"
#include "paint/core/error.hpp"
#include "paint/core/io.hpp"
#include "paint/env/env.hpp"

namespace paint::cli {

namespace {

std::string frame_name(int t) {
  std::ostringstream ss;
  ss << "step_" << std::setw(3) << std::setfill('0') << t << ".png";
  return ss.str();
}

}  // namespace

int cmd_paint(const PaintArgs& a) {
  if (a.image.empty() || a.agent.empty() || a.renderer.empty())
    throw UsageError("paint needs --image, --agent and --renderer");

  NeuralRenderer renderer = load_renderer(a.renderer);
  LoadedAgent loaded = load_agent(a.agent);
  PAINT_CHECK_DATA(loaded.renderer_hash == renderer_weights_hash(renderer),
                   "agent checkpoint was trained against a different "
                   "renderer (weights hash mismatch)");
  PAINT_CHECK_DATA(loaded.config.resolution == renderer.resolution(),
                   "agent/renderer resolution mismatch");

  const int res = renderer.resolution();
  const int horizon = loaded.config.horizon;
  Canvas target = resize_to_canvas(io::read_image(a.image), res);

  // The policy always sees its own neural canvases; the rasterizer replay
  // below only re-renders the decided strokes.
  std::vector<Episode> eps =
      run_episode(loaded.agent.actor_fn(), {target}, horizon, renderer);
  Episode& ep = eps.front();

  std::vector<Canvas> frames(ep.canvases.begin() + 1, ep.canvases.end());
  Canvas final_canvas = ep.canvases.back();
  if (a.use_gt_raster) {
    StrokeRenderFn raster = raster_stroke_fn(renderer.design, res);
    EnvState st{blank_canvas(res), target, 0, horizon};
    for (int t = 0; t < horizon; ++t) {
      st = trans(st, ep.actions[t], raster);
      frames[t] = st.canvas;
    }
    final_canvas = st.canvas;
  }

  std::filesystem::create_directories(a.out);
  nlohmann::json snapshot{{"command", "paint"},
                          {"image", a.image},
                          {"agent", a.agent},
                          {"renderer", a.renderer},
                          {"out", a.out},
                          {"save_steps", a.save_steps},
                          {"use_ground_truth_raster", a.use_gt_raster},
                          {"seed", a.seed},
                          {"horizon", horizon},
                          {"strokes", horizon * loaded.config.k}};
  io::write_text_atomic(a.out + "/config.json", snapshot.dump(2) + "\n");

  write_canvas_png(a.out + "/painting.png", final_canvas);
  if (a.save_steps)
    for (int t = 0; t < horizon; ++t)
      write_canvas_png(a.out + "/" + frame_name(t + 1), frames[t]);

  std::cout << "l2 " << l2_loss(final_canvas, target) << "\nwrote " << a.out
            << "/painting.png" << std::endl;
  return 0;
}

}  // namespace paint::cli
