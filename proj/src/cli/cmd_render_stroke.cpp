#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "paint/cli/commands.hpp"
#include "paint/core/error.hpp"
#include "paint/core/io.hpp"
#include "paint/renderer/renderer.hpp"
#include "paint/stroke/stroke.hpp"

namespace paint::cli {

namespace {

StrokeParams parse_params(const std::string& text) {
  StrokeParams p;
  std::stringstream ss(text);
  std::string item;
  int n = 0;
  while (std::getline(ss, item, ',')) {
    if (n >= StrokeParams::kDim)
      throw UsageError("--params needs exactly 13 values, got more");
    try {
      size_t used = 0;
      p.v[n] = std::stof(item, &used);
      while (used < item.size() && std::isspace((unsigned char)item[used]))
        ++used;
      if (used != item.size())
        throw UsageError("--params value '" + item + "' is not a number");
    } catch (const std::logic_error&) {
      throw UsageError("--params value '" + item + "' is not a number");
    }
    ++n;
  }
  if (n != StrokeParams::kDim)
    throw UsageError("--params needs exactly 13 values, got " +
                     std::to_string(n));
  if (!p.valid())
    throw UsageError("--params values must lie in [0,1]");
  return p;
}

}  // namespace

int cmd_render_stroke(const RenderStrokeArgs& a) {
  StrokeParams p = parse_params(a.params);
  StrokeDesign design{stroke_kind_from_string(a.stroke), a.opaque};

  std::filesystem::create_directories(a.out);
  int res = a.resolution;

  // Optional neural rendering; the rasterizer output always ships.
  if (!a.renderer.empty()) {
    NeuralRenderer nr = load_renderer(a.renderer, design);
    res = nr.resolution();
    Tensor neural = nr.render(p);
    io::write_png(a.out + "/stroke_neural.png", neural.data(), 1, res, res);
  }
  Tensor alpha = rasterize(p, design, res);
  io::write_png(a.out + "/stroke_raster.png", alpha.data(), 1, res, res);

  nlohmann::json snap{{"command", "render-stroke"}, {"params", a.params},
                      {"stroke", a.stroke},         {"opaque", a.opaque},
                      {"renderer", a.renderer},     {"resolution", res},
                      {"out", a.out}};
  io::write_text_atomic(a.out + "/config.json", snap.dump(2) + "\n");

  std::cout << "wrote " << a.out << "/stroke_raster.png"
            << (a.renderer.empty() ? "" : " and stroke_neural.png")
            << std::endl;
  return 0;
}

}  // namespace paint::cli
