#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paint/core/rng.hpp"
#include "paint/core/tensor.hpp"
#include "paint/nn/nn.hpp"
#include "paint/stroke/stroke.hpp"

namespace paint {

// Network plan: FC 13 -> 512 -> 1024 -> 2048 (ReLU between), reshaped to an
// 8x16x16 seed grid, then per-resolution upsampling stages of two 3x3
// convolutions followed by x2 sub-pixel upsampling, closing with a squashing
// nonlinearity. Resolution selects the stage count: 32 -> 1, 64 -> 2,
// 128 -> 3 (the default).
struct RendererConfig {
  int resolution = 128;
  int input_dim = StrokeParams::kDim;
  std::vector<int> fc_widths{512, 1024, 2048};
  int seed_channels = 8;
  int seed_hw = 16;
  // Each stage {cin, cmid, cpre}: conv cin->cmid, conv cmid->cpre, then
  // sub-pixel x2 leaving cpre/4 channels. Derived from resolution.
  std::vector<std::array<int, 3>> stages() const;
};

struct RendererNet {
  RendererConfig cfg;
  nn::Linear fc1, fc2, fc3;
  nn::ReLU fr1, fr2, fr3;
  struct Stage {
    nn::Conv2d conva, convb;
    nn::ReLU ra, rb;
    nn::PixelShuffle ps;
    bool relu_after_b = true;
  };
  std::vector<Stage> stages;
  nn::Sigmoid squash;

  void init(const RendererConfig& config, Rng& rng);
  // x [N,13] -> [N,1,res,res], every cell strictly inside (0,1).
  Tensor forward(const Tensor& x);
  // dy [N,1,res,res] -> [N,13]; param_grads=false relays input gradients only
  // (frozen renderer inside the agent update).
  Tensor backward(const Tensor& dy, bool param_grads = true);
  nn::NamedParams params();
};

// A renderer bound to one stroke design. Weights must come from training or
// a checkpoint before render() is usable.
struct NeuralRenderer {
  RendererNet net;
  StrokeDesign design;
  bool ready = false;

  // Batched inference/training path: [N,13] -> [N,1,res,res].
  Tensor render_batch(const Tensor& params13);
  // Single stroke, inference: [res,res] alpha map.
  Tensor render(const StrokeParams& p);
  int resolution() const { return net.cfg.resolution; }
};

void save_renderer(const std::string& path, NeuralRenderer& r);
// Loads and marks ready; throws DataError on a design mismatch when
// `expect_design` is given.
NeuralRenderer load_renderer(const std::string& path,
                             std::optional<StrokeDesign> expect_design = {});
// Stable content hash of the weights (binds agent checkpoints to the renderer
// they were trained against).
std::string renderer_weights_hash(NeuralRenderer& r);

struct RendererTrainConfig {
  StrokeDesign design;
  int resolution = 128;
  int batches = 30000;
  int batch_size = 64;
  int val_every = 500;   // validation cadence, in batches
  int val_size = 1024;   // held-out strokes
  double lr = 3e-4;
  uint64_t seed = 0;
};

struct RendererTrainResult {
  // (batch index, held-out MSE); entry 0 is the pre-training loss at batch 0.
  std::vector<std::pair<int, double>> val_history;
  double final_val_mse = 0.0;
  double final_val_mae = 0.0;  // mean per-pixel absolute error
};

// The oracle is the ground-truth rasterizer by default; injectable for tests.
using RasterOracle =
    std::function<Tensor(const StrokeParams&, const StrokeDesign&, int)>;

// Supervised regression of the renderer against the oracle on freshly
// sampled random strokes. Divergence (held-out loss above the pre-training
// value for 10 consecutive checks) aborts with NumericError.
RendererTrainResult train_renderer(
    NeuralRenderer& renderer, const RendererTrainConfig& config,
    RasterOracle oracle = {},
    const std::function<void(int, double)>& on_validation = {});

// Central-difference check of the 13 input gradients of the scalar probe
// sum(render(p)). Returns per-dimension relative errors.
std::array<double, StrokeParams::kDim> renderer_gradcheck(
    NeuralRenderer& renderer, const StrokeParams& p, double epsilon);

}  // namespace paint
