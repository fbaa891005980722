#pragma once

#include <functional>
#include <vector>

#include "paint/canvas/canvas.hpp"
#include "paint/renderer/renderer.hpp"
#include "paint/stroke/stroke.hpp"

namespace paint {

// Painting MDP state s_t = (C_t, I, t) with a fixed horizon n.
struct EnvState {
  Canvas canvas;
  Canvas target;
  int step = 0;
  int horizon = 1;
};

// k strokes of 13 parameters flattened to a rank-1 tensor of length 13k,
// every component in [0,1].
using ActionBundle = Tensor;

// Number of strokes in a bundle; rejects lengths not divisible by 13.
int bundle_size(const ActionBundle& a);
// Stroke i of the bundle.
StrokeParams bundle_stroke(const ActionBundle& a, int i);

// Observation planes, fixed order: canvas (3), target (3), then one constant
// plane holding step/horizon. Output [7,res,res], all values in [0,1].
constexpr int kObsChannels = 7;
Tensor encode_state(const EnvState& state);
// Same planes written into row n of a preallocated [N,7,res,res] batch.
void encode_state_into(const EnvState& state, Tensor& batch, int n);

// Renders one stroke's alpha map at the canvas resolution; both the neural
// renderer and the ground-truth rasterizer fit this shape.
using StrokeRenderFn = std::function<Tensor(const StrokeParams&)>;
StrokeRenderFn neural_stroke_fn(NeuralRenderer& renderer);
StrokeRenderFn raster_stroke_fn(StrokeDesign design, int resolution);

// One environment step: the k strokes are rendered and composited in order,
// the step counter advances, the target is untouched. A finished episode
// (step >= horizon) is rejected.
EnvState trans(const EnvState& state, const ActionBundle& bundle,
               const StrokeRenderFn& render_stroke);
EnvState trans(const EnvState& state, const ActionBundle& bundle,
               NeuralRenderer& renderer);

using LossFn = std::function<double(const Canvas&, const Canvas&)>;

// r = L(C_t, I) - L(C_{t+1}, I); consecutive states over a shared target.
double reward(const EnvState& prev, const EnvState& next, const LossFn& loss);

// Batched policy: observation batch [N,7,res,res] -> actions [N,13k].
using ActorFn = std::function<Tensor(const Tensor& obs)>;
// In-place action perturbation (exploration); applied after the actor.
using NoiseFn = std::function<void(Tensor& actions, int step)>;

struct Episode {
  Canvas target;
  std::vector<ActionBundle> actions;  // one per step
  std::vector<Canvas> canvases;       // c_0 .. c_n (horizon+1 entries)
  std::vector<double> rewards;        // per step, when a loss_fn was given
  int horizon = 0;

  EnvState state(int t) const;  // s_t = (c_t, target, t)
};

// Rolls each target forward n steps under the actor. Renderer calls are
// batched across targets within a step; trajectories per target match the
// single-target path up to BLAS batch rounding.
std::vector<Episode> run_episode(const ActorFn& actor,
                                 const std::vector<Canvas>& targets,
                                 int horizon, NeuralRenderer& renderer,
                                 const LossFn& loss = {},
                                 const NoiseFn& noise = {});

}  // namespace paint
