#include "paint/env/env.hpp"

#include <cstring>

#include "paint/core/error.hpp"

namespace paint {

namespace {

void check_state(const EnvState& s) {
  PAINT_CHECK(is_canvas(s.canvas) && is_canvas(s.target),
              "state canvases must be [3,res,res]");
  PAINT_CHECK(s.canvas.same_shape(s.target),
              "canvas and target must share shape");
  PAINT_CHECK(s.horizon >= 1, "horizon must be >= 1");
  PAINT_CHECK(s.step >= 0 && s.step <= s.horizon,
              "step must lie in [0, horizon]");
}

}  // namespace

int bundle_size(const ActionBundle& a) {
  PAINT_CHECK(a.ndim() == 1 && a.numel() % StrokeParams::kDim == 0 &&
                  a.numel() > 0,
              "action bundle must be a rank-1 multiple of 13 values");
  return (int)(a.numel() / StrokeParams::kDim);
}

StrokeParams bundle_stroke(const ActionBundle& a, int i) {
  const int k = bundle_size(a);
  PAINT_CHECK(i >= 0 && i < k, "stroke index out of range");
  StrokeParams p;
  std::memcpy(p.v.data(), a.data() + (int64_t)i * StrokeParams::kDim,
              sizeof(float) * StrokeParams::kDim);
  return p;
}

Tensor encode_state(const EnvState& state) {
  check_state(state);
  const int res = canvas_res(state.canvas);
  Tensor obs({kObsChannels, res, res});
  const int64_t plane = (int64_t)res * res;
  std::memcpy(obs.data(), state.canvas.data(), sizeof(float) * 3 * plane);
  std::memcpy(obs.data() + 3 * plane, state.target.data(),
              sizeof(float) * 3 * plane);
  const float frac = (float)state.step / (float)state.horizon;
  float* sp = obs.data() + 6 * plane;
  for (int64_t i = 0; i < plane; ++i) sp[i] = frac;
  return obs;
}

void encode_state_into(const EnvState& state, Tensor& batch, int n) {
  PAINT_CHECK(batch.ndim() == 4 && batch.dim(1) == kObsChannels,
              "batch must be [N,7,res,res]");
  Tensor obs = encode_state(state);
  PAINT_CHECK(batch.dim(2) == obs.dim(1) && batch.dim(3) == obs.dim(2),
              "batch resolution mismatch");
  PAINT_CHECK(n >= 0 && n < batch.dim(0), "row out of range");
  std::memcpy(batch.data() + (int64_t)n * obs.numel(), obs.data(),
              sizeof(float) * obs.numel());
}

StrokeRenderFn neural_stroke_fn(NeuralRenderer& renderer) {
  return [&renderer](const StrokeParams& p) { return renderer.render(p); };
}

StrokeRenderFn raster_stroke_fn(StrokeDesign design, int resolution) {
  return [design, resolution](const StrokeParams& p) {
    return rasterize(p, design, resolution);
  };
}

EnvState trans(const EnvState& state, const ActionBundle& bundle,
               const StrokeRenderFn& render_stroke) {
  check_state(state);
  PAINT_CHECK(state.step < state.horizon,
              "episode is over (step " + std::to_string(state.step) +
                  " of " + std::to_string(state.horizon) + ")");
  const int k = bundle_size(bundle);
  for (int64_t i = 0; i < bundle.numel(); ++i)
    PAINT_CHECK(bundle[i] >= 0.0f && bundle[i] <= 1.0f,
                "action components must lie in [0,1]");
  const int res = canvas_res(state.canvas);
  EnvState next;
  next.target = state.target;
  next.step = state.step + 1;
  next.horizon = state.horizon;
  next.canvas = state.canvas;
  for (int i = 0; i < k; ++i) {
    const StrokeParams p = bundle_stroke(bundle, i);
    Tensor alpha = render_stroke(p);
    PAINT_CHECK(alpha.numel() == (int64_t)res * res,
                "stroke renderer resolution does not match the canvas");
    next.canvas =
        composite(next.canvas, alpha, {p.red(), p.green(), p.blue()});
  }
  return next;
}

EnvState trans(const EnvState& state, const ActionBundle& bundle,
               NeuralRenderer& renderer) {
  PAINT_CHECK(renderer.resolution() == canvas_res(state.canvas),
              "renderer resolution does not match the canvas");
  return trans(state, bundle, neural_stroke_fn(renderer));
}

double reward(const EnvState& prev, const EnvState& next, const LossFn& loss) {
  check_state(prev);
  check_state(next);
  PAINT_CHECK(next.step == prev.step + 1,
              "reward needs consecutive states (got steps " +
                  std::to_string(prev.step) + " and " +
                  std::to_string(next.step) + ")");
  PAINT_CHECK(prev.target.same_shape(next.target),
              "states disagree on the target shape");
  const int64_t n = prev.target.numel();
  PAINT_CHECK(std::memcmp(prev.target.data(), next.target.data(),
                          sizeof(float) * n) == 0,
              "states disagree on the target image");
  return loss(prev.canvas, prev.target) - loss(next.canvas, next.target);
}

EnvState Episode::state(int t) const {
  PAINT_CHECK(t >= 0 && t <= horizon, "step out of range");
  EnvState s;
  s.canvas = canvases[(size_t)t];
  s.target = target;
  s.step = t;
  s.horizon = horizon;
  return s;
}

std::vector<Episode> run_episode(const ActorFn& actor,
                                 const std::vector<Canvas>& targets,
                                 int horizon, NeuralRenderer& renderer,
                                 const LossFn& loss, const NoiseFn& noise) {
  PAINT_CHECK(!targets.empty(), "need at least one target");
  PAINT_CHECK(horizon >= 1, "horizon must be >= 1");
  const int N = (int)targets.size();
  const int res = renderer.resolution();
  for (const Canvas& t : targets)
    PAINT_CHECK(is_canvas(t) && canvas_res(t) == res,
                "target resolution does not match the renderer");

  std::vector<Episode> eps(N);
  for (int i = 0; i < N; ++i) {
    eps[i].target = targets[i];
    eps[i].horizon = horizon;
    eps[i].canvases.push_back(blank_canvas(res));
  }

  const int64_t plane = (int64_t)res * res;
  Tensor obs({N, kObsChannels, res, res});
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < N; ++i)
      encode_state_into(eps[i].state(t), obs, i);
    Tensor actions = actor(obs);
    PAINT_CHECK(actions.ndim() == 2 && actions.dim(0) == N &&
                    actions.dim(1) % StrokeParams::kDim == 0,
                "actor must return [N,13k] actions, got " +
                    actions.shape_str());
    if (noise) noise(actions, t);
    const int k = actions.dim(1) / StrokeParams::kDim;

    // All N*k strokes of this step go through the renderer in one batch.
    Tensor flat = actions.reshape({N * k, StrokeParams::kDim});
    Tensor alphas = renderer.render_batch(flat);
    for (int i = 0; i < N; ++i) {
      Canvas c = eps[i].canvases.back();
      ActionBundle a = Tensor({k * StrokeParams::kDim});
      std::memcpy(a.data(), actions.data() + (int64_t)i * a.numel(),
                  sizeof(float) * a.numel());
      for (int j = 0; j < k; ++j) {
        const StrokeParams p = bundle_stroke(a, j);
        Tensor alpha =
            Tensor({res, res});
        std::memcpy(alpha.data(),
                    alphas.data() + ((int64_t)i * k + j) * plane,
                    sizeof(float) * plane);
        c = composite(c, alpha, {p.red(), p.green(), p.blue()});
      }
      if (loss)
        eps[i].rewards.push_back(loss(eps[i].canvases.back(), eps[i].target) -
                                 loss(c, eps[i].target));
      eps[i].actions.push_back(a);
      eps[i].canvases.push_back(c);
    }
  }
  return eps;
}

}  // namespace paint
