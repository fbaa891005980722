#include <doctest.h>

#include <cmath>
#include <cstring>

#include "paint/core/error.hpp"
#include "paint/env/env.hpp"
#include "testutil.hpp"

using namespace paint;

namespace {

// Initialized (untrained) renderer: mechanics tests only need a well-formed
// differentiable stroke-to-alpha map, not a good one.
NeuralRenderer& test_renderer() {
  static NeuralRenderer r = [] {
    NeuralRenderer out;
    RendererTrainConfig cfg;
    cfg.design = {StrokeKind::qbc, false};
    cfg.resolution = 32;
    cfg.batches = 0;
    cfg.val_size = 1;
    train_renderer(out, cfg);
    return out;
  }();
  return r;
}

ActionBundle make_bundle(const std::vector<StrokeParams>& strokes) {
  ActionBundle a({(int)strokes.size() * StrokeParams::kDim});
  for (size_t i = 0; i < strokes.size(); ++i)
    std::memcpy(a.data() + i * StrokeParams::kDim, strokes[i].v.data(),
                sizeof(float) * StrokeParams::kDim);
  return a;
}

Canvas random_canvas(int res, Rng& rng) {
  Canvas c = blank_canvas(res);
  for (int64_t i = 0; i < c.numel(); ++i) c[i] = (float)rng.uniform();
  return c;
}

}  // namespace

TEST_CASE("action bundles: size, extraction, and rejections") {
  Rng rng(1);
  StrokeParams s1 = sample_random_stroke(rng);
  StrokeParams s2 = sample_random_stroke(rng);
  ActionBundle a = make_bundle({s1, s2});
  CHECK(bundle_size(a) == 2);
  CHECK(bundle_stroke(a, 0).v == s1.v);
  CHECK(bundle_stroke(a, 1).v == s2.v);
  CHECK_THROWS_AS(bundle_stroke(a, 2), ContractError);
  CHECK_THROWS_AS(bundle_size(Tensor::zeros({12})), ContractError);
  CHECK_THROWS_AS(bundle_size(Tensor::zeros({2, 13})), ContractError);
}

TEST_CASE("encode_state: plane order, step plane, bit-exact round trip") {
  Rng rng(2);
  EnvState s;
  s.canvas = random_canvas(32, rng);
  s.target = random_canvas(32, rng);
  s.step = 0;
  s.horizon = 4;

  Tensor obs = encode_state(s);
  REQUIRE(obs.shape() == std::vector<int>({7, 32, 32}));
  const int64_t plane = 32 * 32;
  // Canvas and target planes round-trip bit-exactly.
  CHECK(std::memcmp(obs.data(), s.canvas.data(), sizeof(float) * 3 * plane) ==
        0);
  CHECK(std::memcmp(obs.data() + 3 * plane, s.target.data(),
                    sizeof(float) * 3 * plane) == 0);
  // step=0 -> all zeros.
  for (int64_t i = 0; i < plane; ++i) CHECK(obs[6 * plane + i] == 0.0f);

  s.step = 4;  // == horizon -> all ones
  Tensor obs2 = encode_state(s);
  for (int64_t i = 0; i < plane; ++i) CHECK(obs2[6 * plane + i] == 1.0f);

  s.step = 1;
  Tensor obs3 = encode_state(s);
  for (int64_t i = 0; i < plane; ++i) CHECK(obs3[6 * plane + i] == 0.25f);

  // Batch variant writes the same planes into a row.
  Tensor batch({3, 7, 32, 32});
  encode_state_into(s, batch, 2);
  CHECK(std::memcmp(batch.data() + 2 * obs3.numel(), obs3.data(),
                    sizeof(float) * obs3.numel()) == 0);

  s.step = 5;  // > horizon
  CHECK_THROWS_AS(encode_state(s), ContractError);
}

TEST_CASE("trans: transparent strokes leave the canvas, step advances") {
  Rng rng(3);
  EnvState s;
  s.canvas = random_canvas(64, rng);
  s.target = random_canvas(64, rng);
  s.step = 0;
  s.horizon = 3;

  std::vector<StrokeParams> strokes;
  for (int i = 0; i < 5; ++i) {
    StrokeParams p = sample_random_stroke(rng);
    p.v[7] = 0.0f;  // t0
    p.v[9] = 0.0f;  // t1
    strokes.push_back(p);
  }
  auto gt = raster_stroke_fn({StrokeKind::qbc, false}, 64);
  EnvState next = trans(s, make_bundle(strokes), gt);
  CHECK(next.step == 1);
  CHECK(next.horizon == 3);
  CHECK(testutil::max_abs_diff(next.canvas, s.canvas) == 0.0f);
  CHECK(testutil::max_abs_diff(next.target, s.target) == 0.0f);
}

TEST_CASE("trans: sequential compositing, later strokes overwrite") {
  EnvState s;
  s.canvas = blank_canvas(64);
  s.target = blank_canvas(64);
  s.horizon = 1;

  // Two overlapping opaque discs centered at the same point: red then green.
  StrokeParams red, green;
  red.v.fill(0.5f);
  red.v[10] = 1.0f;
  red.v[11] = 0.0f;
  red.v[12] = 0.0f;
  green = red;
  green.v[10] = 0.0f;
  green.v[11] = 1.0f;

  auto gt = raster_stroke_fn({StrokeKind::circle, true}, 64);
  EnvState next = trans(s, make_bundle({red, green}), gt);
  // Center pixel is fully covered by both discs; the LAST stroke wins.
  const int c = 32;  // center of 0.5*(64-1) ~ 31.5 -> sample at 32,32 region
  const int64_t plane = 64 * 64;
  const int64_t px = (int64_t)31 * 64 + 31;
  CHECK(next.canvas[0 * plane + px] == 0.0f);  // red channel
  CHECK(next.canvas[1 * plane + px] == 1.0f);  // green channel
  (void)c;
}

TEST_CASE("trans: bundle equals folding single-stroke composites (oracle)") {
  Rng rng(4);
  EnvState s;
  s.canvas = random_canvas(32, rng);
  s.target = random_canvas(32, rng);
  s.horizon = 2;

  std::vector<StrokeParams> strokes;
  for (int i = 0; i < 5; ++i) strokes.push_back(sample_random_stroke(rng));

  NeuralRenderer& r = test_renderer();
  EnvState next = trans(s, make_bundle(strokes), r);

  Canvas manual = s.canvas;
  for (const StrokeParams& p : strokes) {
    Tensor alpha = r.render(p);
    manual = composite(manual, alpha, {p.red(), p.green(), p.blue()});
  }
  CHECK(testutil::max_abs_diff(next.canvas, manual) == 0.0f);
}

TEST_CASE("trans: contract violations are rejected") {
  Rng rng(5);
  EnvState s;
  s.canvas = random_canvas(32, rng);
  s.target = random_canvas(32, rng);
  s.horizon = 1;
  s.step = 1;  // episode over
  ActionBundle a = make_bundle({sample_random_stroke(rng)});
  NeuralRenderer& r = test_renderer();
  CHECK_THROWS_AS(trans(s, a, r), ContractError);

  s.step = 0;
  ActionBundle bad = a.clone();
  bad[3] = 1.5f;
  CHECK_THROWS_AS(trans(s, bad, r), ContractError);

  EnvState wrong_res;
  wrong_res.canvas = random_canvas(64, rng);
  wrong_res.target = random_canvas(64, rng);
  wrong_res.horizon = 1;
  CHECK_THROWS_AS(trans(wrong_res, a, r), ContractError);
}

TEST_CASE("reward: loss difference with guarded preconditions") {
  Rng rng(6);
  EnvState s0;
  s0.canvas = blank_canvas(16);
  s0.target = random_canvas(16, rng);
  s0.horizon = 2;
  EnvState s1 = s0;
  s1.step = 1;
  s1.canvas = random_canvas(16, rng);

  // Scripted loss: 0.5 for the first canvas, 0.3 for the second.
  auto scripted = [&](const Canvas& c, const Canvas&) {
    return testutil::max_abs_diff(c, s0.canvas) == 0.0f ? 0.5 : 0.3;
  };
  CHECK(reward(s0, s1, scripted) == doctest::Approx(0.2));

  // No-op transition -> 0 for any loss.
  EnvState s1_noop = s0;
  s1_noop.step = 1;
  CHECK(reward(s0, s1_noop, l2_loss) == 0.0);

  // Worsening canvas -> negative l2 reward (start from the target itself).
  EnvState at_target = s0;
  at_target.canvas = s0.target;
  EnvState worse = s1;
  CHECK(reward(at_target, worse, l2_loss) < 0.0);

  // Mismatched targets rejected.
  EnvState other = s1;
  other.target = random_canvas(16, rng);
  CHECK_THROWS_AS(reward(s0, other, l2_loss), ContractError);

  // Non-consecutive steps rejected.
  EnvState s2 = s1;
  s2.step = 2;
  CHECK_THROWS_AS(reward(s0, s2, l2_loss), ContractError);
}

TEST_CASE("run_episode: shape of the trajectory and stroke count") {
  Rng rng(7);
  NeuralRenderer& r = test_renderer();
  std::vector<Canvas> targets{random_canvas(32, rng), random_canvas(32, rng)};

  // Constant actor: 5 strokes per step.
  Tensor fixed({2, 5 * StrokeParams::kDim});
  for (int64_t i = 0; i < fixed.numel(); ++i) fixed[i] = (float)rng.uniform();
  ActorFn actor = [&](const Tensor& obs) {
    CHECK(obs.shape() == std::vector<int>({2, 7, 32, 32}));
    return fixed;
  };

  const int horizon = 40;
  auto eps = run_episode(actor, targets, horizon, r);
  REQUIRE(eps.size() == 2);
  for (const Episode& e : eps) {
    CHECK(e.horizon == horizon);
    CHECK((int)e.actions.size() == horizon);
    CHECK((int)e.canvases.size() == horizon + 1);
    int strokes = 0;
    for (const ActionBundle& a : e.actions) strokes += bundle_size(a);
    CHECK(strokes == 200);  // 40 steps x 5 strokes
    // c_0 blank, target preserved.
    CHECK(testutil::max_abs_diff(e.canvases[0], blank_canvas(32)) == 0.0f);
  }
  CHECK(testutil::max_abs_diff(eps[0].target, targets[0]) == 0.0f);
}

TEST_CASE("run_episode: telescoping reward identity for any loss") {
  Rng rng(8);
  NeuralRenderer& r = test_renderer();

  // A deliberately non-l2 loss.
  LossFn l1 = [](const Canvas& a, const Canvas& b) {
    double s = 0;
    for (int64_t i = 0; i < a.numel(); ++i) s += std::fabs(a[i] - b[i]);
    return s / (double)a.numel();
  };

  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Canvas> targets{random_canvas(32, rng)};
    Rng actor_rng(100 + trial);
    ActorFn actor = [&](const Tensor& obs) {
      Tensor a({obs.dim(0), 2 * StrokeParams::kDim});
      for (int64_t i = 0; i < a.numel(); ++i)
        a[i] = (float)actor_rng.uniform();
      return a;
    };
    const LossFn& loss = trial % 2 == 0 ? LossFn(l2_loss) : l1;
    auto eps = run_episode(actor, targets, 3, r, loss);
    const Episode& e = eps[0];
    REQUIRE(e.rewards.size() == 3);
    double total = 0;
    for (double rw : e.rewards) total += rw;
    const double direct = loss(e.canvases[0], e.target) -
                          loss(e.canvases.back(), e.target);
    CHECK(std::fabs(total - direct) < 1e-5);
  }
}

TEST_CASE("run_episode: deterministic and batch-independent") {
  Rng rng(9);
  NeuralRenderer& r = test_renderer();
  std::vector<Canvas> targets{random_canvas(32, rng), random_canvas(32, rng),
                              random_canvas(32, rng)};

  // Actor depends only on the observation (deterministic), with enough
  // nonlinearity to differ per target: mean of each observation row.
  ActorFn actor = [&](const Tensor& obs) {
    const int N = obs.dim(0);
    Tensor a({N, StrokeParams::kDim});
    const int64_t row = obs.numel() / N;
    for (int n = 0; n < N; ++n) {
      double m = 0;
      for (int64_t i = 0; i < row; ++i) m += obs[n * row + i];
      m /= (double)row;
      for (int i = 0; i < StrokeParams::kDim; ++i)
        a.at(n, i) = (float)((0.3 + 0.5 * m + 0.04 * i) / 1.5);
    }
    return a;
  };

  auto run1 = run_episode(actor, targets, 2, r);
  auto run2 = run_episode(actor, targets, 2, r);
  for (int i = 0; i < 3; ++i)
    CHECK(testutil::max_abs_diff(run1[i].canvases.back(),
                                 run2[i].canvases.back()) == 0.0f);

  // Painting each target alone agrees with the batched run up to BLAS batch
  // rounding.
  for (int i = 0; i < 3; ++i) {
    auto solo = run_episode(actor, {targets[i]}, 2, r);
    CHECK(testutil::max_abs_diff(solo[0].canvases.back(),
                                 run1[i].canvases.back()) < 1e-5f);
  }

  // Renderer/target resolution mismatch rejected.
  std::vector<Canvas> wrong{random_canvas(64, rng)};
  CHECK_THROWS_AS(run_episode(actor, wrong, 2, r), ContractError);
}
