#include "paint/renderer/renderer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "paint/core/checkpoint.hpp"
#include "paint/core/error.hpp"
#include "paint/kernels/kernels.hpp"

namespace paint {

std::vector<std::array<int, 3>> RendererConfig::stages() const {
  switch (resolution) {
    case 32:
      return {{seed_channels, 32, 4}};
    case 64:
      return {{seed_channels, 32, 64}, {16, 16, 4}};
    case 128:
      return {{seed_channels, 32, 64}, {16, 16, 32}, {8, 8, 4}};
    default:
      throw ContractError("renderer resolution must be 32, 64, or 128, got " +
                          std::to_string(resolution));
  }
}

void RendererNet::init(const RendererConfig& config, Rng& rng) {
  cfg = config;
  PAINT_CHECK(cfg.fc_widths.size() == 3, "renderer expects 3 FC widths");
  PAINT_CHECK(cfg.fc_widths.back() ==
                  cfg.seed_channels * cfg.seed_hw * cfg.seed_hw,
              "last FC width must fill the seed grid");
  fc1.init(cfg.input_dim, cfg.fc_widths[0], rng);
  fc2.init(cfg.fc_widths[0], cfg.fc_widths[1], rng);
  fc3.init(cfg.fc_widths[1], cfg.fc_widths[2], rng);
  auto plan = cfg.stages();
  stages.clear();
  stages.resize(plan.size());
  for (size_t s = 0; s < plan.size(); ++s) {
    auto [cin, cmid, cpre] = plan[s];
    stages[s].conva.init(cin, cmid, 3, 1, 1, rng);
    stages[s].convb.init(cmid, cpre, 3, 1, 1, rng);
    stages[s].relu_after_b = (s + 1 < plan.size());
  }
}

Tensor RendererNet::forward(const Tensor& x) {
  PAINT_CHECK(x.ndim() == 2 && x.dim(1) == cfg.input_dim,
              "renderer input must be [N," + std::to_string(cfg.input_dim) +
                  "], got " + x.shape_str());
  const int N = x.dim(0);
  Tensor h = fr1.forward(fc1.forward(x));
  h = fr2.forward(fc2.forward(h));
  h = fr3.forward(fc3.forward(h));
  h = h.reshape({N, cfg.seed_channels, cfg.seed_hw, cfg.seed_hw});
  for (auto& st : stages) {
    h = st.ra.forward(st.conva.forward(h));
    h = st.convb.forward(h);
    if (st.relu_after_b) h = st.rb.forward(h);
    h = st.ps.forward(h);
  }
  h = squash.forward(h);
  // Keep the output strictly inside (0,1) even when a saturated logit rounds
  // the float sigmoid to exactly 0 or 1.
  const float lo = 1.0e-7f, hi = 1.0f - 6.0e-8f;
  float* p = h.data();
  for (int64_t i = 0; i < h.numel(); ++i)
    p[i] = p[i] < lo ? lo : (p[i] > hi ? hi : p[i]);
  return h;
}

Tensor RendererNet::backward(const Tensor& dy, bool param_grads) {
  Tensor d = squash.backward(dy);
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
    d = it->ps.backward(d);
    if (it->relu_after_b) d = it->rb.backward(d);
    d = it->convb.backward(d, param_grads);
    d = it->ra.backward(d);
    d = it->conva.backward(d, param_grads);
  }
  d = d.reshape({d.dim(0), cfg.fc_widths[2]});
  d = fc3.backward(fr3.backward(d), param_grads);
  d = fc2.backward(fr2.backward(d), param_grads);
  d = fc1.backward(fr1.backward(d), param_grads);
  return d;
}

nn::NamedParams RendererNet::params() {
  nn::NamedParams out;
  fc1.collect("fc1", out);
  fc2.collect("fc2", out);
  fc3.collect("fc3", out);
  for (size_t s = 0; s < stages.size(); ++s) {
    stages[s].conva.collect("stage" + std::to_string(s) + ".conva", out);
    stages[s].convb.collect("stage" + std::to_string(s) + ".convb", out);
  }
  return out;
}

Tensor NeuralRenderer::render_batch(const Tensor& params13) {
  PAINT_CHECK_DATA(ready,
                   "renderer has no trained weights loaded; train or load a "
                   "checkpoint first");
  return net.forward(params13);
}

Tensor NeuralRenderer::render(const StrokeParams& p) {
  Tensor x({1, StrokeParams::kDim});
  std::memcpy(x.data(), p.v.data(), sizeof(float) * StrokeParams::kDim);
  Tensor y = render_batch(x);
  return y.reshape({net.cfg.resolution, net.cfg.resolution}).clone();
}

void save_renderer(const std::string& path, NeuralRenderer& r) {
  Checkpoint ck;
  ck.meta["kind"] = "renderer";
  ck.meta["stroke"] = to_string(r.design.kind);
  ck.meta["opaque"] = r.design.opaque;
  ck.meta["resolution"] = r.net.cfg.resolution;
  for (auto& [name, p] : r.net.params()) ck.put(name, p->value);
  ck.save(path);
}

NeuralRenderer load_renderer(const std::string& path,
                             std::optional<StrokeDesign> expect_design) {
  Checkpoint ck = Checkpoint::load(path);
  PAINT_CHECK_DATA(ck.meta.value("kind", "") == "renderer",
                   "not a renderer checkpoint: " + path);
  NeuralRenderer r;
  r.design.kind = stroke_kind_from_string(ck.meta.at("stroke").get<std::string>());
  r.design.opaque = ck.meta.at("opaque").get<bool>();
  RendererConfig cfg;
  cfg.resolution = ck.meta.at("resolution").get<int>();
  Rng rng(0);
  r.net.init(cfg, rng);
  for (auto& [name, p] : r.net.params()) {
    const Tensor& t = ck.get(name);
    PAINT_CHECK_DATA(t.same_shape(p->value),
                     "checkpoint tensor " + name + " has shape " +
                         t.shape_str() + ", expected " + p->value.shape_str());
    p->value.copy_from(t);
  }
  if (expect_design) {
    PAINT_CHECK_DATA(expect_design->kind == r.design.kind &&
                         expect_design->opaque == r.design.opaque,
                     "renderer checkpoint is for stroke design '" +
                         to_string(r.design.kind) +
                         "', which does not match the requested design '" +
                         to_string(expect_design->kind) + "'");
  }
  r.ready = true;
  return r;
}

std::string renderer_weights_hash(NeuralRenderer& r) {
  // FNV-1a over the raw weight bytes, in parameter-name order.
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t n) {
    const unsigned char* p = (const unsigned char*)data;
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (auto& [name, p] : r.net.params()) {
    mix(name.data(), name.size());
    mix(p->value.data(), sizeof(float) * (size_t)p->value.numel());
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

namespace {

// Mean squared error over a batch; dloss scaled for d(mse)/d(pred).
double mse_and_grad(const Tensor& pred, const Tensor& truth, Tensor* dpred) {
  const int64_t n = pred.numel();
  double se = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = (double)pred[i] - truth[i];
    se += d * d;
  }
  if (dpred) {
    const float s = 2.0f / (float)n;
    for (int64_t i = 0; i < n; ++i)
      (*dpred)[i] = s * (pred[i] - truth[i]);
  }
  return se / (double)n;
}

Tensor stack_params(const std::vector<StrokeParams>& ps) {
  Tensor x({(int)ps.size(), StrokeParams::kDim});
  for (size_t i = 0; i < ps.size(); ++i)
    std::memcpy(x.data() + i * StrokeParams::kDim, ps[i].v.data(),
                sizeof(float) * StrokeParams::kDim);
  return x;
}

}  // namespace

RendererTrainResult train_renderer(
    NeuralRenderer& renderer, const RendererTrainConfig& config,
    RasterOracle oracle, const std::function<void(int, double)>& on_validation) {
  PAINT_CHECK(config.batches >= 0, "batches must be >= 0");
  PAINT_CHECK(config.batch_size >= 1 && config.val_size >= 1 &&
                  config.val_every >= 1,
              "batch_size, val_size, val_every must be >= 1");
  if (!oracle)
    oracle = [](const StrokeParams& p, const StrokeDesign& d, int res) {
      return rasterize(p, d, res);
    };

  renderer.design = config.design;
  Rng root(config.seed);
  Rng init_rng = root.child(1);
  Rng val_rng = root.child(2);
  Rng train_rng = root.child(3);

  RendererConfig net_cfg;
  net_cfg.resolution = config.resolution;
  renderer.net.init(net_cfg, init_rng);
  renderer.ready = true;  // weights are defined from here on

  const int res = config.resolution;
  const int64_t px = (int64_t)res * res;

  // Fixed held-out set, rasterized once.
  std::vector<StrokeParams> val_strokes(config.val_size);
  for (auto& s : val_strokes) s = sample_random_stroke(val_rng);
  Tensor val_x = stack_params(val_strokes);
  Tensor val_y({config.val_size, 1, res, res});
  for (int i = 0; i < config.val_size; ++i) {
    Tensor t = oracle(val_strokes[i], config.design, res);
    std::memcpy(val_y.data() + i * px, t.data(), sizeof(float) * px);
  }

  // Validation in slices keeps peak memory flat at large val_size.
  auto validate = [&]() -> double {
    const int slice = 64;
    double se_total = 0.0;
    for (int off = 0; off < config.val_size; off += slice) {
      const int n = std::min(slice, config.val_size - off);
      Tensor xs({n, StrokeParams::kDim});
      std::memcpy(xs.data(), val_x.data() + (int64_t)off * StrokeParams::kDim,
                  sizeof(float) * (size_t)n * StrokeParams::kDim);
      Tensor pred = renderer.net.forward(xs);
      for (int64_t i = 0; i < (int64_t)n * px; ++i) {
        const double d = (double)pred[i] - val_y[(int64_t)off * px + i];
        se_total += d * d;
      }
    }
    return se_total / ((double)config.val_size * px);
  };

  RendererTrainResult result;
  nn::Adam opt;
  opt.lr = config.lr;
  opt.attach(renderer.net.params());

  // Zero batches leaves an initialized renderer and an empty history.
  double initial_val = 0.0;
  if (config.batches > 0) {
    initial_val = validate();
    result.val_history.emplace_back(0, initial_val);
    if (on_validation) on_validation(0, initial_val);
  }

  int bad_checks = 0;
  Tensor batch_y({config.batch_size, 1, res, res});
  for (int b = 1; b <= config.batches; ++b) {
    std::vector<StrokeParams> ss(config.batch_size);
    for (auto& s : ss) s = sample_random_stroke(train_rng);
    Tensor x = stack_params(ss);
    for (int i = 0; i < config.batch_size; ++i) {
      Tensor t = oracle(ss[i], config.design, res);
      std::memcpy(batch_y.data() + i * px, t.data(), sizeof(float) * px);
    }
    Tensor pred = renderer.net.forward(x);
    PAINT_CHECK_NUMERIC(!nn::has_nan(pred),
                        "renderer forward produced NaN at batch " +
                            std::to_string(b));
    Tensor dpred(pred.shape());
    mse_and_grad(pred, batch_y, &dpred);
    opt.zero_grad();
    renderer.net.backward(dpred);
    opt.step();

    if (b % config.val_every == 0 || b == config.batches) {
      const double v = validate();
      result.val_history.emplace_back(b, v);
      if (on_validation) on_validation(b, v);
      bad_checks = v > initial_val ? bad_checks + 1 : 0;
      if (bad_checks >= 10)
        throw NumericError(
            "renderer training diverged: held-out loss " + std::to_string(v) +
            " has stayed above the pre-training value " +
            std::to_string(initial_val) + " for 10 consecutive checks (batch " +
            std::to_string(b) + ")");
    }
  }

  // Final held-out metrics.
  result.final_val_mse =
      result.val_history.empty() ? validate() : result.val_history.back().second;
  double ae = 0.0;
  {
    const int slice = 64;
    for (int off = 0; off < config.val_size; off += slice) {
      const int n = std::min(slice, config.val_size - off);
      Tensor xs({n, StrokeParams::kDim});
      std::memcpy(xs.data(), val_x.data() + (int64_t)off * StrokeParams::kDim,
                  sizeof(float) * (size_t)n * StrokeParams::kDim);
      Tensor pred = renderer.net.forward(xs);
      for (int64_t i = 0; i < (int64_t)n * px; ++i)
        ae += std::fabs((double)pred[i] - val_y[(int64_t)off * px + i]);
    }
    ae /= (double)config.val_size * px;
  }
  result.final_val_mae = ae;
  return result;
}

std::array<double, StrokeParams::kDim> renderer_gradcheck(
    NeuralRenderer& renderer, const StrokeParams& p, double epsilon) {
  PAINT_CHECK(epsilon >= 1e-4 && epsilon <= 1e-2,
              "gradcheck epsilon must lie in [1e-4, 1e-2]");
  // Scalar probe L = sum(render(p)); analytic dL/dp via backward(ones).
  Tensor x({1, StrokeParams::kDim});
  std::memcpy(x.data(), p.v.data(), sizeof(float) * StrokeParams::kDim);
  Tensor out = renderer.render_batch(x);
  Tensor ones = Tensor::full(out.shape(), 1.0f);
  Tensor dx = renderer.net.backward(ones, /*param_grads=*/false);

  auto probe = [&](const Tensor& q) {
    Tensor y = renderer.net.forward(q);
    return kern::reduce_sum(y.data(), y.numel());
  };
  std::array<double, StrokeParams::kDim> rel{};
  for (int i = 0; i < StrokeParams::kDim; ++i) {
    Tensor q = x.clone();
    q[i] = (float)(x[i] + epsilon);
    const double hi = probe(q);
    q[i] = (float)(x[i] - epsilon);
    const double lo = probe(q);
    const double fd = (hi - lo) / (2.0 * epsilon);
    const double an = dx[i];
    rel[i] = std::fabs(an - fd) / std::max(1e-4, std::fabs(an) + std::fabs(fd));
  }
  return rel;
}

}  // namespace paint
