#include "paint/agent/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "paint/core/checkpoint.hpp"
#include "paint/core/error.hpp"
#include "paint/kernels/kernels.hpp"

namespace paint {

// ---------------------------------------------------------------------------
// Residual blocks.
// ---------------------------------------------------------------------------

void BNBlock::init(int cin, int cout, int stride, Rng& rng) {
  conv1.init(cin, cout, 3, stride, 1, rng, /*bias=*/false);
  bn1.init(cout);
  conv2.init(cout, cout, 3, 1, 1, rng, /*bias=*/false);
  bn2.init(cout);
  has_proj = (cin != cout) || (stride != 1);
  if (has_proj) {
    proj.init(cin, cout, 1, stride, 0, rng, /*bias=*/false);
    proj_bn.init(cout);
  }
}

void BNBlock::set_train(bool train) {
  bn1.train_mode = train;
  bn2.train_mode = train;
  if (has_proj) proj_bn.train_mode = train;
}

Tensor BNBlock::forward(const Tensor& x) {
  Tensor h = relu1.forward(bn1.forward(conv1.forward(x)));
  h = bn2.forward(conv2.forward(h));
  Tensor s = has_proj ? proj_bn.forward(proj.forward(x)) : x;
  Tensor y(h.shape());
  kern::add(h.data(), s.data(), y.data(), y.numel());
  return relu2.forward(y);
}

Tensor BNBlock::backward(const Tensor& dy, bool param_grads) {
  Tensor d = relu2.backward(dy);
  Tensor dx = conv1.backward(
      bn1.backward(relu1.backward(conv2.backward(bn2.backward(d, param_grads),
                                                 param_grads)),
                   param_grads),
      param_grads);
  Tensor ds =
      has_proj ? proj.backward(proj_bn.backward(d, param_grads), param_grads)
               : d;
  kern::axpy(1.0f, ds.data(), dx.data(), dx.numel());
  return dx;
}

void BNBlock::collect(const std::string& prefix, nn::NamedParams& out) {
  conv1.collect(prefix + ".conv1", out);
  bn1.collect(prefix + ".bn1", out);
  conv2.collect(prefix + ".conv2", out);
  bn2.collect(prefix + ".bn2", out);
  if (has_proj) {
    proj.collect(prefix + ".proj", out);
    proj_bn.collect(prefix + ".proj_bn", out);
  }
}

void BNBlock::collect_buffers(const std::string& prefix,
                              nn::NamedBuffers& out) {
  bn1.collect_buffers(prefix + ".bn1", out);
  bn2.collect_buffers(prefix + ".bn2", out);
  if (has_proj) proj_bn.collect_buffers(prefix + ".proj_bn", out);
}

void WNBlock::init(int cin, int cout, int stride, Rng& rng) {
  conv1.init(cin, cout, 3, stride, 1, rng);
  act1.init();
  conv2.init(cout, cout, 3, 1, 1, rng);
  act2.init();
  has_proj = (cin != cout) || (stride != 1);
  if (has_proj) proj.init(cin, cout, 1, stride, 0, rng);
}

Tensor WNBlock::forward(const Tensor& x) {
  Tensor h = conv2.forward(act1.forward(conv1.forward(x)));
  Tensor s = has_proj ? proj.forward(x) : x;
  Tensor y(h.shape());
  kern::add(h.data(), s.data(), y.data(), y.numel());
  return act2.forward(y);
}

Tensor WNBlock::backward(const Tensor& dy, bool param_grads) {
  Tensor d = act2.backward(dy, param_grads);
  Tensor dx = conv1.backward(
      act1.backward(conv2.backward(d, param_grads), param_grads), param_grads);
  Tensor ds = has_proj ? proj.backward(d, param_grads) : d;
  kern::axpy(1.0f, ds.data(), dx.data(), dx.numel());
  return dx;
}

void WNBlock::collect(const std::string& prefix, nn::NamedParams& out) {
  conv1.collect(prefix + ".conv1", out);
  act1.collect(prefix + ".act1", out);
  conv2.collect(prefix + ".conv2", out);
  act2.collect(prefix + ".act2", out);
  if (has_proj) proj.collect(prefix + ".proj", out);
}

// ---------------------------------------------------------------------------
// Actor / critic trunks. Stage widths 64/128/256/512 with strides 1/2/2/2,
// two blocks per stage, on top of a stride-2 coordinate-augmented stem.
// ---------------------------------------------------------------------------

namespace {
constexpr int kStageWidth[4] = {64, 128, 256, 512};
constexpr int kStageStride[4] = {1, 2, 2, 2};
// Sigmoid saturates to exactly 0/1 in float; keep actions strictly inside.
constexpr float kLo = 1e-7f, kHi = 1.0f - 6e-8f;
}  // namespace

void ActorNet::init(int k_, Rng& rng) {
  PAINT_CHECK(k_ >= 1, "actor needs at least one stroke per bundle");
  k = k_;
  stem.init(kObsChannels + 2, 64, 3, 2, 1, rng, /*bias=*/false);
  stem_bn.init(64);
  int cin = 64;
  for (int s = 0; s < 4; ++s)
    for (int j = 0; j < 2; ++j) {
      blocks[s * 2 + j].init(cin, kStageWidth[s], j == 0 ? kStageStride[s] : 1,
                             rng);
      cin = kStageWidth[s];
    }
  fc.init(512, 13 * k, rng);
}

void ActorNet::set_train(bool train) {
  stem_bn.train_mode = train;
  for (auto& b : blocks) b.set_train(train);
}

Tensor ActorNet::forward(const Tensor& obs) {
  PAINT_CHECK(obs.ndim() == 4 && obs.dim(1) == kObsChannels,
              "actor input must be [N,7,res,res], got " + obs.shape_str());
  Tensor h = stem_relu.forward(
      stem_bn.forward(stem.forward(nn::append_coord_planes(obs))));
  for (auto& b : blocks) h = b.forward(h);
  Tensor y = sig.forward(fc.forward(gap.forward(h)));
  for (int64_t i = 0; i < y.numel(); ++i)
    y[i] = std::min(kHi, std::max(kLo, y[i]));
  return y;
}

Tensor ActorNet::backward(const Tensor& dy, bool param_grads) {
  Tensor d = gap.backward(fc.backward(sig.backward(dy), param_grads));
  for (int i = 7; i >= 0; --i) d = blocks[i].backward(d, param_grads);
  d = stem.backward(stem_bn.backward(stem_relu.backward(d), param_grads),
                    param_grads);
  return nn::strip_coord_planes_grad(d);
}

nn::NamedParams ActorNet::params() {
  nn::NamedParams out;
  stem.collect("stem", out);
  stem_bn.collect("stem_bn", out);
  for (int i = 0; i < 8; ++i) blocks[i].collect("b" + std::to_string(i), out);
  fc.collect("fc", out);
  return out;
}

nn::NamedBuffers ActorNet::buffers() {
  nn::NamedBuffers out;
  stem_bn.collect_buffers("stem_bn", out);
  for (int i = 0; i < 8; ++i)
    blocks[i].collect_buffers("b" + std::to_string(i), out);
  return out;
}

void CriticNet::init(Rng& rng) {
  stem.init(kObsChannels + 2, 64, 3, 2, 1, rng);
  stem_act.init();
  int cin = 64;
  for (int s = 0; s < 4; ++s)
    for (int j = 0; j < 2; ++j) {
      blocks[s * 2 + j].init(cin, kStageWidth[s], j == 0 ? kStageStride[s] : 1,
                             rng);
      cin = kStageWidth[s];
    }
  fc.init(512, 1, rng);
}

Tensor CriticNet::forward(const Tensor& obs) {
  PAINT_CHECK(obs.ndim() == 4 && obs.dim(1) == kObsChannels,
              "critic input must be [N,7,res,res], got " + obs.shape_str());
  Tensor h = stem_act.forward(stem.forward(nn::append_coord_planes(obs)));
  for (auto& b : blocks) h = b.forward(h);
  return fc.forward(gap.forward(h));
}

Tensor CriticNet::backward(const Tensor& dy, bool param_grads) {
  Tensor d = gap.backward(fc.backward(dy, param_grads));
  for (int i = 7; i >= 0; --i) d = blocks[i].backward(d, param_grads);
  d = stem.backward(stem_act.backward(d, param_grads), param_grads);
  return nn::strip_coord_planes_grad(d);
}

nn::NamedParams CriticNet::params() {
  nn::NamedParams out;
  stem.collect("stem", out);
  stem_act.collect("stem_act", out);
  for (int i = 0; i < 8; ++i) blocks[i].collect("b" + std::to_string(i), out);
  fc.collect("fc", out);
  return out;
}

// ---------------------------------------------------------------------------
// Replay buffer.
// ---------------------------------------------------------------------------

namespace {
inline uint8_t quantize(float v) {
  const int q = (int)std::lround((double)v * 255.0);
  return (uint8_t)std::min(255, std::max(0, q));
}
}  // namespace

ReplayBuffer::ReplayBuffer(int capacity_episodes) {
  PAINT_CHECK(capacity_episodes >= 1, "replay capacity must be positive");
  capacity_ = capacity_episodes;
}

void ReplayBuffer::add_episode(const Episode& ep) {
  PAINT_CHECK(ep.horizon >= 1 &&
                  ep.canvases.size() == (size_t)ep.horizon + 1 &&
                  ep.actions.size() == (size_t)ep.horizon,
              "episode must hold horizon actions and horizon+1 canvases");
  Stored st;
  st.horizon = ep.horizon;
  st.res = canvas_res(ep.target);
  st.bundle_len = (int)ep.actions[0].numel();
  const int64_t plane = ep.target.numel();
  st.target.resize(plane);
  for (int64_t i = 0; i < plane; ++i) st.target[i] = quantize(ep.target[i]);
  st.canvases.resize(plane * (ep.horizon + 1));
  for (int t = 0; t <= ep.horizon; ++t) {
    const Canvas& c = ep.canvases[t];
    PAINT_CHECK(c.numel() == plane, "episode canvases disagree in shape");
    for (int64_t i = 0; i < plane; ++i)
      st.canvases[t * plane + i] = quantize(c[i]);
  }
  st.actions.resize((int64_t)st.bundle_len * ep.horizon);
  for (int t = 0; t < ep.horizon; ++t) {
    PAINT_CHECK(ep.actions[t].numel() == st.bundle_len,
                "episode bundles disagree in length");
    std::memcpy(st.actions.data() + (int64_t)t * st.bundle_len,
                ep.actions[t].data(), sizeof(float) * st.bundle_len);
  }
  eps_.push_back(std::move(st));
  records_ += ep.horizon;
  while ((int)eps_.size() > capacity_) {
    records_ -= eps_.front().horizon;
    eps_.pop_front();
  }
}

ReplayRecord ReplayBuffer::record(int64_t index) const {
  PAINT_CHECK(index >= 0 && index < records_, "replay index out of range");
  size_t e = 0;
  while (index >= eps_[e].horizon) index -= eps_[e++].horizon;
  const Stored& st = eps_[e];
  const int t = (int)index;
  const int64_t plane = (int64_t)3 * st.res * st.res;
  ReplayRecord r;
  r.step = t;
  r.horizon = st.horizon;
  auto decode = [&](const uint8_t* src) {
    Tensor out({3, st.res, st.res});
    for (int64_t i = 0; i < plane; ++i) out[i] = (float)src[i] / 255.0f;
    return out;
  };
  r.canvas_before = decode(st.canvases.data() + (int64_t)t * plane);
  r.canvas_after = decode(st.canvases.data() + (int64_t)(t + 1) * plane);
  r.target = decode(st.target.data());
  r.bundle = Tensor({st.bundle_len});
  std::memcpy(r.bundle.data(), st.actions.data() + (int64_t)t * st.bundle_len,
              sizeof(float) * st.bundle_len);
  return r;
}

std::vector<ReplayRecord> ReplayBuffer::sample(int n, Rng& rng) const {
  PAINT_CHECK(n >= 1 && (int64_t)n <= records_,
              "cannot sample " + std::to_string(n) + " records from " +
                  std::to_string(records_));
  std::vector<int64_t> idx(records_);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<ReplayRecord> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int64_t j = i + (int64_t)rng.uniform_int(records_ - i);
    std::swap(idx[i], idx[j]);
    out.push_back(record(idx[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free operations.
// ---------------------------------------------------------------------------

ActionBundle add_exploration_noise(const ActionBundle& bundle, double sigma,
                                   Rng& rng) {
  PAINT_CHECK(sigma >= 0.0, "noise sigma must be nonnegative");
  Tensor out = bundle.clone();
  if (sigma == 0.0) return out;
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double v = out[i] + sigma * rng.normal();
    out[i] = (float)std::min(1.0, std::max(0.0, v));
  }
  return out;
}

double critic_target(double r, double v_next, double discount) {
  return r + discount * v_next;
}

// ---------------------------------------------------------------------------
// Agent.
// ---------------------------------------------------------------------------

void Agent::init(const AgentConfig& config, uint64_t seed) {
  PAINT_CHECK(config.k >= 1 && config.horizon >= 1 && config.resolution >= 8,
              "agent config needs k>=1, horizon>=1, resolution>=8");
  cfg = config;
  Rng root(seed);
  Rng ra = root.child(1);
  actor.init(cfg.k, ra);
  Rng rat = root.child(11);
  actor_target.init(cfg.k, rat);
  nn::copy_params(actor_target.params(), actor.params());
  nn::soft_update_buffers(actor_target.buffers(), actor.buffers(), 1.0);
  Rng rc = root.child(2);
  critic.init(rc);
  Rng rct = root.child(12);
  critic_target.init(rct);
  nn::copy_params(critic_target.params(), critic.params());
  reward_nets.init(root.child(3).next_u64());
  actor.set_train(false);
  actor_target.set_train(false);
}

Tensor Agent::act(const Tensor& obs) {
  actor.set_train(false);
  return actor.forward(obs);
}

ActorFn Agent::actor_fn() {
  return [this](const Tensor& obs) { return act(obs); };
}

void Agent::soft_update_targets(double tau) {
  nn::soft_update(actor_target.params(), actor.params(), tau);
  nn::soft_update_buffers(actor_target.buffers(), actor.buffers(), tau);
  nn::soft_update(critic_target.params(), critic.params(), tau);
  reward_nets.soft_update_discriminator(tau);
}

double Agent::discount() const { return std::pow(cfg.gamma, cfg.k); }

// ---------------------------------------------------------------------------
// Trainer.
// ---------------------------------------------------------------------------

AgentTrainer::AgentTrainer(Agent& agent, NeuralRenderer& renderer,
                           const AgentTrainConfig& cfg)
    : agent_(agent),
      renderer_(renderer),
      cfg_(cfg),
      replay_(cfg.replay_capacity),
      rng_noise_(0),
      rng_sample_(0),
      rng_gp_(0),
      rng_data_(0) {
  PAINT_CHECK(cfg_.reward == "wgan" || cfg_.reward == "l2",
              "reward must be wgan or l2, got " + cfg_.reward);
  PAINT_CHECK(cfg_.batch_size >= 1 && cfg_.batches >= 0 && cfg_.horizon >= 1,
              "trainer needs positive batch size and horizon");
  PAINT_CHECK(renderer_.resolution() == cfg_.resolution,
              "renderer resolution " +
                  std::to_string(renderer_.resolution()) +
                  " does not match configured " +
                  std::to_string(cfg_.resolution));
  PAINT_CHECK(agent_.cfg.k == cfg_.k && agent_.cfg.horizon == cfg_.horizon &&
                  agent_.cfg.resolution == cfg_.resolution,
              "agent and trainer configs disagree");
  Rng root(cfg_.seed);
  rng_noise_ = root.child(10);
  rng_sample_ = root.child(11);
  rng_gp_ = root.child(12);
  rng_data_ = root.child(13);
  actor_opt_.lr = cfg_.actor_lr;
  actor_opt_.attach(agent_.actor.params());
  critic_opt_.lr = cfg_.critic_lr;
  critic_opt_.attach(agent_.critic.params());
}

LossFn AgentTrainer::active_loss() {
  if (cfg_.reward == "wgan") {
    GanReward* gr = &agent_.reward_nets;
    return [gr](const Canvas& c, const Canvas& t) { return gr->gan_loss(c, t); };
  }
  return [](const Canvas& c, const Canvas& t) { return l2_loss(c, t); };
}

double AgentTrainer::exploration_sigma(int iter) const {
  const double half = cfg_.batches / 2.0;
  if (half <= 0.0) return 0.0;
  return cfg_.noise_sigma * std::max(0.0, 1.0 - (double)iter / half);
}

int AgentTrainer::next_target_index(int n_targets) {
  if ((int)cursor_order_.size() != n_targets) {
    cursor_order_.resize(n_targets);
    std::iota(cursor_order_.begin(), cursor_order_.end(), 0);
    cursor_ = (size_t)n_targets;  // force a shuffle below
  }
  if (cursor_ >= cursor_order_.size()) {
    for (int i = n_targets - 1; i > 0; --i) {
      const int j = (int)rng_data_.uniform_int(i + 1);
      std::swap(cursor_order_[i], cursor_order_[j]);
    }
    cursor_ = 0;
  }
  return cursor_order_[cursor_++];
}

void AgentTrainer::collect(int iter, const std::vector<Canvas>& train_targets) {
  PAINT_CHECK(!train_targets.empty(), "cannot collect from an empty dataset");
  const double sigma = exploration_sigma(iter);
  NoiseFn noise;
  if (sigma > 0.0)
    noise = [this, sigma](Tensor& actions, int) {
      for (int64_t i = 0; i < actions.numel(); ++i) {
        const double v = actions[i] + sigma * rng_noise_.normal();
        actions[i] = (float)std::min(1.0, std::max(0.0, v));
      }
    };
  const int per_collect = std::max(
      1, (cfg_.batch_size + cfg_.horizon - 1) / cfg_.horizon);
  do {
    std::vector<Canvas> targets;
    targets.reserve(per_collect);
    for (int i = 0; i < per_collect; ++i)
      targets.push_back(train_targets[next_target_index(
          (int)train_targets.size())]);
    for (const Episode& ep :
         run_episode(agent_.actor_fn(), targets, cfg_.horizon, renderer_, {},
                     noise))
      replay_.add_episode(ep);
  } while (replay_.size() < cfg_.batch_size);
}

DiscTrainStats AgentTrainer::update_discriminator(
    const std::vector<ReplayRecord>& batch) {
  PAINT_CHECK(!batch.empty(), "discriminator batch must be nonempty");
  std::vector<Canvas> fakes, ftgts, rtgts;
  fakes.reserve(batch.size());
  for (const ReplayRecord& r : batch) {
    fakes.push_back(r.canvas_after);
    ftgts.push_back(r.target);
    rtgts.push_back(r.target);
  }
  return agent_.reward_nets.train_discriminator(fakes, ftgts, rtgts,
                                                cfg_.gp_coeff, rng_gp_);
}

namespace {

// Observation batch for the state each record reached (canvas_after at
// step+1) or started from (canvas_before at step).
Tensor encode_records(const std::vector<ReplayRecord>& batch, bool after) {
  const int n = (int)batch.size();
  const int res = canvas_res(batch[0].target);
  Tensor obs({n, kObsChannels, res, res});
  for (int i = 0; i < n; ++i) {
    const ReplayRecord& r = batch[i];
    EnvState st{after ? r.canvas_after : r.canvas_before, r.target,
                after ? r.step + 1 : r.step, r.horizon};
    encode_state_into(st, obs, i);
  }
  return obs;
}

}  // namespace

double AgentTrainer::update_critic(const std::vector<ReplayRecord>& batch) {
  PAINT_CHECK((int)batch.size() == cfg_.batch_size,
              "critic batch size must equal the configured batch size");
  const int n = (int)batch.size();
  const double disc = agent_.discount();

  // Rewards under the active reward on the stored transition.
  std::vector<double> rewards(n);
  if (cfg_.reward == "wgan") {
    std::vector<Canvas> before, after, tgt;
    for (const ReplayRecord& r : batch) {
      before.push_back(r.canvas_before);
      after.push_back(r.canvas_after);
      tgt.push_back(r.target);
    }
    Tensor sb = agent_.reward_nets.target_copy.forward(
        GanReward::stack_pairs(before, tgt));
    Tensor sa = agent_.reward_nets.target_copy.forward(
        GanReward::stack_pairs(after, tgt));
    for (int i = 0; i < n; ++i) rewards[i] = (double)sa[i] - (double)sb[i];
  } else {
    for (int i = 0; i < n; ++i)
      rewards[i] = l2_loss(batch[i].canvas_before, batch[i].target) -
                   l2_loss(batch[i].canvas_after, batch[i].target);
  }

  // Bootstrap values for non-terminal records: roll the target actor one
  // step through the renderer from s_{t+1} and score with the target critic.
  std::vector<int> nt;
  for (int i = 0; i < n; ++i)
    if (batch[i].step + 1 < batch[i].horizon) nt.push_back(i);
  std::vector<double> v(n, 0.0);
  if (!nt.empty()) {
    const int res = canvas_res(batch[0].target);
    Tensor obs1({(int)nt.size(), kObsChannels, res, res});
    for (size_t j = 0; j < nt.size(); ++j) {
      const ReplayRecord& r = batch[nt[j]];
      EnvState st{r.canvas_after, r.target, r.step + 1, r.horizon};
      encode_state_into(st, obs1, (int)j);
    }
    agent_.actor_target.set_train(false);
    Tensor a1 = agent_.actor_target.forward(obs1);
    Tensor obs2({(int)nt.size(), kObsChannels, res, res});
    for (size_t j = 0; j < nt.size(); ++j) {
      const ReplayRecord& r = batch[nt[j]];
      EnvState s1{r.canvas_after, r.target, r.step + 1, r.horizon};
      ActionBundle b({(int)a1.dim(1)});
      std::memcpy(b.data(), a1.data() + (int64_t)j * a1.dim(1),
                  sizeof(float) * a1.dim(1));
      EnvState s2 = trans(s1, b, renderer_);
      encode_state_into(s2, obs2, (int)j);
    }
    Tensor vt = agent_.critic_target.forward(obs2);
    for (size_t j = 0; j < nt.size(); ++j) v[nt[j]] = vt[(int64_t)j];
  }

  Tensor obs_next = encode_records(batch, /*after=*/true);
  Tensor pred = agent_.critic.forward(obs_next);
  double loss = 0.0;
  Tensor dpred({n, 1});
  for (int i = 0; i < n; ++i) {
    const double y = critic_target(
        rewards[i], batch[i].step + 1 < batch[i].horizon ? v[i] : 0.0, disc);
    const double e = (double)pred[i] - y;
    loss += e * e;
    dpred[i] = (float)(2.0 * e / n);
  }
  loss /= n;
  PAINT_CHECK_NUMERIC(std::isfinite(loss),
                      "critic loss is not finite; aborting update");
  critic_opt_.zero_grad();
  agent_.critic.backward(dpred);
  critic_opt_.step();
  return loss;
}

ActorEval AgentTrainer::actor_eval(const std::vector<ReplayRecord>& batch,
                                   bool detach_transition,
                                   const Tensor* actions_override) {
  PAINT_CHECK(!batch.empty(), "actor batch must be nonempty");
  const int n = (int)batch.size();
  const int k = cfg_.k;
  const int res = canvas_res(batch[0].target);
  const double disc = agent_.discount();
  const int64_t plane = (int64_t)res * res;

  Tensor actions;
  if (actions_override != nullptr) {
    PAINT_CHECK(actions_override->ndim() == 2 &&
                    actions_override->dim(0) == n &&
                    actions_override->dim(1) == 13 * k,
                "action override must be [N,13k]");
    actions = actions_override->clone();
  } else {
    Tensor obs = encode_records(batch, /*after=*/false);
    actions = agent_.actor.forward(obs);
  }

  // Render all strokes in one batch, then composite per record.
  Tensor params({n * k, 13});
  for (int i = 0; i < n; ++i)
    std::memcpy(params.data() + (int64_t)i * 13 * k,
                actions.data() + (int64_t)i * 13 * k,
                sizeof(float) * 13 * k);
  Tensor alphas = renderer_.render_batch(params);  // [n*k,1,res,res]

  // Row i*(k+1)+s holds canvas c^s of record i; c^0 is the stored start.
  Tensor canv({n * (k + 1), 3, res, res});
  for (int i = 0; i < n; ++i) {
    std::memcpy(canv.data() + ((int64_t)i * (k + 1)) * 3 * plane,
                batch[i].canvas_before.data(), sizeof(float) * 3 * plane);
    for (int s = 0; s < k; ++s) {
      const float* al = alphas.data() + ((int64_t)i * k + s) * plane;
      const float* col = actions.data() + (int64_t)i * 13 * k + s * 13 + 10;
      const float* cin =
          canv.data() + ((int64_t)i * (k + 1) + s) * 3 * plane;
      float* cout = canv.data() + ((int64_t)i * (k + 1) + s + 1) * 3 * plane;
      for (int ch = 0; ch < 3; ++ch)
        for (int64_t p = 0; p < plane; ++p)
          cout[ch * plane + p] = cin[ch * plane + p] * (1.0f - al[p]) +
                                 col[ch] * al[p];
    }
  }

  std::vector<Canvas> finals(n), targets(n), befores(n);
  for (int i = 0; i < n; ++i) {
    Canvas f({3, res, res});
    std::memcpy(f.data(), canv.data() + ((int64_t)i * (k + 1) + k) * 3 * plane,
                sizeof(float) * 3 * plane);
    finals[i] = std::move(f);
    targets[i] = batch[i].target;
    befores[i] = batch[i].canvas_before;
  }

  // Reward term and its gradient with respect to the painted canvas.
  Tensor dfinal = Tensor::zeros({n, 3, res, res});
  double mean_reward = 0.0;
  if (cfg_.reward == "wgan") {
    Tensor sb = agent_.reward_nets.target_copy.forward(
        GanReward::stack_pairs(befores, targets));
    Tensor sa = agent_.reward_nets.target_copy.forward(
        GanReward::stack_pairs(finals, targets));
    for (int i = 0; i < n; ++i)
      mean_reward += ((double)sa[i] - (double)sb[i]) / n;
    if (!detach_transition) {
      Tensor dpairs = agent_.reward_nets.target_copy.backward(
          Tensor::full({n, 1}, 1.0f / (float)n), /*param_grads=*/false);
      for (int i = 0; i < n; ++i)
        kern::axpy(1.0f, dpairs.data() + (int64_t)i * 6 * plane,
                   dfinal.data() + (int64_t)i * 3 * plane, 3 * plane);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      mean_reward +=
          (l2_loss(befores[i], targets[i]) - l2_loss(finals[i], targets[i])) /
          n;
      if (!detach_transition) {
        // d/dc' of -l2(c',I)/n = -2 (c'-I) / (3*res*res*n)
        const float sc = -2.0f / (float)(3.0 * plane * n);
        const float* cf = finals[i].data();
        const float* tg = targets[i].data();
        float* df = dfinal.data() + (int64_t)i * 3 * plane;
        for (int64_t p = 0; p < 3 * plane; ++p)
          df[p] += sc * (cf[p] - tg[p]);
      }
    }
  }

  // Discounted value of the reached state for non-terminal records.
  std::vector<int> nt;
  for (int i = 0; i < n; ++i)
    if (batch[i].step + 1 < batch[i].horizon) nt.push_back(i);
  double value_term = 0.0;
  if (!nt.empty()) {
    Tensor obs2({(int)nt.size(), kObsChannels, res, res});
    for (size_t j = 0; j < nt.size(); ++j) {
      EnvState st{finals[nt[j]], batch[nt[j]].target, batch[nt[j]].step + 1,
                  batch[nt[j]].horizon};
      encode_state_into(st, obs2, (int)j);
    }
    Tensor vt = agent_.critic_target.forward(obs2);
    for (size_t j = 0; j < nt.size(); ++j)
      value_term += disc * (double)vt[(int64_t)j] / n;
    if (!detach_transition) {
      Tensor dv = Tensor::full({(int)nt.size(), 1}, (float)(disc / n));
      Tensor dobs2 = agent_.critic_target.backward(dv, /*param_grads=*/false);
      for (size_t j = 0; j < nt.size(); ++j)
        kern::axpy(1.0f, dobs2.data() + (int64_t)j * kObsChannels * plane,
                   dfinal.data() + (int64_t)nt[j] * 3 * plane, 3 * plane);
    }
  }

  ActorEval ev;
  ev.mean_reward = mean_reward;
  ev.objective = mean_reward + value_term;
  PAINT_CHECK_NUMERIC(std::isfinite(ev.objective),
                      "actor objective is not finite; aborting update");
  ev.dactions = Tensor::zeros({n, 13 * k});
  if (detach_transition) return ev;

  // Composite chain backward: dc^{s+1} -> (dalpha_s, dcolor_s, dc^s).
  Tensor dalphas = Tensor::zeros({n * k, 1, res, res});
  Tensor dc = dfinal;  // gradient w.r.t. c^k, consumed stroke by stroke
  for (int s = k - 1; s >= 0; --s) {
    for (int i = 0; i < n; ++i) {
      const float* al = alphas.data() + ((int64_t)i * k + s) * plane;
      const float* col = actions.data() + (int64_t)i * 13 * k + s * 13 + 10;
      const float* cprev =
          canv.data() + ((int64_t)i * (k + 1) + s) * 3 * plane;
      float* d = dc.data() + (int64_t)i * 3 * plane;
      float* da = dalphas.data() + ((int64_t)i * k + s) * plane;
      double dcol[3] = {0.0, 0.0, 0.0};
      for (int ch = 0; ch < 3; ++ch) {
        const float* dch = d + ch * plane;
        const float* cch = cprev + ch * plane;
        double acc = 0.0;
        for (int64_t p = 0; p < plane; ++p) {
          da[p] += dch[p] * (col[ch] - cch[p]);
          acc += (double)dch[p] * al[p];
        }
        dcol[ch] = acc;
      }
      for (int ch = 0; ch < 3; ++ch)
        ev.dactions[(int64_t)i * 13 * k + s * 13 + 10 + ch] +=
            (float)dcol[ch];
      for (int ch = 0; ch < 3; ++ch) {
        float* dch = d + ch * plane;
        for (int64_t p = 0; p < plane; ++p) dch[p] *= (1.0f - al[p]);
      }
    }
  }

  // Through the stroke model into the 13-parameter actions.
  Tensor dparams = renderer_.net.backward(dalphas, /*param_grads=*/false);
  for (int i = 0; i < n; ++i)
    kern::axpy(1.0f, dparams.data() + (int64_t)i * 13 * k,
               ev.dactions.data() + (int64_t)i * 13 * k, 13 * k);
  PAINT_CHECK_NUMERIC(!nn::has_nan(ev.dactions),
                      "actor gradient is not finite; aborting update");
  return ev;
}

double AgentTrainer::update_actor(const std::vector<ReplayRecord>& batch) {
  PAINT_CHECK((int)batch.size() == cfg_.batch_size,
              "actor batch size must equal the configured batch size");
  agent_.actor.set_train(true);
  Tensor obs = encode_records(batch, /*after=*/false);
  Tensor actions = agent_.actor.forward(obs);
  ActorEval ev = actor_eval(batch, false, &actions);
  // Maximize the objective: descend on its negation.
  Tensor dneg(ev.dactions.shape());
  for (int64_t i = 0; i < dneg.numel(); ++i) dneg[i] = -ev.dactions[i];
  actor_opt_.zero_grad();
  agent_.actor.backward(dneg);
  actor_opt_.step();
  agent_.actor.set_train(false);
  return ev.objective;
}

AgentTrainResult AgentTrainer::train(
    const std::vector<Canvas>& train_targets,
    const std::vector<Canvas>& test_targets,
    const std::function<void(const AgentMetricsRow&)>& on_metrics) {
  PAINT_CHECK(!train_targets.empty(), "training dataset is empty");
  PAINT_CHECK(!test_targets.empty(), "test dataset is empty");
  AgentTrainResult result;

  std::vector<Canvas> test_sub(
      test_targets.begin(),
      test_targets.begin() +
          std::min<size_t>(test_targets.size(), (size_t)cfg_.test_size));
  Canvas blank = blank_canvas(cfg_.resolution);
  for (const Canvas& t : test_sub) result.baseline_l2 += l2_loss(blank, t);
  result.baseline_l2 /= (double)test_sub.size();

  double last_closs = 0.0, last_aobj = 0.0, last_w = 0.0;
  auto emit = [&](int batch_no) {
    LossFn lf = active_loss();
    std::vector<Episode> eps =
        run_episode(agent_.actor_fn(), test_sub, cfg_.horizon, renderer_, lf);
    AgentMetricsRow row;
    row.batch = batch_no;
    for (const Episode& ep : eps) {
      row.test_l2 += l2_loss(ep.canvases.back(), ep.target);
      for (double r : ep.rewards) row.test_reward += r;
    }
    row.test_l2 /= (double)eps.size();
    row.test_reward /= (double)eps.size();
    row.critic_loss = last_closs;
    row.actor_objective = last_aobj;
    row.disc_wasserstein = last_w;
    result.metrics.push_back(row);
    if (on_metrics) on_metrics(row);
  };

  emit(0);
  for (int iter = 0; iter < cfg_.batches; ++iter) {
    if (iter % cfg_.collect_every == 0) collect(iter, train_targets);
    std::vector<ReplayRecord> batch =
        replay_.sample(cfg_.batch_size, rng_sample_);
    if (cfg_.reward == "wgan")
      last_w = update_discriminator(batch).wasserstein;
    last_closs = update_critic(batch);
    last_aobj = update_actor(batch);
    agent_.soft_update_targets(cfg_.tau);
    if ((int64_t)iter + 1 == cfg_.lr_decay_batches) {
      actor_opt_.lr = cfg_.actor_lr_after;
      critic_opt_.lr = cfg_.critic_lr_after;
    }
    if ((iter + 1) % cfg_.metrics_every == 0 || iter + 1 == cfg_.batches)
      emit(iter + 1);
  }
  result.final_test_l2 =
      result.metrics.empty() ? 0.0 : result.metrics.back().test_l2;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpointing.
// ---------------------------------------------------------------------------

namespace {

void put_params(Checkpoint& ck, const std::string& prefix,
                const nn::NamedParams& params) {
  for (const auto& [name, p] : params) ck.put(prefix + "." + name, p->value);
}

void get_params(const Checkpoint& ck, const std::string& prefix,
                const nn::NamedParams& params) {
  for (const auto& [name, p] : params) {
    const Tensor& t = ck.get(prefix + "." + name);
    PAINT_CHECK_DATA(t.same_shape(p->value),
                     "checkpoint tensor " + prefix + "." + name +
                         " has unexpected shape");
    p->value = t.clone();
  }
}

void put_buffers(Checkpoint& ck, const std::string& prefix,
                 const nn::NamedBuffers& bufs) {
  for (const auto& [name, t] : bufs) ck.put(prefix + "." + name, *t);
}

void get_buffers(const Checkpoint& ck, const std::string& prefix,
                 const nn::NamedBuffers& bufs) {
  for (const auto& [name, t] : bufs) {
    const Tensor& s = ck.get(prefix + "." + name);
    PAINT_CHECK_DATA(s.same_shape(*t), "checkpoint buffer " + prefix + "." +
                                           name + " has unexpected shape");
    *t = s.clone();
  }
}

nlohmann::json config_json(const AgentTrainConfig& c) {
  return {{"k", c.k},
          {"horizon", c.horizon},
          {"resolution", c.resolution},
          {"batches", c.batches},
          {"batch_size", c.batch_size},
          {"reward", c.reward},
          {"gamma", c.gamma},
          {"tau", c.tau},
          {"actor_lr", c.actor_lr},
          {"actor_lr_after", c.actor_lr_after},
          {"critic_lr", c.critic_lr},
          {"critic_lr_after", c.critic_lr_after},
          {"lr_decay_batches", c.lr_decay_batches},
          {"gp_coeff", c.gp_coeff},
          {"noise_sigma", c.noise_sigma},
          {"collect_every", c.collect_every},
          {"replay_capacity", c.replay_capacity},
          {"metrics_every", c.metrics_every},
          {"test_size", c.test_size},
          {"seed", c.seed}};
}

AgentTrainConfig config_from_json(const nlohmann::json& j) {
  AgentTrainConfig c;
  c.k = j.at("k").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.resolution = j.at("resolution").get<int>();
  c.batches = j.at("batches").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.reward = j.at("reward").get<std::string>();
  c.gamma = j.at("gamma").get<double>();
  c.tau = j.at("tau").get<double>();
  c.actor_lr = j.at("actor_lr").get<double>();
  c.actor_lr_after = j.at("actor_lr_after").get<double>();
  c.critic_lr = j.at("critic_lr").get<double>();
  c.critic_lr_after = j.at("critic_lr_after").get<double>();
  c.lr_decay_batches = j.at("lr_decay_batches").get<int64_t>();
  c.gp_coeff = j.at("gp_coeff").get<double>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.collect_every = j.at("collect_every").get<int>();
  c.replay_capacity = j.at("replay_capacity").get<int>();
  c.metrics_every = j.at("metrics_every").get<int>();
  c.test_size = j.at("test_size").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

}  // namespace

void save_agent(const std::string& path, Agent& agent,
                const AgentTrainConfig& cfg,
                const std::string& renderer_hash) {
  Checkpoint ck;
  ck.meta["kind"] = "agent";
  ck.meta["config"] = config_json(cfg);
  ck.meta["renderer_hash"] = renderer_hash;
  put_params(ck, "actor", agent.actor.params());
  put_buffers(ck, "actor.buf", agent.actor.buffers());
  put_params(ck, "actor_target", agent.actor_target.params());
  put_buffers(ck, "actor_target.buf", agent.actor_target.buffers());
  put_params(ck, "critic", agent.critic.params());
  put_params(ck, "critic_target", agent.critic_target.params());
  put_params(ck, "disc", agent.reward_nets.online.params());
  put_params(ck, "disc_target", agent.reward_nets.target_copy.params());
  ck.save(path);
}

LoadedAgent load_agent(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  PAINT_CHECK_DATA(ck.meta.value("kind", "") == "agent",
                   path + " is not an agent checkpoint");
  LoadedAgent out;
  out.config = config_from_json(ck.meta.at("config"));
  out.renderer_hash = ck.meta.value("renderer_hash", "");
  AgentConfig acfg;
  acfg.k = out.config.k;
  acfg.horizon = out.config.horizon;
  acfg.resolution = out.config.resolution;
  acfg.gamma = out.config.gamma;
  out.agent.init(acfg, 0);
  get_params(ck, "actor", out.agent.actor.params());
  get_buffers(ck, "actor.buf", out.agent.actor.buffers());
  get_params(ck, "actor_target", out.agent.actor_target.params());
  get_buffers(ck, "actor_target.buf", out.agent.actor_target.buffers());
  get_params(ck, "critic", out.agent.critic.params());
  get_params(ck, "critic_target", out.agent.critic_target.params());
  get_params(ck, "disc", out.agent.reward_nets.online.params());
  get_params(ck, "disc_target", out.agent.reward_nets.target_copy.params());
  return out;
}

}  // namespace paint
