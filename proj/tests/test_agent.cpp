#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <vector>

#include "paint/agent/agent.hpp"
#include "paint/core/error.hpp"
#include "paint/env/env.hpp"
#include "testutil.hpp"

using namespace paint;

namespace {

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

Canvas random_canvas(int res, Rng& rng) {
  Canvas c = blank_canvas(res);
  for (int64_t i = 0; i < c.numel(); ++i) c[i] = (float)rng.uniform();
  return c;
}

Canvas const_canvas(int res, float v) {
  Canvas c = blank_canvas(res);
  for (int64_t i = 0; i < c.numel(); ++i) c[i] = v;
  return c;
}

Episode make_episode(int horizon, int res, int k, Rng& rng) {
  Episode ep;
  ep.horizon = horizon;
  ep.target = random_canvas(res, rng);
  for (int t = 0; t <= horizon; ++t) ep.canvases.push_back(random_canvas(res, rng));
  for (int t = 0; t < horizon; ++t) {
    ActionBundle b({13 * k});
    for (int64_t i = 0; i < b.numel(); ++i) b[i] = (float)rng.uniform();
    ep.actions.push_back(b);
  }
  return ep;
}

AgentTrainConfig small_cfg(int batch_size, int horizon, const std::string& reward) {
  AgentTrainConfig cfg;
  cfg.k = 5;
  cfg.horizon = horizon;
  cfg.resolution = 32;
  cfg.batch_size = batch_size;
  cfg.batches = 8;
  cfg.reward = reward;
  cfg.metrics_every = 4;
  cfg.test_size = 2;
  cfg.replay_capacity = 64;
  cfg.seed = 7;
  return cfg;
}

Agent& small_agent(const std::string& tag, int horizon) {
  static std::map<std::string, Agent*> cache;
  Agent*& slot = cache[tag];
  if (slot == nullptr) {
    slot = new Agent();
    AgentConfig ac;
    ac.k = 5;
    ac.horizon = horizon;
    ac.resolution = 32;
    slot->init(ac, 42);
  }
  return *slot;
}

}  // namespace

TEST_CASE("actor: output shape, strict range, eval determinism, target parity") {
  Agent agent;
  AgentConfig ac;
  ac.k = 5;
  ac.horizon = 4;
  ac.resolution = 16;
  agent.init(ac, 3);

  CHECK(nn::params_equal(agent.actor.params(), agent.actor_target.params()));
  CHECK(nn::params_equal(agent.critic.params(), agent.critic_target.params()));
  CHECK(nn::params_equal(agent.reward_nets.online.params(),
                         agent.reward_nets.target_copy.params()));

  Rng rng(5);
  Tensor obs({2, kObsChannels, 16, 16});
  for (int64_t i = 0; i < obs.numel(); ++i) obs[i] = (float)rng.uniform();

  Tensor a1 = agent.act(obs);
  CHECK(a1.ndim() == 2);
  CHECK(a1.dim(0) == 2);
  CHECK(a1.dim(1) == 65);
  for (int64_t i = 0; i < a1.numel(); ++i) {
    CHECK(a1[i] > 0.0f);
    CHECK(a1[i] < 1.0f);
  }
  Tensor a2 = agent.act(obs);
  CHECK(testutil::max_abs_diff(a1, a2) == 0.0f);

  // Eval-mode rows are independent of their batch companions (running-stat
  // normalization, no batch statistics); tolerance covers batch-shaped BLAS
  // rounding only.
  Tensor row({1, kObsChannels, 16, 16});
  std::memcpy(row.data(), obs.data() + obs.numel() / 2,
              sizeof(float) * row.numel());
  Tensor ar = agent.act(row);
  for (int j = 0; j < 65; ++j)
    CHECK(std::abs(ar[j] - a1[65 + j]) <= 1e-5f);

  CHECK_THROWS_AS(agent.act(Tensor::zeros({2, 3, 16, 16})), ContractError);

  // Critic: one unbounded scalar per row, deterministic.
  Tensor v1 = agent.critic.forward(obs);
  CHECK(v1.ndim() == 2);
  CHECK(v1.dim(0) == 2);
  CHECK(v1.dim(1) == 1);
  CHECK(testutil::max_abs_diff(v1, agent.critic.forward(obs)) == 0.0f);
}

TEST_CASE("exploration noise: identity at zero, clamping, empirical spread") {
  Rng rng(11);
  ActionBundle b({65});
  for (int64_t i = 0; i < 65; ++i) b[i] = (float)rng.uniform();

  ActionBundle same = add_exploration_noise(b, 0.0, rng);
  CHECK(testutil::max_abs_diff(b, same) == 0.0f);

  // Interior component: mean ~ base, std ~ sigma over many draws.
  ActionBundle mid({1});
  mid[0] = 0.5f;
  const double sigma = 0.05;
  double sum = 0.0, sumsq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    ActionBundle out = add_exploration_noise(mid, sigma, rng);
    CHECK(out[0] >= 0.0f);
    CHECK(out[0] <= 1.0f);
    sum += out[0];
    sumsq += (double)out[0] * out[0];
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(mean - 0.5) < 0.005);
  CHECK(std::abs(sd - sigma) < 0.1 * sigma);

  // Saturated component stays inside the box.
  ActionBundle hi({1});
  hi[0] = 1.0f;
  for (int i = 0; i < 200; ++i) {
    ActionBundle out = add_exploration_noise(hi, 0.5, rng);
    CHECK(out[0] >= 0.0f);
    CHECK(out[0] <= 1.0f);
  }
  CHECK_THROWS_AS(add_exploration_noise(b, -0.1, rng), ContractError);
}

TEST_CASE("critic target: substitution, terminal mask, zero discount") {
  const double disc = std::pow(0.95, 5);
  CHECK(critic_target(0.1, 0.5, disc) == doctest::Approx(0.48689046875).epsilon(1e-12));
  CHECK(critic_target(0.37, 0.0, disc) == 0.37);   // terminal: v_next = 0
  CHECK(critic_target(0.37, 123.0, 0.0) == 0.37);  // myopic: discount = 0
  CHECK(critic_target(-0.2, -1.0, 1.0) == -1.2);
}

TEST_CASE("replay: round trip, FIFO eviction, exhaustive uniform sampling") {
  Rng rng(21);
  ReplayBuffer buf(2);
  CHECK(buf.capacity() == 2);
  CHECK(buf.size() == 0);

  Episode e1 = make_episode(3, 8, 2, rng);
  buf.add_episode(e1);
  CHECK(buf.episodes() == 1);
  CHECK(buf.size() == 3);

  // Quantized round trip: canvases within 1/510 of the source, actions exact.
  for (int t = 0; t < 3; ++t) {
    ReplayRecord r = buf.record(t);
    CHECK(r.step == t);
    CHECK(r.horizon == 3);
    CHECK(testutil::max_abs_diff(r.canvas_before, e1.canvases[t]) <= 0.5f / 255.0f + 1e-6f);
    CHECK(testutil::max_abs_diff(r.canvas_after, e1.canvases[t + 1]) <= 0.5f / 255.0f + 1e-6f);
    CHECK(testutil::max_abs_diff(r.target, e1.target) <= 0.5f / 255.0f + 1e-6f);
    CHECK(testutil::max_abs_diff(r.bundle, e1.actions[t]) == 0.0f);
  }

  // Distinguish episodes by constant targets, then overflow capacity.
  ReplayBuffer fifo(2);
  for (float v : {0.1f, 0.5f, 0.9f}) {
    Episode ep = make_episode(2, 8, 1, rng);
    ep.target = const_canvas(8, v);
    fifo.add_episode(ep);
  }
  CHECK(fifo.episodes() == 2);
  CHECK(fifo.size() == 4);
  for (int64_t i = 0; i < fifo.size(); ++i) {
    const float tv = fifo.record(i).target[0];
    const bool survivor = std::abs(tv - 0.5f) < 0.01f || std::abs(tv - 0.9f) < 0.01f;
    CHECK(survivor);  // the oldest episode (0.1) was evicted
  }
  CHECK_THROWS_AS(fifo.record(4), ContractError);
  CHECK_THROWS_AS(fifo.record(-1), ContractError);

  // Sampling without replacement: drawing everything yields each transition
  // exactly once (three copies of each step index across three episodes).
  ReplayBuffer full(8);
  for (int i = 0; i < 3; ++i) full.add_episode(make_episode(4, 8, 1, rng));
  std::vector<ReplayRecord> all = full.sample(12, rng);
  std::map<int, int> step_counts;
  for (const ReplayRecord& r : all) step_counts[r.step]++;
  for (int t = 0; t < 4; ++t) CHECK(step_counts[t] == 3);
  CHECK_THROWS_AS(full.sample(13, rng), ContractError);
  CHECK_THROWS_AS(full.sample(0, rng), ContractError);

  CHECK_THROWS_AS(ReplayBuffer(0), ContractError);
  Episode bad = make_episode(2, 8, 1, rng);
  bad.actions.pop_back();
  CHECK_THROWS_AS(full.add_episode(bad), ContractError);
}

TEST_CASE("soft updates: closed form, online untouched, buffers tracked") {
  Agent agent;
  AgentConfig ac;
  ac.k = 1;
  ac.horizon = 2;
  ac.resolution = 16;
  agent.init(ac, 9);

  const float w0 = agent.actor.fc.W.value[0];
  agent.actor.fc.W.value[0] = w0 + 1.0f;
  agent.actor.stem_bn.running_mean[0] = 2.0f;
  const float c0 = agent.critic.fc.W.value[0];
  agent.critic.fc.W.value[0] = c0 + 2.0f;

  agent.soft_update_targets(0.25);
  CHECK(agent.actor_target.fc.W.value[0] ==
        doctest::Approx(0.75f * w0 + 0.25f * (w0 + 1.0f)).epsilon(1e-6));
  CHECK(agent.actor_target.stem_bn.running_mean[0] ==
        doctest::Approx(0.25f * 2.0f).epsilon(1e-6));
  CHECK(agent.critic_target.fc.W.value[0] ==
        doctest::Approx(0.75f * c0 + 0.25f * (c0 + 2.0f)).epsilon(1e-6));
  CHECK(agent.actor.fc.W.value[0] == w0 + 1.0f);  // online side untouched

  // tau = 1 snaps every target to its online twin.
  agent.soft_update_targets(1.0);
  CHECK(nn::params_equal(agent.actor.params(), agent.actor_target.params()));
  CHECK(nn::params_equal(agent.critic.params(), agent.critic_target.params()));
  CHECK(nn::params_equal(agent.reward_nets.online.params(),
                         agent.reward_nets.target_copy.params()));
  CHECK(agent.actor_target.stem_bn.running_mean[0] == 2.0f);
}

TEST_CASE("trainer: config validation and collection fills the replay") {
  NeuralRenderer& r = test_renderer();
  Agent& agent = small_agent("h2", 2);

  AgentTrainConfig bad = small_cfg(4, 2, "nope");
  CHECK_THROWS_AS(AgentTrainer(agent, r, bad), ContractError);
  AgentTrainConfig wrongres = small_cfg(4, 2, "l2");
  wrongres.resolution = 64;
  CHECK_THROWS_AS(AgentTrainer(agent, r, wrongres), ContractError);
  AgentTrainConfig wrongh = small_cfg(4, 3, "l2");
  CHECK_THROWS_AS(AgentTrainer(agent, r, wrongh), ContractError);

  AgentTrainer trainer(agent, r, small_cfg(4, 2, "l2"));
  CHECK(trainer.exploration_sigma(0) == doctest::Approx(0.1));
  CHECK(trainer.exploration_sigma(2) == doctest::Approx(0.05));
  CHECK(trainer.exploration_sigma(4) == 0.0);
  CHECK(trainer.exploration_sigma(1000) == 0.0);

  Rng rng(31);
  std::vector<Canvas> targets{random_canvas(32, rng), random_canvas(32, rng)};
  CHECK_THROWS_AS(trainer.collect(0, {}), ContractError);
  trainer.collect(0, targets);
  CHECK(trainer.replay().size() >= 4);
  CHECK(trainer.replay().episodes() >= 1);
  ReplayRecord rec = trainer.replay().record(0);
  CHECK(rec.horizon == 2);
  CHECK(rec.bundle.numel() == 65);
  CHECK(canvas_res(rec.target) == 32);
}

TEST_CASE("critic update: fits a frozen batch, rejects non-finite state") {
  NeuralRenderer& r = test_renderer();
  Agent agent;
  AgentConfig ac;
  ac.k = 5;
  ac.horizon = 1;
  ac.resolution = 32;
  agent.init(ac, 13);
  AgentTrainer trainer(agent, r, small_cfg(2, 1, "l2"));

  Rng rng(33);
  std::vector<Canvas> targets{random_canvas(32, rng)};
  trainer.collect(0, targets);
  Rng srng(1);
  std::vector<ReplayRecord> batch = trainer.replay().sample(2, srng);

  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) losses.push_back(trainer.update_critic(batch));
  for (double l : losses) CHECK(l >= 0.0);
  CHECK(losses.back() < 0.05 * losses.front());

  std::vector<ReplayRecord> tiny(batch.begin(), batch.begin() + 1);
  CHECK_THROWS_AS(trainer.update_critic(tiny), ContractError);

  agent.critic.fc.W.value[0] = std::nanf("");
  CHECK_THROWS_AS(trainer.update_critic(batch), NumericError);
}

TEST_CASE("actor update: objective ascent on a frozen batch, nan rejection") {
  NeuralRenderer& r = test_renderer();
  Agent agent;
  AgentConfig ac;
  ac.k = 5;
  ac.horizon = 1;
  ac.resolution = 32;
  agent.init(ac, 17);
  AgentTrainer trainer(agent, r, small_cfg(2, 1, "l2"));

  Rng rng(35);
  std::vector<Canvas> targets{random_canvas(32, rng)};
  trainer.collect(0, targets);
  Rng srng(2);
  std::vector<ReplayRecord> batch = trainer.replay().sample(2, srng);

  std::vector<double> obj;
  for (int i = 0; i < 40; ++i) obj.push_back(trainer.update_actor(batch));
  CHECK(obj.back() > obj.front());

  // The learned-reward path must reject a poisoned score network.
  Agent agent2;
  agent2.init(ac, 18);
  AgentTrainer trainer2(agent2, r, small_cfg(2, 1, "wgan"));
  trainer2.collect(0, targets);
  std::vector<ReplayRecord> b2 = trainer2.replay().sample(2, srng);
  agent2.reward_nets.target_copy.c1.V.value[0] = std::nanf("");
  CHECK_THROWS_AS(trainer2.update_actor(b2), NumericError);
}

TEST_CASE("actor objective: detached transition has exactly zero gradient") {
  NeuralRenderer& r = test_renderer();
  Agent& agent = small_agent("h2", 2);
  AgentTrainer trainer(agent, r, small_cfg(4, 2, "wgan"));

  Rng rng(37);
  std::vector<Canvas> targets{random_canvas(32, rng)};
  trainer.collect(0, targets);
  Rng srng(3);
  std::vector<ReplayRecord> batch = trainer.replay().sample(4, srng);

  ActorEval live = trainer.actor_eval(batch, false);
  ActorEval dead = trainer.actor_eval(batch, true);
  CHECK(live.objective == dead.objective);
  CHECK(live.mean_reward == dead.mean_reward);
  float live_mag = 0.0f;
  for (int64_t i = 0; i < live.dactions.numel(); ++i)
    live_mag = std::max(live_mag, std::abs(live.dactions[i]));
  CHECK(live_mag > 0.0f);
  for (int64_t i = 0; i < dead.dactions.numel(); ++i)
    CHECK(dead.dactions[i] == 0.0f);
}

TEST_CASE("actor objective: terminal masking and the discount factor") {
  NeuralRenderer& r = test_renderer();

  // Terminal records: the value term is absent, objective == mean reward.
  Agent agent1;
  AgentConfig ac1;
  ac1.k = 5;
  ac1.horizon = 1;
  ac1.resolution = 32;
  agent1.init(ac1, 23);
  AgentTrainer t1(agent1, r, small_cfg(2, 1, "wgan"));
  Rng rng(41);
  std::vector<Canvas> targets{random_canvas(32, rng)};
  t1.collect(0, targets);
  Rng srng(4);
  std::vector<ReplayRecord> term = t1.replay().sample(2, srng);
  ActorEval evt = t1.actor_eval(term);
  CHECK(evt.objective == evt.mean_reward);

  // Same weights, gamma 0 vs 0.95: identical reward term; the discount
  // multiplies only the bootstrapped value.
  AgentConfig ac;
  ac.k = 5;
  ac.horizon = 2;
  ac.resolution = 32;
  ac.gamma = 0.95;
  Agent ag;
  ag.init(ac, 29);
  AgentConfig ac0 = ac;
  ac0.gamma = 0.0;
  Agent ag0;
  ag0.init(ac0, 29);
  CHECK(nn::params_equal(ag.actor.params(), ag0.actor.params()));

  AgentTrainer tg(ag, r, small_cfg(4, 2, "l2"));
  AgentTrainer tg0(ag0, r, small_cfg(4, 2, "l2"));
  tg.collect(0, targets);
  Rng s2(5);
  std::vector<ReplayRecord> nonterm;
  while ((int)nonterm.size() < 4) {
    std::vector<ReplayRecord> draw = tg.replay().sample(4, s2);
    for (ReplayRecord& d : draw)
      if (d.step + 1 < d.horizon && (int)nonterm.size() < 4)
        nonterm.push_back(d);
  }
  Tensor obs({4, kObsChannels, 32, 32});
  for (int i = 0; i < 4; ++i) {
    EnvState st{nonterm[i].canvas_before, nonterm[i].target, nonterm[i].step,
                nonterm[i].horizon};
    encode_state_into(st, obs, i);
  }
  Tensor actions = ag.act(obs);
  ActorEval evg = tg.actor_eval(nonterm, false, &actions);
  ActorEval ev0 = tg0.actor_eval(nonterm, false, &actions);
  CHECK(evg.mean_reward == ev0.mean_reward);
  CHECK(ev0.objective == ev0.mean_reward);          // discount 0 kills the tail
  CHECK(evg.objective != evg.mean_reward);          // discount 0.95^5 keeps it
  CHECK(ag0.discount() == 0.0);
  CHECK(ag.discount() == doctest::Approx(std::pow(0.95, 5)).epsilon(1e-12));
}

TEST_CASE("actor gradient: finite-difference sign agreement on the objective") {
  NeuralRenderer& r = test_renderer();
  Agent& agent = small_agent("h2", 2);
  AgentTrainer trainer(agent, r, small_cfg(10, 2, "wgan"));

  Rng rng(43);
  std::vector<Canvas> targets{random_canvas(32, rng), random_canvas(32, rng)};
  trainer.collect(0, targets);
  Rng srng(6);
  std::vector<ReplayRecord> batch = trainer.replay().sample(10, srng);

  Tensor obs({10, kObsChannels, 32, 32});
  for (int i = 0; i < 10; ++i) {
    EnvState st{batch[i].canvas_before, batch[i].target, batch[i].step,
                batch[i].horizon};
    encode_state_into(st, obs, i);
  }
  Tensor actions = agent.act(obs);
  ActorEval base = trainer.actor_eval(batch, false, &actions);

  // One probe per record on its largest-magnitude action gradient: perturb
  // that action both ways and compare the objective slope's sign.
  const double eps = 2e-3;
  int agree = 0, probes = 0;
  Rng prng(47);
  for (int i = 0; i < 10; ++i) {
    int64_t jbest = i * 65;
    for (int64_t j = 0; j < 65; ++j)
      if (std::abs(base.dactions[i * 65 + j]) >
          std::abs(base.dactions[jbest]))
        jbest = i * 65 + j;
    Tensor up = actions.clone(), dn = actions.clone();
    up[jbest] = std::min(1.0f, up[jbest] + (float)eps);
    dn[jbest] = std::max(0.0f, dn[jbest] - (float)eps);
    const double fd = trainer.actor_eval(batch, false, &up).objective -
                      trainer.actor_eval(batch, false, &dn).objective;
    ++probes;
    if ((fd > 0) == (base.dactions[jbest] > 0)) ++agree;
  }
  CHECK(probes == 10);
  CHECK(agree >= 9);  // sign consistency on at least 90% of probes
}

TEST_CASE("rewards are score differences: constant offsets cancel exactly") {
  Agent& agent = small_agent("h2", 2);
  Rng rng(53);
  LossFn gan = [&](const Canvas& c, const Canvas& t) {
    return agent.reward_nets.gan_loss(c, t);
  };
  const double offset = 100.0;
  LossFn shifted = [&](const Canvas& c, const Canvas& t) {
    return agent.reward_nets.gan_loss(c, t) + offset;
  };
  for (int trial = 0; trial < 10; ++trial) {
    Canvas target = random_canvas(32, rng);
    EnvState prev{random_canvas(32, rng), target, 0, 2};
    EnvState next{random_canvas(32, rng), target, 1, 2};
    const double r1 = reward(prev, next, gan);
    const double r2 = reward(prev, next, shifted);
    CHECK(r2 == r1);  // float-valued scores cancel bit-exactly in double
  }
}

TEST_CASE("agent checkpoint: full round trip with config and renderer hash") {
  Agent agent;
  AgentConfig ac;
  ac.k = 2;
  ac.horizon = 3;
  ac.resolution = 16;
  agent.init(ac, 61);
  agent.actor.stem_bn.running_mean[0] = 0.125f;  // buffer must round trip too

  AgentTrainConfig cfg;
  cfg.k = 2;
  cfg.horizon = 3;
  cfg.resolution = 16;
  cfg.batches = 123;
  cfg.batch_size = 5;
  cfg.reward = "l2";
  cfg.noise_sigma = 0.07;
  cfg.seed = 999;

  const std::string dir = testutil::scratch_dir("agent_ckpt");
  const std::string path = dir + "/agent.ckpt";
  save_agent(path, agent, cfg, "cafebabe");

  LoadedAgent back = load_agent(path);
  CHECK(back.renderer_hash == "cafebabe");
  CHECK(back.config.k == 2);
  CHECK(back.config.horizon == 3);
  CHECK(back.config.resolution == 16);
  CHECK(back.config.batches == 123);
  CHECK(back.config.batch_size == 5);
  CHECK(back.config.reward == "l2");
  CHECK(back.config.noise_sigma == 0.07);
  CHECK(back.config.seed == 999);
  CHECK(nn::params_equal(back.agent.actor.params(), agent.actor.params()));
  CHECK(nn::params_equal(back.agent.actor_target.params(),
                         agent.actor_target.params()));
  CHECK(nn::params_equal(back.agent.critic.params(), agent.critic.params()));
  CHECK(nn::params_equal(back.agent.critic_target.params(),
                         agent.critic_target.params()));
  CHECK(nn::params_equal(back.agent.reward_nets.online.params(),
                         agent.reward_nets.online.params()));
  CHECK(nn::params_equal(back.agent.reward_nets.target_copy.params(),
                         agent.reward_nets.target_copy.params()));
  CHECK(back.agent.actor.stem_bn.running_mean[0] == 0.125f);

  // Same policy after the round trip.
  Rng rng(67);
  Tensor obs({1, kObsChannels, 16, 16});
  for (int64_t i = 0; i < obs.numel(); ++i) obs[i] = (float)rng.uniform();
  CHECK(testutil::max_abs_diff(agent.act(obs), back.agent.act(obs)) == 0.0f);

  CHECK_THROWS_AS(load_agent(dir + "/missing.ckpt"), DataError);
}

TEST_CASE("training loop: metrics cadence and seeded determinism") {
  NeuralRenderer& r = test_renderer();
  Rng rng(71);
  std::vector<Canvas> train{random_canvas(32, rng), random_canvas(32, rng)};
  std::vector<Canvas> test{random_canvas(32, rng), random_canvas(32, rng)};

  auto run = [&]() {
    Agent agent;
    AgentConfig ac;
    ac.k = 5;
    ac.horizon = 1;
    ac.resolution = 32;
    agent.init(ac, 77);
    AgentTrainConfig cfg = small_cfg(2, 1, "wgan");
    cfg.batches = 4;
    cfg.metrics_every = 2;
    AgentTrainer trainer(agent, r, cfg);
    return trainer.train(train, test);
  };

  AgentTrainResult a = run();
  CHECK(a.baseline_l2 > 0.0);
  REQUIRE(a.metrics.size() == 3);  // batches 0, 2, 4
  CHECK(a.metrics[0].batch == 0);
  CHECK(a.metrics[1].batch == 2);
  CHECK(a.metrics[2].batch == 4);
  CHECK(a.final_test_l2 == a.metrics.back().test_l2);
  for (const AgentMetricsRow& row : a.metrics) CHECK(row.test_l2 > 0.0);

  AgentTrainResult b = run();
  REQUIRE(b.metrics.size() == a.metrics.size());
  for (size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].test_l2 == b.metrics[i].test_l2);
    CHECK(a.metrics[i].test_reward == b.metrics[i].test_reward);
    CHECK(a.metrics[i].critic_loss == b.metrics[i].critic_loss);
    CHECK(a.metrics[i].actor_objective == b.metrics[i].actor_objective);
  }
}
