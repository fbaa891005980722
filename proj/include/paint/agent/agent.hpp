#pragma once

#include <array>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "paint/canvas/canvas.hpp"
#include "paint/env/env.hpp"
#include "paint/gan/gan.hpp"
#include "paint/nn/nn.hpp"
#include "paint/renderer/renderer.hpp"

namespace paint {

// ---------------------------------------------------------------------------
// Residual blocks (two 3x3 convolutions plus a skip; a 1x1 projection when
// shape changes). The actor variant normalizes with BatchNorm and ReLU, the
// critic variant replaces both with weight normalization and TReLU.
// ---------------------------------------------------------------------------

struct BNBlock {
  nn::Conv2d conv1, conv2;
  nn::BatchNorm2d bn1, bn2;
  nn::ReLU relu1, relu2;
  bool has_proj = false;
  nn::Conv2d proj;
  nn::BatchNorm2d proj_bn;

  void init(int cin, int cout, int stride, Rng& rng);
  void set_train(bool train);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  void collect(const std::string& prefix, nn::NamedParams& out);
  void collect_buffers(const std::string& prefix, nn::NamedBuffers& out);
};

struct WNBlock {
  nn::WNConv2d conv1, conv2;
  nn::TReLU act1, act2;
  bool has_proj = false;
  nn::WNConv2d proj;

  void init(int cin, int cout, int stride, Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  void collect(const std::string& prefix, nn::NamedParams& out);
};

// ---------------------------------------------------------------------------
// Actor: [N,7,res,res] observation -> 3x3 coordinate-augmented conv (stride 2)
// -> four residual stages (64/128/256/512, strides 1/2/2/2, two blocks each)
// -> global average pool to 512 -> FC -> sigmoid -> [N,13k]. Outputs are
// clamped to strictly (0,1) against float sigmoid saturation.
// ---------------------------------------------------------------------------

struct ActorNet {
  int k = 5;
  nn::Conv2d stem;
  nn::BatchNorm2d stem_bn;
  nn::ReLU stem_relu;
  std::array<BNBlock, 8> blocks;
  nn::GlobalAvgPool gap;
  nn::Linear fc;
  nn::Sigmoid sig;

  void init(int k_, Rng& rng);
  void set_train(bool train);
  Tensor forward(const Tensor& obs);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  nn::NamedParams params();
  nn::NamedBuffers buffers();
};

// Critic: same trunk with weight normalization and TReLU, FC head to one
// unbounded scalar per row. Scores an observation of the state reached after
// acting, so no action input is needed.
struct CriticNet {
  nn::WNConv2d stem;
  nn::TReLU stem_act;
  std::array<WNBlock, 8> blocks;
  nn::GlobalAvgPool gap;
  nn::Linear fc;

  void init(Rng& rng);
  Tensor forward(const Tensor& obs);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  nn::NamedParams params();
};

// ---------------------------------------------------------------------------
// Replay: FIFO of whole episodes, capacity counted in episodes (oldest
// evicted first). Canvases are stored quantized to uint8 (max round-trip
// error 1/510); records are decoded views sampled uniformly without
// replacement within a batch.
// ---------------------------------------------------------------------------

struct ReplayRecord {
  Canvas canvas_before;
  Canvas target;
  int step = 0;
  int horizon = 1;
  ActionBundle bundle;
  Canvas canvas_after;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity_episodes = 800);
  void add_episode(const Episode& ep);
  int episodes() const { return (int)eps_.size(); }
  int64_t size() const { return records_; }  // transition count
  int capacity() const { return capacity_; }
  // n distinct records, uniform over all stored transitions.
  std::vector<ReplayRecord> sample(int n, Rng& rng) const;
  ReplayRecord record(int64_t index) const;  // flat index, oldest first

 private:
  struct Stored {
    std::vector<uint8_t> canvases;  // (horizon+1) * 3*res*res
    std::vector<uint8_t> target;    // 3*res*res
    std::vector<float> actions;     // horizon * 13k
    int horizon = 0, res = 0, bundle_len = 0;
  };
  std::deque<Stored> eps_;
  int capacity_ = 800;
  int64_t records_ = 0;
};

// ---------------------------------------------------------------------------
// Free operations.
// ---------------------------------------------------------------------------

// bundle + N(0, sigma^2) per component, clamped back to [0,1]; sigma=0 is the
// identity.
ActionBundle add_exploration_noise(const ActionBundle& bundle, double sigma,
                                   Rng& rng);

// Bellman target r + discount * v_next; the caller supplies v_next = 0 at
// episode end (terminal masking).
double critic_target(double r, double v_next, double discount);

// ---------------------------------------------------------------------------
// Agent: actor/critic with slowly tracking target copies plus the learned
// reward networks. Target copies change only via soft_update_targets.
// ---------------------------------------------------------------------------

struct AgentConfig {
  int k = 5;            // strokes per bundle
  int horizon = 40;     // bundles per episode
  int resolution = 128;
  double gamma = 0.95;  // per-stroke discount; a bundle step discounts gamma^k
};

struct Agent {
  AgentConfig cfg;
  ActorNet actor, actor_target;
  CriticNet critic, critic_target;
  GanReward reward_nets;

  void init(const AgentConfig& config, uint64_t seed);
  // Deterministic eval-mode policy on a [N,7,res,res] observation batch.
  Tensor act(const Tensor& obs);
  ActorFn actor_fn();  // adapter for run_episode
  // One tracking step for all three target copies (params and BN buffers).
  void soft_update_targets(double tau);
  double discount() const;  // gamma^k
};

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct AgentTrainConfig {
  int k = 5;
  int horizon = 40;
  int resolution = 128;
  int batches = 20000;
  int batch_size = 96;
  std::string reward = "wgan";  // "wgan" | "l2"
  double gamma = 0.95;
  double tau = 0.001;
  double actor_lr = 3e-4, actor_lr_after = 1e-4;
  double critic_lr = 1e-3, critic_lr_after = 3e-4;
  int64_t lr_decay_batches = 100000;
  double gp_coeff = 10.0;
  double noise_sigma = 0.1;  // decays linearly to 0 over the first half
  int collect_every = 4;
  int replay_capacity = 800;
  int metrics_every = 250;
  int test_size = 64;  // held-out targets scored at each metrics row
  uint64_t seed = 0;
};

struct AgentMetricsRow {
  int batch = 0;
  double test_l2 = 0.0;
  double test_reward = 0.0;  // mean episode return under the active reward
  double critic_loss = 0.0;
  double actor_objective = 0.0;
  double disc_wasserstein = 0.0;
};

struct AgentTrainResult {
  std::vector<AgentMetricsRow> metrics;
  double baseline_l2 = 0.0;  // blank canvas vs test targets
  double final_test_l2 = 0.0;
};

// Pre-step actor evaluation, exposed so gradients can be inspected without
// an optimizer step. detach_transition treats the painted canvas as constant
// with respect to the actions: every action gradient is then exactly zero.
struct ActorEval {
  double objective = 0.0;
  double mean_reward = 0.0;
  Tensor dactions;  // d(objective)/d(actions), [N,13k]
};

class AgentTrainer {
 public:
  AgentTrainer(Agent& agent, NeuralRenderer& renderer,
               const AgentTrainConfig& cfg);

  // One discriminator step on fake (painted, target) vs real (target, target)
  // pairs drawn from the records.
  DiscTrainStats update_discriminator(const std::vector<ReplayRecord>& batch);
  // One MSE step of the online critic toward r + gamma^k * masked target
  // value; returns the pre-step loss.
  double update_critic(const std::vector<ReplayRecord>& batch);
  // One ascent step of the actor on mean[r(s, pi(s)) + gamma^k * masked
  // V_target(trans(s, pi(s)))]; returns the pre-step objective.
  double update_actor(const std::vector<ReplayRecord>& batch);
  // actions_override, when given, replaces the actor forward pass so the
  // objective can be probed as a direct function of a [N,13k] action batch.
  ActorEval actor_eval(const std::vector<ReplayRecord>& batch,
                       bool detach_transition = false,
                       const Tensor* actions_override = nullptr);

  // Roll episodes with exploration noise for the given iteration into replay.
  void collect(int iter, const std::vector<Canvas>& train_targets);

  AgentTrainResult train(
      const std::vector<Canvas>& train_targets,
      const std::vector<Canvas>& test_targets,
      const std::function<void(const AgentMetricsRow&)>& on_metrics = {});

  ReplayBuffer& replay() { return replay_; }
  double exploration_sigma(int iter) const;
  LossFn active_loss();  // the reward's loss form: wgan -> -score, l2 -> l2

 private:
  Agent& agent_;
  NeuralRenderer& renderer_;
  AgentTrainConfig cfg_;
  nn::Adam actor_opt_, critic_opt_;
  ReplayBuffer replay_;
  Rng rng_noise_, rng_sample_, rng_gp_, rng_data_;
  std::vector<int> cursor_order_;
  size_t cursor_ = 0;
  int next_target_index(int n_targets);
};

// ---------------------------------------------------------------------------
// Checkpointing: every network (online and target), the verbatim training
// configuration, and the hash of the renderer the agent was trained against.
// ---------------------------------------------------------------------------

void save_agent(const std::string& path, Agent& agent,
                const AgentTrainConfig& cfg, const std::string& renderer_hash);

struct LoadedAgent {
  Agent agent;
  AgentTrainConfig config;
  std::string renderer_hash;
};
LoadedAgent load_agent(const std::string& path);

}  // namespace paint
