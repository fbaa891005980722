#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "paint/agent/agent.hpp"
#include "paint/cli/commands.hpp"
#include "paint/core/error.hpp"
#include "paint/core/io.hpp"
#include "dataset_pool.hpp"

namespace paint::cli {

int cmd_train_agent(const TrainAgentArgs& a) {
  if (a.renderer.empty())
    throw UsageError("train-agent needs --renderer <checkpoint>");
  if (a.bundle < 1 || a.strokes < 1 || a.strokes % a.bundle != 0)
    throw UsageError("--strokes must be a positive multiple of --bundle, got " +
                     std::to_string(a.strokes) + "/" +
                     std::to_string(a.bundle));
  if (a.reward != "wgan" && a.reward != "l2")
    throw UsageError("--reward must be wgan or l2, got " + a.reward);

  NeuralRenderer renderer = load_renderer(a.renderer);
  const int res = renderer.resolution();
  const int horizon = a.strokes / a.bundle;

  TargetPools pools =
      resolve_targets(a.dataset, a.dataset_dir, a.train_size, a.test_size,
                      res, a.strokes, renderer.design, a.seed);
  PAINT_CHECK_DATA(!pools.train.empty(), "training target pool is empty");

  AgentTrainConfig cfg;
  cfg.k = a.bundle;
  cfg.horizon = horizon;
  cfg.resolution = res;
  cfg.batches = a.batches;
  cfg.batch_size = a.batch_size;
  cfg.reward = a.reward;
  cfg.metrics_every = a.metrics_every;
  cfg.test_size = (int)pools.test.size();
  cfg.seed = a.seed;

  std::filesystem::create_directories(a.out);
  nlohmann::json snapshot{{"command", "train-agent"},
                          {"dataset", a.dataset},
                          {"dataset_dir", a.dataset_dir},
                          {"renderer", a.renderer},
                          {"reward", a.reward},
                          {"strokes", a.strokes},
                          {"bundle", a.bundle},
                          {"horizon", horizon},
                          {"batches", a.batches},
                          {"batch_size", a.batch_size},
                          {"resolution", res},
                          {"seed", a.seed},
                          {"out", a.out},
                          {"metrics_every", a.metrics_every},
                          {"train_size", (int)pools.train.size()},
                          {"test_size", (int)pools.test.size()}};
  io::write_text_atomic(a.out + "/config.json", snapshot.dump(2) + "\n");

  Agent agent;
  AgentConfig acfg;
  acfg.k = cfg.k;
  acfg.horizon = cfg.horizon;
  acfg.resolution = res;
  acfg.gamma = cfg.gamma;
  agent.init(acfg, a.seed);

  AgentTrainer trainer(agent, renderer, cfg);
  AgentTrainResult result =
      trainer.train(pools.train, pools.test, [](const AgentMetricsRow& row) {
        std::cout << "batch " << row.batch << " test_l2 " << row.test_l2
                  << " test_reward " << row.test_reward << " critic_loss "
                  << row.critic_loss << std::endl;
      });

  std::ostringstream csv;
  csv.precision(17);  // exact double round-trip
  csv << "batch,test_l2,test_reward,critic_loss,actor_objective,"
         "disc_wasserstein\n";
  for (const AgentMetricsRow& r : result.metrics)
    csv << r.batch << "," << r.test_l2 << "," << r.test_reward << ","
        << r.critic_loss << "," << r.actor_objective << ","
        << r.disc_wasserstein << "\n";
  io::write_text_atomic(a.out + "/metrics.csv", csv.str());

  save_agent(a.out + "/agent.ckpt", agent, cfg,
             renderer_weights_hash(renderer));

  nlohmann::json summary{{"baseline_l2", result.baseline_l2},
                         {"final_test_l2", result.final_test_l2},
                         {"ratio_to_baseline",
                          result.baseline_l2 > 0.0
                              ? result.final_test_l2 / result.baseline_l2
                              : 0.0}};
  io::write_text_atomic(a.out + "/summary.json", summary.dump(2) + "\n");

  std::cout << "baseline_l2 " << result.baseline_l2 << " final_test_l2 "
            << result.final_test_l2 << "\nwrote " << a.out << "/agent.ckpt"
            << std::endl;
  return 0;
}

}  // namespace paint::cli
