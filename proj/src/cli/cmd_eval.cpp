#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "paint/agent/agent.hpp"
#include "paint/cli/commands.hpp"
#include "paint/core/error.hpp"
#include "paint/core/io.hpp"
#include "paint/env/env.hpp"
#include "dataset_pool.hpp"

namespace paint::cli {

int cmd_eval(const EvalArgs& a) {
  if (a.agent.empty() || a.renderer.empty())
    throw UsageError("eval needs --agent and --renderer");
  if (a.limit < 0) throw UsageError("--limit must be >= 0");

  NeuralRenderer renderer = load_renderer(a.renderer);
  LoadedAgent loaded = load_agent(a.agent);
  PAINT_CHECK_DATA(loaded.renderer_hash == renderer_weights_hash(renderer),
                   "agent checkpoint was trained against a different "
                   "renderer (weights hash mismatch)");
  PAINT_CHECK_DATA(loaded.config.resolution == renderer.resolution(),
                   "agent/renderer resolution mismatch");

  const int res = renderer.resolution();
  const int horizon = loaded.config.horizon;
  // limit 0: the full test split (synthetic defaults to 64 fresh targets).
  const int want = a.limit == 0 ? (a.dataset == "synthetic" ? 64 : -1)
                                : a.limit;
  TargetPools pools =
      resolve_targets(a.dataset, a.dataset_dir, /*train_size=*/0,
                      want < 0 ? -1 : want, res, loaded.config.k * horizon,
                      renderer.design, a.seed);
  std::vector<Canvas>& targets = pools.test;
  PAINT_CHECK_DATA(!targets.empty(), "evaluation test set is empty");
  if (a.limit > 0 && (int)targets.size() > a.limit)
    targets.resize(a.limit);

  const Canvas blank = blank_canvas(res);
  std::vector<double> l2s, ms;
  double baseline = 0.0;
  for (const Canvas& t : targets) baseline += l2_loss(blank, t);
  baseline /= (double)targets.size();

  for (const Canvas& t : targets) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Episode> eps =
        run_episode(loaded.agent.actor_fn(), {t}, horizon, renderer);
    const auto t1 = std::chrono::steady_clock::now();
    l2s.push_back(l2_loss(eps.front().canvases.back(), t));
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  double mean = 0.0, mean_ms = 0.0;
  for (double v : l2s) mean += v;
  for (double v : ms) mean_ms += v;
  mean /= (double)l2s.size();
  mean_ms /= (double)ms.size();
  std::vector<double> sorted = l2s;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  const double median =
      n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<double> sorted_ms = ms;
  std::sort(sorted_ms.begin(), sorted_ms.end());
  const double median_ms = n % 2 == 1
                               ? sorted_ms[n / 2]
                               : 0.5 * (sorted_ms[n / 2 - 1] + sorted_ms[n / 2]);

  std::filesystem::create_directories(a.out);
  std::ostringstream csv;
  csv.precision(17);
  csv << "image,l2,wall_ms\n";
  for (size_t i = 0; i < l2s.size(); ++i)
    csv << i << "," << l2s[i] << "," << ms[i] << "\n";
  csv << "baseline," << baseline << ",0\n";
  csv << "mean," << mean << "," << mean_ms << "\n";
  csv << "median," << median << "," << median_ms << "\n";
  io::write_text_atomic(a.out + "/eval.csv", csv.str());

  nlohmann::json summary{{"command", "eval"},
                         {"dataset", a.dataset},
                         {"count", (int)l2s.size()},
                         {"mean_l2", mean},
                         {"median_l2", median},
                         {"baseline_l2", baseline},
                         {"mean_wall_ms", mean_ms},
                         {"seed", a.seed}};
  io::write_text_atomic(a.out + "/summary.json", summary.dump(2) + "\n");

  std::cout << "count " << l2s.size() << " mean_l2 " << mean << " median_l2 "
            << median << " baseline_l2 " << baseline << "\nwrote " << a.out
            << "/eval.csv" << std::endl;
  return 0;
}

}  // namespace paint::cli
