#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "paint/canvas/canvas.hpp"
#include "paint/core/error.hpp"
#include "paint/core/rng.hpp"
#include "paint/data/datasets.hpp"
#include "paint/stroke/stroke.hpp"

namespace paint::cli {

struct TargetPools {
  std::vector<Canvas> train, test;
};

// Resolves the --dataset argument to materialized canvas pools: a known
// dataset name (source from --dataset-dir), "synthetic" (strokes composited
// in the renderer's own design), or a path to an image folder.
inline TargetPools resolve_targets(const std::string& dataset,
                                   const std::string& dataset_dir,
                                   int train_size, int test_size,
                                   int resolution, int strokes_per_image,
                                   const StrokeDesign& design, uint64_t seed) {
  // test_size -1 keeps the loader's full test split (synthetic has no such
  // notion, so there it must be explicit).
  PAINT_CHECK(train_size >= 0 && (test_size >= 1 || test_size == -1),
              "--train-size must be >= 0 and --test-size >= 1");
  TargetPools out;
  if (dataset == "synthetic") {
    PAINT_CHECK(test_size >= 1, "synthetic targets need an explicit count");
    Rng root(seed);
    Rng rtr = root.child(100), rte = root.child(101);
    if (train_size > 0)
      out.train = synthetic_stroke_dataset(train_size, strokes_per_image,
                                           resolution, rtr, design);
    out.test = synthetic_stroke_dataset(test_size, strokes_per_image,
                                        resolution, rte, design);
    return out;
  }
  DatasetSpec spec;
  if (dataset == "mnist" || dataset == "svhn" || dataset == "celeba-subset" ||
      dataset == "image-folder") {
    spec = default_spec(dataset);
    spec.source = dataset_dir;
    PAINT_CHECK(!dataset_dir.empty(),
                "--dataset " + dataset + " needs --dataset-dir");
  } else if (std::filesystem::is_directory(dataset)) {
    spec = default_spec("image-folder");
    spec.source = dataset;
  } else {
    throw UsageError("--dataset must be mnist|svhn|celeba-subset|synthetic or "
                     "an image directory, got " + dataset);
  }
  spec.resolution = resolution;
  spec.train_size = train_size;
  spec.test_size = test_size;
  Rng rng(seed);
  auto [dtrain, dtest] = load_dataset(spec, rng);
  if (train_size > 0) out.train = dtrain.take();
  out.test = dtest.take();
  return out;
}

}  // namespace paint::cli
