#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "paint/canvas/canvas.hpp"
#include "paint/core/rng.hpp"
#include "paint/stroke/stroke.hpp"

namespace paint {

// ---------------------------------------------------------------------------
// Dataset ingestion: every source is normalized to [3,res,res] canvases in
// [0,1]. MNIST reads the IDX pair with its official train/test split; svhn
// and celeba-subset are aliases of the generic image folder loader with
// their own horizon/bundle defaults. Labels are never read.
// ---------------------------------------------------------------------------

struct DatasetSpec {
  std::string name = "image-folder";  // mnist|svhn|celeba-subset|image-folder
  std::string source;                 // IDX directory (mnist) or image folder
  int train_size = -1;                // -1: everything available
  int test_size = -1;                 // -1: official/remaining share
  int resolution = 128;
  int horizon = 40;  // episode steps; k strokes each
  int bundle = 5;    // strokes per action bundle
};

// Spec skeleton with the per-dataset horizon/bundle defaults filled in.
DatasetSpec default_spec(const std::string& name);

// Immutable item list; images decode lazily so large corpora stay on disk.
class Dataset {
 public:
  int size() const { return (int)items_.size(); }
  Canvas get(int i) const;
  // First n canvases in the (seeded) dataset order; n < 0 takes everything.
  std::vector<Canvas> take(int n = -1) const;
  int resolution() const { return res_; }

 private:
  friend std::pair<Dataset, Dataset> load_dataset(const DatasetSpec&, Rng&);
  Dataset(std::vector<std::function<Canvas()>> items, int res)
      : items_(std::move(items)), res_(res) {}
  std::vector<std::function<Canvas()>> items_;
  int res_ = 128;
};

// Train/test pair with disjoint membership and seeded, reproducible order.
std::pair<Dataset, Dataset> load_dataset(const DatasetSpec& spec, Rng& rng);

// Targets composited from random ground-truth strokes on blank canvases:
// images the painting environment can represent exactly.
std::vector<Canvas> synthetic_stroke_dataset(int n, int strokes_per_image,
                                             int resolution, Rng& rng,
                                             const StrokeDesign& design = {});

}  // namespace paint
