#include "paint/data/datasets.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <memory>

#include "paint/core/error.hpp"
#include "paint/core/io.hpp"

namespace paint {

namespace fs = std::filesystem;

DatasetSpec default_spec(const std::string& name) {
  DatasetSpec spec;
  spec.name = name;
  if (name == "mnist") {
    spec.horizon = 1;
    spec.bundle = 5;
  } else if (name == "svhn") {
    spec.horizon = 8;
    spec.bundle = 5;
  } else if (name == "celeba-subset" || name == "image-folder") {
    spec.horizon = 40;
    spec.bundle = 5;
  } else {
    throw ContractError("unknown dataset name: " + name);
  }
  return spec;
}

Canvas Dataset::get(int i) const {
  PAINT_CHECK(i >= 0 && i < size(), "dataset index out of range");
  return items_[i]();
}

std::vector<Canvas> Dataset::take(int n) const {
  const int m = n < 0 ? size() : std::min(n, size());
  std::vector<Canvas> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) out.push_back(get(i));
  return out;
}

namespace {

uint32_t read_be32(const uint8_t* p) {
  return ((uint32_t)p[0] << 24) | ((uint32_t)p[1] << 16) |
         ((uint32_t)p[2] << 8) | (uint32_t)p[3];
}

struct IdxImages {
  std::shared_ptr<std::vector<uint8_t>> pixels;  // n*h*w, row-major
  int n = 0, h = 0, w = 0;
};

// IDX image file (big-endian header, magic 0x00000803), optionally gzipped.
IdxImages read_idx_images(const std::string& path) {
  std::vector<uint8_t> bytes = io::read_file(path);
  if (io::is_gzip(bytes.data(), bytes.size())) bytes = io::gunzip(bytes);
  PAINT_CHECK_DATA(bytes.size() >= 16, path + ": truncated IDX header");
  PAINT_CHECK_DATA(read_be32(bytes.data()) == 0x00000803u,
                   path + ": not an IDX image file (bad magic)");
  IdxImages out;
  out.n = (int)read_be32(bytes.data() + 4);
  out.h = (int)read_be32(bytes.data() + 8);
  out.w = (int)read_be32(bytes.data() + 12);
  PAINT_CHECK_DATA(out.n > 0 && out.h > 0 && out.w > 0,
                   path + ": degenerate IDX dimensions");
  const size_t want = 16 + (size_t)out.n * out.h * out.w;
  PAINT_CHECK_DATA(bytes.size() >= want, path + ": IDX payload truncated");
  out.pixels = std::make_shared<std::vector<uint8_t>>(bytes.begin() + 16,
                                                      bytes.begin() + want);
  return out;
}

std::string find_idx_file(const std::string& dir, const std::string& stem) {
  for (const char* ext : {"", ".gz"}) {
    const std::string p = dir + "/" + stem + ext;
    if (fs::exists(p)) return p;
  }
  throw DataError("MNIST file " + stem + "[.gz] not found under " + dir);
}

std::function<Canvas()> idx_item(const IdxImages& imgs, int i, int res) {
  auto blob = imgs.pixels;
  const int h = imgs.h, w = imgs.w;
  return [blob, i, h, w, res]() {
    io::Image im;
    im.channels = 1;
    im.h = h;
    im.w = w;
    im.data.resize((size_t)h * w);
    const uint8_t* src = blob->data() + (size_t)i * h * w;
    for (size_t p = 0; p < (size_t)h * w; ++p) im.data[p] = src[p] / 255.0f;
    return resize_to_canvas(im, res);
  };
}

// Seeded permutation of 0..n-1.
std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[(int)rng.uniform_int(i + 1)]);
  return idx;
}

using ItemList = std::vector<std::function<Canvas()>>;

std::pair<ItemList, ItemList> mnist_items(const DatasetSpec& spec, Rng& rng) {
  PAINT_CHECK_DATA(fs::is_directory(spec.source),
                   "MNIST source must be a directory: " + spec.source);
  IdxImages train = read_idx_images(
      find_idx_file(spec.source, "train-images-idx3-ubyte"));
  IdxImages test =
      read_idx_images(find_idx_file(spec.source, "t10k-images-idx3-ubyte"));

  auto build = [&](const IdxImages& imgs, int limit) {
    ItemList items;
    std::vector<int> order = shuffled_indices(imgs.n, rng);
    const int m = limit < 0 ? imgs.n : std::min(limit, imgs.n);
    items.reserve(m);
    for (int i = 0; i < m; ++i)
      items.push_back(idx_item(imgs, order[i], spec.resolution));
    return items;
  };
  ItemList dtrain = build(train, spec.train_size);
  ItemList dtest = build(test, spec.test_size);
  return {std::move(dtrain), std::move(dtest)};
}

std::pair<ItemList, ItemList> folder_items(const DatasetSpec& spec, Rng& rng) {
  PAINT_CHECK_DATA(fs::is_directory(spec.source),
                   "image folder does not exist: " + spec.source);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(spec.source)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return (char)std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      files.push_back(e.path().string());
  }
  PAINT_CHECK_DATA(!files.empty(),
                   "no PNG/JPEG images under " + spec.source);
  std::sort(files.begin(), files.end());  // stable base order before the seed
  std::vector<int> order = shuffled_indices((int)files.size(), rng);

  const int total = (int)files.size();
  int n_test = spec.test_size < 0 ? total / 5 : std::min(spec.test_size, total);
  int n_train = spec.train_size < 0 ? total - n_test
                                    : std::min(spec.train_size, total - n_test);
  PAINT_CHECK_DATA(n_train >= 1 && n_test >= 1,
                   "split leaves an empty train or test set (" +
                       std::to_string(total) + " images)");

  const int res = spec.resolution;
  auto item = [res](const std::string& path) {
    return std::function<Canvas()>(
        [path, res]() { return resize_to_canvas(io::read_image(path), res); });
  };
  ItemList dtest, dtrain;
  for (int i = 0; i < n_test; ++i) dtest.push_back(item(files[order[i]]));
  for (int i = 0; i < n_train; ++i)
    dtrain.push_back(item(files[order[n_test + i]]));
  return {std::move(dtrain), std::move(dtest)};
}

}  // namespace

std::pair<Dataset, Dataset> load_dataset(const DatasetSpec& spec, Rng& rng) {
  PAINT_CHECK(spec.resolution >= 8, "dataset resolution must be >= 8");
  PAINT_CHECK(!spec.source.empty(), "dataset source path is empty");
  std::pair<ItemList, ItemList> items;
  if (spec.name == "mnist") {
    items = mnist_items(spec, rng);
  } else if (spec.name == "svhn" || spec.name == "celeba-subset" ||
             spec.name == "image-folder") {
    items = folder_items(spec, rng);
  } else {
    throw ContractError("unknown dataset name: " + spec.name);
  }
  return {Dataset(std::move(items.first), spec.resolution),
          Dataset(std::move(items.second), spec.resolution)};
}

std::vector<Canvas> synthetic_stroke_dataset(int n, int strokes_per_image,
                                             int resolution, Rng& rng,
                                             const StrokeDesign& design) {
  PAINT_CHECK(n >= 1, "synthetic dataset needs n >= 1");
  PAINT_CHECK(strokes_per_image >= 0, "strokes_per_image must be >= 0");
  std::vector<Canvas> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Canvas c = blank_canvas(resolution);
    for (int s = 0; s < strokes_per_image; ++s) {
      StrokeParams p = sample_random_stroke(rng);
      Tensor alpha = rasterize(p, design, resolution);
      c = composite(c, alpha, {p.red(), p.green(), p.blue()});
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace paint
