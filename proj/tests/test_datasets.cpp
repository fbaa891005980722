#include <doctest.h>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "paint/core/error.hpp"
#include "paint/core/io.hpp"
#include "paint/data/datasets.hpp"
#include "testutil.hpp"

using namespace paint;

namespace {

void push_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back((uint8_t)(v >> 24));
  out.push_back((uint8_t)(v >> 16));
  out.push_back((uint8_t)(v >> 8));
  out.push_back((uint8_t)v);
}

// IDX image file with n h*w images; pixel (i,r,c) = (i*31 + r*7 + c) mod 251.
void write_idx(const std::string& path, int n, int h, int w) {
  std::vector<uint8_t> bytes;
  push_be32(bytes, 0x00000803u);
  push_be32(bytes, (uint32_t)n);
  push_be32(bytes, (uint32_t)h);
  push_be32(bytes, (uint32_t)w);
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        bytes.push_back((uint8_t)((i * 31 + r * 7 + c) % 251));
  io::write_file_atomic(path, bytes.data(), bytes.size());
}

std::string mnist_fixture() {
  static std::string dir = [] {
    std::string d = testutil::scratch_dir("mnist_fixture");
    write_idx(d + "/train-images-idx3-ubyte", 12, 5, 7);
    write_idx(d + "/t10k-images-idx3-ubyte", 7, 5, 7);
    return d;
  }();
  return dir;
}

bool in_unit_range(const Canvas& c) {
  for (int64_t i = 0; i < c.numel(); ++i)
    if (c[i] < 0.0f || c[i] > 1.0f) return false;
  return true;
}

}  // namespace

TEST_CASE("default specs carry the per-dataset episode shape") {
  DatasetSpec m = default_spec("mnist");
  CHECK(m.horizon == 1);
  CHECK(m.bundle == 5);
  CHECK(default_spec("svhn").horizon == 8);
  CHECK(default_spec("celeba-subset").horizon == 40);
  CHECK(default_spec("image-folder").horizon == 40);
  CHECK_THROWS_AS(default_spec("imagenet64"), ContractError);
}

TEST_CASE("mnist: official split sizes, canvas form, seeded order") {
  DatasetSpec spec = default_spec("mnist");
  spec.source = mnist_fixture();
  spec.resolution = 16;

  Rng rng(5);
  auto [train, test] = load_dataset(spec, rng);
  CHECK(train.size() == 12);  // everything in the train file
  CHECK(test.size() == 7);    // everything in the official test file

  Canvas c = train.get(0);
  CHECK(c.ndim() == 3);
  CHECK(c.dim(0) == 3);
  CHECK(c.dim(1) == 16);
  CHECK(c.dim(2) == 16);
  CHECK(in_unit_range(c));
  // Grayscale replicated: the three channel planes are identical.
  const int64_t plane = 16 * 16;
  for (int64_t p = 0; p < plane; ++p) {
    CHECK(c[p] == c[plane + p]);
    CHECK(c[p] == c[2 * plane + p]);
  }

  // Same seed, same order; a different seed reorders.
  Rng rng2(5);
  auto [train2, test2] = load_dataset(spec, rng2);
  CHECK(testutil::max_abs_diff(train.get(0), train2.get(0)) == 0.0f);
  CHECK(testutil::max_abs_diff(test.get(3), test2.get(3)) == 0.0f);
  Rng rng3(99);
  auto [train3, test3] = load_dataset(spec, rng3);
  bool any_moved = false;
  for (int i = 0; i < train.size() && !any_moved; ++i)
    any_moved = testutil::max_abs_diff(train.get(i), train3.get(i)) > 0.0f;
  CHECK(any_moved);

  // Subsampling honors the requested sizes; take() materializes prefixes.
  spec.train_size = 4;
  spec.test_size = 2;
  Rng rng4(5);
  auto [small_train, small_test] = load_dataset(spec, rng4);
  CHECK(small_train.size() == 4);
  CHECK(small_test.size() == 2);
  CHECK(small_train.take().size() == 4);
  CHECK(small_train.take(2).size() == 2);
  CHECK(small_train.take(100).size() == 4);
  CHECK_THROWS_AS(small_train.get(4), ContractError);
}

TEST_CASE("mnist: missing or corrupt sources are data errors") {
  DatasetSpec spec = default_spec("mnist");
  spec.source = "/nonexistent/mnist";
  Rng rng(1);
  CHECK_THROWS_AS(load_dataset(spec, rng), DataError);

  const std::string dir = testutil::scratch_dir("mnist_bad");
  spec.source = dir;
  CHECK_THROWS_AS(load_dataset(spec, rng), DataError);  // files absent

  std::vector<uint8_t> junk{1, 2, 3, 4, 5};
  io::write_file_atomic(dir + "/train-images-idx3-ubyte", junk.data(),
                        junk.size());
  io::write_file_atomic(dir + "/t10k-images-idx3-ubyte", junk.data(),
                        junk.size());
  CHECK_THROWS_AS(load_dataset(spec, rng), DataError);  // truncated header

  std::vector<uint8_t> wrong;
  push_be32(wrong, 0x00000801u);  // label magic, not images
  push_be32(wrong, 3);
  push_be32(wrong, 1);
  push_be32(wrong, 1);
  wrong.resize(16 + 3);
  io::write_file_atomic(dir + "/train-images-idx3-ubyte", wrong.data(),
                        wrong.size());
  CHECK_THROWS_AS(load_dataset(spec, rng), DataError);
}

TEST_CASE("image folder: split arithmetic, disjointness, determinism") {
  const std::string dir = testutil::scratch_dir("folder_ds");
  // Six constant-colored canvases, distinguishable by their mean value.
  for (int i = 0; i < 6; ++i) {
    Canvas c = blank_canvas(8);
    for (int64_t p = 0; p < c.numel(); ++p) c[p] = (float)(i + 1) / 10.0f;
    write_canvas_png(dir + "/img" + std::to_string(i) + ".png", c);
  }
  io::write_text_atomic(dir + "/notes.txt", "not an image\n");

  DatasetSpec spec = default_spec("image-folder");
  spec.source = dir;
  spec.resolution = 8;
  spec.test_size = 2;

  Rng rng(7);
  auto [train, test] = load_dataset(spec, rng);
  CHECK(train.size() == 4);
  CHECK(test.size() == 2);

  auto key = [](const Canvas& c) { return (int)std::lround(c[0] * 10.0f); };
  std::set<int> seen;
  for (int i = 0; i < train.size(); ++i) seen.insert(key(train.get(i)));
  for (int i = 0; i < test.size(); ++i) {
    const int k = key(test.get(i));
    CHECK(seen.count(k) == 0);  // test member never appears in train
    seen.insert(k);
  }
  CHECK(seen.size() == 6);

  // Explicit train subsampling never overlaps the test share.
  spec.train_size = 3;
  Rng rng2(7);
  auto [tr2, te2] = load_dataset(spec, rng2);
  CHECK(tr2.size() == 3);
  CHECK(te2.size() == 2);
  CHECK(testutil::max_abs_diff(tr2.get(0), train.get(0)) == 0.0f);
  CHECK(testutil::max_abs_diff(te2.get(1), test.get(1)) == 0.0f);

  // svhn/celeba-subset run through the same folder path.
  DatasetSpec svhn = default_spec("svhn");
  svhn.source = dir;
  svhn.resolution = 8;
  svhn.test_size = 1;
  Rng rng3(9);
  auto [str, ste] = load_dataset(svhn, rng3);
  CHECK(str.size() == 5);
  CHECK(ste.size() == 1);

  DatasetSpec empty = default_spec("image-folder");
  empty.source = testutil::scratch_dir("folder_empty");
  Rng rng4(1);
  CHECK_THROWS_AS(load_dataset(empty, rng4), DataError);
  empty.source = "/nonexistent/folder";
  CHECK_THROWS_AS(load_dataset(empty, rng4), DataError);
}

TEST_CASE("synthetic strokes: exact-representability targets, reproducible") {
  Rng rng(11);
  std::vector<Canvas> blanks = synthetic_stroke_dataset(3, 0, 16, rng);
  REQUIRE(blanks.size() == 3);
  for (const Canvas& c : blanks)
    CHECK(testutil::max_abs_diff(c, blank_canvas(16)) == 0.0f);

  Rng ra(13), rb(13), rc(14);
  std::vector<Canvas> a = synthetic_stroke_dataset(4, 5, 16, ra);
  std::vector<Canvas> b = synthetic_stroke_dataset(4, 5, 16, rb);
  std::vector<Canvas> c = synthetic_stroke_dataset(4, 5, 16, rc);
  REQUIRE(a.size() == 4);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(in_unit_range(a[i]));
    CHECK(testutil::max_abs_diff(a[i], b[i]) == 0.0f);  // same seed
    CHECK(testutil::max_abs_diff(a[i], blank_canvas(16)) > 0.0f);
  }
  CHECK(testutil::max_abs_diff(a[0], c[0]) > 0.0f);  // different seed
  CHECK(testutil::max_abs_diff(a[0], a[1]) > 0.0f);  // fresh strokes per image

  Rng rd(15);
  CHECK_THROWS_AS(synthetic_stroke_dataset(0, 5, 16, rd), ContractError);
  CHECK_THROWS_AS(synthetic_stroke_dataset(2, -1, 16, rd), ContractError);
}
