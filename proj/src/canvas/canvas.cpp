#include "paint/canvas/canvas.hpp"

#include <algorithm>

#include "paint/core/error.hpp"
#include "paint/kernels/kernels.hpp"

namespace paint {

Canvas blank_canvas(int resolution) {
  PAINT_CHECK(resolution >= 8, "canvas resolution must be >= 8");
  return Tensor::zeros({3, resolution, resolution});
}

bool is_canvas(const Tensor& t) {
  return t.defined() && t.ndim() == 3 && t.dim(0) == 3 && t.dim(1) == t.dim(2);
}

int canvas_res(const Canvas& c) {
  PAINT_CHECK(is_canvas(c), "not a canvas");
  return c.dim(1);
}

Canvas composite(const Canvas& canvas, const Tensor& alpha,
                 const std::array<float, 3>& color) {
  PAINT_CHECK(is_canvas(canvas), "composite: bad canvas");
  PAINT_CHECK(alpha.ndim() == 2 && alpha.dim(0) == canvas.dim(1) &&
                  alpha.dim(1) == canvas.dim(2),
              "composite: canvas/alpha shape mismatch");
  for (float c : color)
    PAINT_CHECK(c >= 0.0f && c <= 1.0f, "composite: color outside [0,1]");
  const int64_t hw = alpha.numel();
  Canvas out(canvas.shape());
  for (int c = 0; c < 3; ++c) {
    const float* src = canvas.data() + c * hw;
    float* dst = out.data() + c * hw;
    const float col = color[(size_t)c];
    const float* A = alpha.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < hw; ++i)
      dst[i] = src[i] * (1.0f - A[i]) + col * A[i];
  }
  return out;
}

double l2_loss(const Canvas& a, const Canvas& b) {
  PAINT_CHECK(a.same_shape(b), "l2_loss: shape mismatch");
  const int64_t n = a.numel();
  // Same fixed-block pattern as kern::reduce_sum: deterministic regardless of
  // thread count.
  constexpr int64_t kBlock = 4096;
  const int64_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial((size_t)nblocks);
#pragma omp parallel for schedule(static)
  for (int64_t blk = 0; blk < nblocks; ++blk) {
    double s = 0.0;
    int64_t hi = std::min(n, (blk + 1) * kBlock);
    for (int64_t i = blk * kBlock; i < hi; ++i) {
      double d = (double)a[i] - b[i];
      s += d * d;
    }
    partial[(size_t)blk] = s;
  }
  double s = 0.0;
  for (int64_t blk = 0; blk < nblocks; ++blk) s += partial[(size_t)blk];
  return s / (double)n;
}

Canvas resize_to_canvas(const io::Image& image, int resolution) {
  PAINT_CHECK_DATA(image.h > 0 && image.w > 0 && !image.data.empty(),
                   "resize_to_canvas: empty image");
  PAINT_CHECK_DATA(image.channels == 1 || image.channels == 3,
                   "resize_to_canvas: expected 1 or 3 channels");
  Canvas out(std::vector<int>{3, resolution, resolution});
  const int64_t hw = (int64_t)resolution * resolution;
  if (image.channels == 3) {
    kern::bilinear_resize(image.data.data(), 3, image.h, image.w, out.data(),
                          resolution, resolution);
  } else {
    kern::bilinear_resize(image.data.data(), 1, image.h, image.w, out.data(),
                          resolution, resolution);
    std::copy_n(out.data(), hw, out.data() + hw);
    std::copy_n(out.data(), hw, out.data() + 2 * hw);
  }
  kern::clamp01(out.data(), out.numel());
  return out;
}

void write_canvas_png(const std::string& path, const Canvas& c) {
  PAINT_CHECK(is_canvas(c), "write_canvas_png: bad canvas");
  io::write_png(path, c.data(), 3, c.dim(1), c.dim(2));
}

Canvas read_canvas_png(const std::string& path, int resolution) {
  return resize_to_canvas(io::read_image(path), resolution);
}

}  // namespace paint
