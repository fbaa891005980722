#pragma once

#include <array>

#include "paint/core/io.hpp"
#include "paint/core/tensor.hpp"

namespace paint {

// A canvas is a [3,H,W] tensor in [0,1]; blank = all zeros (black).
using Canvas = Tensor;

Canvas blank_canvas(int resolution);
bool is_canvas(const Tensor& t);
int canvas_res(const Canvas& c);

// out[p,c] = canvas[p,c]*(1-alpha[p]) + color[c]*alpha[p]; inputs untouched.
Canvas composite(const Canvas& canvas, const Tensor& alpha,
                 const std::array<float, 3>& color);

// Mean over all pixels/channels of squared difference.
double l2_loss(const Canvas& a, const Canvas& b);

// Bilinear resize to [3,res,res]; grayscale replicated; values clamped to
// [0,1]. A [3,res,res] input in range comes back bit-equal.
Canvas resize_to_canvas(const io::Image& image, int resolution = 128);

// PNG round-trip (8-bit, rounded quantization).
void write_canvas_png(const std::string& path, const Canvas& c);
Canvas read_canvas_png(const std::string& path, int resolution);

}  // namespace paint
