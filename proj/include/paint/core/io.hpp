#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace paint::io {

// Planar CHW image, values in [0,1].
struct Image {
  int channels = 0;
  int h = 0;
  int w = 0;
  std::vector<float> data;
};

// Reads PNG or JPEG (dispatch on magic bytes). Grayscale stays 1-channel.
Image read_image(const std::string& path);
Image decode_image(const uint8_t* bytes, size_t n);

// 8-bit PNG, C in {1,3}, values rounded; written atomically (tmp + rename).
void write_png(const std::string& path, const float* chw, int C, int H, int W);
std::vector<uint8_t> encode_png(const float* chw, int C, int H, int W);

std::vector<uint8_t> read_file(const std::string& path);
void write_file_atomic(const std::string& path, const void* data, size_t n);
void write_text_atomic(const std::string& path, const std::string& text);

bool is_gzip(const uint8_t* bytes, size_t n);
std::vector<uint8_t> gunzip(const std::vector<uint8_t>& in);

}  // namespace paint::io
