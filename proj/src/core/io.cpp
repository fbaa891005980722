#include "paint/core/io.hpp"

#include <jpeglib.h>
#include <png.h>
#include <zlib.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "paint/core/error.hpp"

namespace paint::io {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  PAINT_CHECK_DATA(f.good(), "cannot open file: " + path);
  f.seekg(0, std::ios::end);
  auto n = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes((size_t)n);
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  PAINT_CHECK_DATA(f.good(), "short read: " + path);
  return bytes;
}

void write_file_atomic(const std::string& path, const void* data, size_t n) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    PAINT_CHECK_DATA(f.good(), "cannot open for write: " + tmp.string());
    f.write(reinterpret_cast<const char*>(data), (std::streamsize)n);
    f.flush();
    PAINT_CHECK_DATA(f.good(), "short write: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

bool is_gzip(const uint8_t* bytes, size_t n) {
  return n >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<uint8_t> gunzip(const std::vector<uint8_t>& in) {
  z_stream zs{};
  PAINT_CHECK_DATA(inflateInit2(&zs, 15 + 16) == Z_OK, "zlib init failed");
  std::vector<uint8_t> out;
  out.reserve(in.size() * 4);
  uint8_t buf[1 << 16];
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = (uInt)in.size();
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError("gzip decompression failed");
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

static Image from_rgb8(const uint8_t* px, int H, int W, int C) {
  Image img;
  img.channels = C;
  img.h = H;
  img.w = W;
  img.data.resize((size_t)C * H * W);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j)
      for (int c = 0; c < C; ++c)
        img.data[((size_t)c * H + i) * W + j] =
            px[((size_t)i * W + j) * C + c] / 255.0f;
  return img;
}

static Image decode_png(const uint8_t* bytes, size_t n) {
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  PAINT_CHECK_DATA(png_image_begin_read_from_memory(&pi, bytes, n),
                   "bad PNG stream");
  const bool gray = (pi.format & PNG_FORMAT_FLAG_COLOR) == 0 &&
                    (pi.format & PNG_FORMAT_FLAG_ALPHA) == 0;
  pi.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int C = gray ? 1 : 3;
  std::vector<uint8_t> px((size_t)PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, px.data(), 0, nullptr)) {
    png_image_free(&pi);
    throw DataError("PNG decode failed");
  }
  return from_rgb8(px.data(), (int)pi.height, (int)pi.width, C);
}

namespace {
struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jmp;
};
void jpeg_err_exit(j_common_ptr cinfo) {
  std::longjmp(reinterpret_cast<JpegErr*>(cinfo->err)->jmp, 1);
}
}  // namespace

static Image decode_jpeg(const uint8_t* bytes, size_t n) {
  jpeg_decompress_struct cinfo{};
  JpegErr err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_err_exit;
  if (setjmp(err.jmp)) {
    jpeg_destroy_decompress(&cinfo);
    throw DataError("JPEG decode failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, const_cast<uint8_t*>(bytes), (unsigned long)n);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const int W = (int)cinfo.output_width, H = (int)cinfo.output_height,
            C = cinfo.output_components;
  std::vector<uint8_t> px((size_t)H * W * C);
  while (cinfo.output_scanline < cinfo.output_height) {
    uint8_t* row = px.data() + (size_t)cinfo.output_scanline * W * C;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_rgb8(px.data(), H, W, C);
}

Image decode_image(const uint8_t* bytes, size_t n) {
  PAINT_CHECK_DATA(n >= 8, "image stream too short");
  static const uint8_t png_magic[4] = {0x89, 'P', 'N', 'G'};
  if (std::memcmp(bytes, png_magic, 4) == 0) return decode_png(bytes, n);
  if (bytes[0] == 0xFF && bytes[1] == 0xD8) return decode_jpeg(bytes, n);
  throw DataError("unrecognized image format (expect PNG or JPEG)");
}

Image read_image(const std::string& path) {
  auto bytes = read_file(path);
  try {
    return decode_image(bytes.data(), bytes.size());
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + ": " + path);
  }
}

std::vector<uint8_t> encode_png(const float* chw, int C, int H, int W) {
  PAINT_CHECK(C == 1 || C == 3, "PNG writer expects 1 or 3 channels");
  std::vector<uint8_t> px((size_t)H * W * C);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j)
      for (int c = 0; c < C; ++c) {
        float v = chw[((size_t)c * H + i) * W + j];
        v = std::fmin(1.0f, std::fmax(0.0f, v));
        px[((size_t)i * W + j) * C + c] = (uint8_t)std::lround(v * 255.0f);
      }
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  pi.width = (png_uint_32)W;
  pi.height = (png_uint_32)H;
  pi.format = C == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  PAINT_CHECK_DATA(png_image_write_to_memory(&pi, nullptr, &size, 0, px.data(),
                                             0, nullptr),
                   "PNG size probe failed");
  std::vector<uint8_t> out(size);
  PAINT_CHECK_DATA(png_image_write_to_memory(&pi, out.data(), &size, 0,
                                             px.data(), 0, nullptr),
                   "PNG encode failed");
  out.resize(size);
  return out;
}

void write_png(const std::string& path, const float* chw, int C, int H,
               int W) {
  auto bytes = encode_png(chw, C, H, W);
  write_file_atomic(path, bytes.data(), bytes.size());
}

}  // namespace paint::io
