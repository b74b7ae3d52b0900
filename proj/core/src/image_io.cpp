#include "rblb/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>

namespace rblb {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Tensor load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("load_png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("load_png: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("load_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("load_png: failed to decode " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 8 || color_type != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("load_png: " + path +
                             " is not an 8-bit RGB PNG (bit depth " + std::to_string(bit_depth) +
                             ", color type " + std::to_string(color_type) + ")");
  }

  std::vector<png_byte> row(static_cast<std::size_t>(width) * 3);
  std::vector<float> values(static_cast<std::size_t>(3) * height * width);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (png_uint_32 y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < width; ++x) {
      const std::size_t pos = static_cast<std::size_t>(y) * width + x;
      values[pos] = static_cast<float>(row[x * 3 + 0]) / 255.0f;
      values[plane + pos] = static_cast<float>(row[x * 3 + 1]) / 255.0f;
      values[2 * plane + pos] = static_cast<float>(row[x * 3 + 2]) / 255.0f;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return Tensor::from_data(Shape{1, 3, static_cast<int>(height), static_cast<int>(width)},
                           std::move(values));
}

void save_png(const std::string& path, const Tensor& image) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) {
    throw std::invalid_argument("save_png: expected a 1x3xHxW tensor, got " + s.str());
  }

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("save_png: cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("save_png: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("save_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("save_png: failed to write " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(s.w), static_cast<png_uint_32>(s.h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const auto values = image.values();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  std::vector<png_byte> row(static_cast<std::size_t>(s.w) * 3);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      const std::size_t pos = static_cast<std::size_t>(y) * s.w + x;
      for (int c = 0; c < 3; ++c) {
        const float v = values[static_cast<std::size_t>(c) * plane + pos];
        // Half away from zero, then clamp to the byte range.
        const long byte = std::lround(static_cast<double>(v) * 255.0);
        row[static_cast<std::size_t>(x) * 3 + c] =
            static_cast<png_byte>(std::clamp(byte, 0L, 255L));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<std::string> list_pngs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("list_pngs: not a directory: " + dir);
  }
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rblb
