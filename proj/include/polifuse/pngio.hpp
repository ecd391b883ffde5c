#ifndef POLIFUSE_PNGIO_HPP_
#define POLIFUSE_PNGIO_HPP_

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "polifuse/common.hpp"

namespace polifuse {

// Interleaved RGB raster with channel values in [0, 1].
template <typename S>
struct Image {
  int height = 0;
  int width = 0;
  std::vector<S> data;  // size height * width * 3, index (y * width + x) * 3 + c

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, S(0)) {}

  S& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  S at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool empty() const { return data.empty(); }

  template <typename T>
  Image<T> cast() const {
    Image<T> out(height, width);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

namespace detail {

struct PngCloser {
  std::FILE* f = nullptr;
  ~PngCloser() {
    if (f) std::fclose(f);
  }
};

}  // namespace detail

// Reads an 8-bit PNG, expanding palette/gray/alpha variants to plain RGB.
template <typename S = float>
Image<S> read_png(const std::string& path) {
  detail::PngCloser file{std::fopen(path.c_str(), "rb")};
  if (!file.f) throw ValidationError("cannot open image " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("malformed PNG " + path);
  }

  png_init_io(png, file.f);
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int h = static_cast<int>(png_get_image_height(png, info));
  const int w = static_cast<int>(png_get_image_width(png, info));
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("unsupported PNG channel layout in " + path);
  }

  std::vector<png_byte> raw(static_cast<std::size_t>(h) * w * 3);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = raw.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image<S> img(h, w);
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = static_cast<S>(raw[i]) / S(255);
  return img;
}

template <typename S>
void write_png(const std::string& path, const Image<S>& img) {
  if (img.height <= 0 || img.width <= 0) throw ValidationError("write_png: empty image");
  detail::PngCloser file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw ValidationError("cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG write failed for " + path);
  }

  png_init_io(png, file.f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(img.at(y, x, c)), 0.0, 1.0);
        row[static_cast<std::size_t>(x) * 3 + c] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Bilinear resampling with half-pixel centers, so a same-size resize is the
// identity. Samples outside the source are clamped to the border.
template <typename S>
Image<S> bilinear_resize(const Image<S>& src, int out_h, int out_w) {
  if (src.empty()) throw ValidationError("bilinear_resize: empty source");
  if (out_h <= 0 || out_w <= 0) throw ValidationError("bilinear_resize: bad target size");
  Image<S> dst(out_h, out_w);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    if (y0 < 0) y0 = 0, wy = 0.0;
    if (y0 >= src.height - 1) y0 = src.height - 1, wy = 0.0;
    const int y1 = std::min(y0 + 1, src.height - 1);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      if (x0 < 0) x0 = 0, wx = 0.0;
      if (x0 >= src.width - 1) x0 = src.width - 1, wx = 0.0;
      const int x1 = std::min(x0 + 1, src.width - 1);
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        dst.at(y, x, c) = static_cast<S>((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return dst;
}

// Integer crop clamped to the image bounds.
template <typename S>
Image<S> crop(const Image<S>& src, int y0, int x0, int h, int w) {
  if (src.empty()) throw ValidationError("crop: empty source");
  y0 = std::clamp(y0, 0, src.height - 1);
  x0 = std::clamp(x0, 0, src.width - 1);
  h = std::clamp(h, 1, src.height - y0);
  w = std::clamp(w, 1, src.width - x0);
  Image<S> out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(y0 + y, x0 + x, c);
  return out;
}

}  // namespace polifuse

#endif  // POLIFUSE_PNGIO_HPP_
