#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/tensor.hpp"

namespace svdp::png {

/// Raw decoded PNG: 1 (gray) or 3 (RGB) channels, 8 or 16 bits, interleaved.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void on_error(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
inline void on_warning(png_structp, png_const_charp) {}

}  // namespace detail

inline void write(const std::string& path, const Raster& r) {
  if (r.channels != 1 && r.channels != 3) throw InvalidInput("png: only gray or RGB rasters");
  if (r.bit_depth != 8 && r.bit_depth != 16) throw InvalidInput("png: bit depth must be 8 or 16");
  if (r.samples.size() != static_cast<std::size_t>(r.width) * r.height * r.channels) {
    throw InvalidInput("png: sample count does not match the raster size");
  }
  detail::File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("png: cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
  if (!png) throw IoError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), r.bit_depth,
               r.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t row_samples = static_cast<std::size_t>(r.width) * r.channels;
  const std::size_t bytes_per = r.bit_depth / 8;
  std::vector<png_byte> row(row_samples * bytes_per);
  for (int y = 0; y < r.height; ++y) {
    const auto* src = r.samples.data() + static_cast<std::size_t>(y) * row_samples;
    for (std::size_t i = 0; i < row_samples; ++i) {
      if (bytes_per == 1) {
        row[i] = static_cast<png_byte>(src[i]);
      } else {
        row[2 * i] = static_cast<png_byte>(src[i] >> 8);  // PNG is big-endian
        row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xff);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

inline Raster read(const std::string& path) {
  detail::File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("png: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
  if (!png) throw IoError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  Raster r;
  r.width = static_cast<int>(png_get_image_width(png, info));
  r.height = static_cast<int>(png_get_image_height(png, info));
  r.channels = png_get_channels(png, info);
  r.bit_depth = png_get_bit_depth(png, info);
  if (r.channels != 1 && r.channels != 3) throw IoError("png: unsupported channel layout in " + path);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> row(rowbytes);
  const std::size_t row_samples = static_cast<std::size_t>(r.width) * r.channels;
  r.samples.resize(row_samples * r.height);
  for (int y = 0; y < r.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    auto* dst = r.samples.data() + static_cast<std::size_t>(y) * row_samples;
    for (std::size_t i = 0; i < row_samples; ++i) {
      dst[i] = r.bit_depth == 16 ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]) : row[i];
    }
  }
  png_read_end(png, nullptr);
  return r;
}

inline std::uint16_t quantize(double v, double scale, double max_code) {
  return static_cast<std::uint16_t>(std::clamp(std::lround(v * scale), 0L, static_cast<long>(max_code)));
}

/// 8-bit RGB image from [0,1] planar channels.
template <typename T>
void write_rgb(const std::string& path, const Tensor3<T>& image) {
  if (image.channels() != 3) throw InvalidInput("png: RGB export needs 3 channels");
  Raster r{image.width(), image.height(), 3, 8, {}};
  const std::size_t n = image.plane_size();
  r.samples.resize(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) r.samples[3 * i + c] = quantize(image[c * n + i], 255.0, 255);
  }
  write(path, r);
}

template <typename T>
Tensor3<T> read_rgb(const std::string& path) {
  const auto r = read(path);
  if (r.channels != 3 || r.bit_depth != 8) throw IoError("png: " + path + " is not 8-bit RGB");
  Tensor3<T> image(3, r.height, r.width);
  const std::size_t n = image.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) image[c * n + i] = static_cast<T>(r.samples[3 * i + c] / 255.0);
  }
  return image;
}

/// 8-bit gray image whose values are class indices.
inline void write_labels(const std::string& path, const LabelMap& labels) {
  Raster r{labels.width(), labels.height(), 1, 8, {}};
  r.samples.reserve(labels.size());
  for (int v : labels.data()) {
    if (v < 0 || v > 255) throw InvalidInput("png: label out of the 8-bit range");
    r.samples.push_back(static_cast<std::uint16_t>(v));
  }
  write(path, r);
}

inline LabelMap read_labels(const std::string& path) {
  const auto r = read(path);
  if (r.channels != 1 || r.bit_depth != 8) throw IoError("png: " + path + " is not an 8-bit label map");
  LabelMap labels(r.height, r.width);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = r.samples[i];
  return labels;
}

/// 8-bit mask: 255 where set.
inline void write_mask(const std::string& path, const Mask& mask) {
  Raster r{mask.width(), mask.height(), 1, 8, {}};
  for (auto v : mask.data()) r.samples.push_back(v ? 255 : 0);
  write(path, r);
}

/// 16-bit gray with code = round(value * scale).
template <typename T>
void write_scalar16(const std::string& path, const Grid<T>& grid, double scale) {
  Raster r{grid.width(), grid.height(), 1, 16, {}};
  for (auto v : grid.data()) r.samples.push_back(quantize(v, scale, 65535));
  write(path, r);
}

template <typename T>
Grid<T> read_scalar16(const std::string& path, double scale) {
  const auto r = read(path);
  if (r.channels != 1 || r.bit_depth != 16) throw IoError("png: " + path + " is not a 16-bit gray map");
  Grid<T> grid(r.height, r.width);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<T>(r.samples[i] / scale);
  return grid;
}

}  // namespace svdp::png
