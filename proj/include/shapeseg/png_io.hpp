#pragma once

// Minimal libpng wrappers: 16-bit and 8-bit grayscale, 8-bit RGB. Encoding
// happens in memory so callers can write files atomically.

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "shapeseg/errors.hpp"
#include "shapeseg/raster.hpp"

namespace shapeseg {

struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 1;   // 1 (gray) or 3 (RGB)
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;  // row-major, interleaved channels
};

namespace detail {

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const PngImage& img) {
  if (img.channels != 1 && img.channels != 3) throw ParameterError("PNG channels must be 1 or 3");
  if (img.bit_depth != 8 && img.bit_depth != 16) throw ParameterError("PNG bit depth must be 8 or 16");
  if (img.samples.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
    throw ContractError("PNG sample count does not match dimensions");

  std::string err;
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn, detail::png_warning_fn);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  const std::size_t bytes_per_sample = img.bit_depth / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * img.channels * bytes_per_sample;
  std::vector<std::uint8_t> row(row_bytes);

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("PNG encode failed: " + err);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + len);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), img.bit_depth,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    const auto* src = img.samples.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    for (std::size_t s = 0; s < static_cast<std::size_t>(img.width) * img.channels; ++s) {
      if (img.bit_depth == 16) {
        row[2 * s] = static_cast<std::uint8_t>(src[s] >> 8);  // PNG is big-endian
        row[2 * s + 1] = static_cast<std::uint8_t>(src[s] & 0xff);
      } else {
        row[s] = static_cast<std::uint8_t>(src[s]);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline PngImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG stream");
  struct Reader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
  } reader{bytes, 0};

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_fn, detail::png_warning_fn);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngImage img;
  std::vector<std::uint8_t> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed: " + err);
  }
  png_set_read_fn(png, &reader, [](png_structp p, png_bytep out, png_size_t len) {
    auto* r = static_cast<Reader*>(png_get_io_ptr(p));
    if (r->pos + len > r->data.size()) png_error(p, "unexpected end of PNG data");
    std::memcpy(out, r->data.data() + r->pos, len);
    r->pos += len;
  });
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.bit_depth = png_get_bit_depth(png, info);
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_error(png, "interlaced PNG not supported");
  if (color == PNG_COLOR_TYPE_GRAY)
    img.channels = 1;
  else if (color == PNG_COLOR_TYPE_RGB)
    img.channels = 3;
  else
    png_error(png, "only grayscale and RGB PNGs are supported");
  if (img.bit_depth != 8 && img.bit_depth != 16) png_error(png, "only 8- and 16-bit PNGs are supported");

  const std::size_t bps = static_cast<std::size_t>(img.bit_depth / 8);
  const std::size_t per_row = static_cast<std::size_t>(img.width) * img.channels;
  row.resize(per_row * bps);
  img.samples.resize(per_row * img.height);
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    auto* dst = img.samples.data() + static_cast<std::size_t>(y) * per_row;
    for (std::size_t s = 0; s < per_row; ++s)
      dst[s] = bps == 2 ? static_cast<std::uint16_t>((row[2 * s] << 8) | row[2 * s + 1]) : row[s];
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Writes via a sibling temporary file and a rename.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline void save_png(const std::filesystem::path& path, const PngImage& img) { write_file_atomic(path, encode_png(img)); }

inline PngImage load_png(const std::filesystem::path& path) {
  try {
    return decode_png(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace shapeseg
