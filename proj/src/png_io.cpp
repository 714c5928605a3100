#include "gtex/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include <fmt/core.h>

#include "gtex/error.hpp"

namespace gtex {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw Error(ErrorKind::BadInput, fmt::format("png: {}", msg));
}
void png_warning_handler(png_structp, png_const_charp) {}

void write_impl(const std::filesystem::path& path, const Image& image, int bit_depth) {
  require(!image.empty(), "cannot write an empty image");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(ErrorKind::Io, fmt::format("cannot open '{}' for writing", path.string()));

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                            png_warning_handler);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  const int color = image.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, image.width(), image.height(), bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int bytes = bit_depth / 8;
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<png_byte> row(static_cast<std::size_t>(image.width()) * image.channels() * bytes);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        const double v = std::clamp(image(x, y, c), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * scale));
        const std::size_t at = (static_cast<std::size_t>(x) * image.channels() + c) * bytes;
        if (bytes == 2) {
          row[at] = static_cast<png_byte>(q >> 8);
          row[at + 1] = static_cast<png_byte>(q & 0xff);
        } else {
          row[at] = static_cast<png_byte>(q);
        }
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(ErrorKind::BadInput, fmt::format("cannot open '{}'", path.string()));
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    fail(ErrorKind::BadInput, fmt::format("'{}' is not a PNG file", path.string()));
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                           png_warning_handler);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // little-endian uint16 in memory
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int file_channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);

  std::vector<png_byte> buffer(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + rowbytes * y;
  png_read_image(png, rows.data());

  const int channels = file_channels >= 3 ? 3 : 1;
  const double scale = out_depth == 16 ? 65535.0 : 255.0;
  std::vector<double> values(static_cast<std::size_t>(width) * height * channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t src = static_cast<std::size_t>(x) * file_channels + c;
        double raw;
        if (out_depth == 16) {
          const auto* p = reinterpret_cast<const std::uint16_t*>(rows[y]);
          raw = p[src];
        } else {
          raw = rows[y][src];
        }
        values[(static_cast<std::size_t>(y) * width + x) * channels + c] = raw / scale;
      }
    }
  }
  return Image(width, height, channels, std::move(values));
}

void write_png(const std::filesystem::path& path, const Image& image) { write_impl(path, image, 8); }

void write_png16(const std::filesystem::path& path, const Image& image) {
  require(image.channels() == 1, "16-bit output is gray only");
  write_impl(path, image, 16);
}

}  // namespace gtex
