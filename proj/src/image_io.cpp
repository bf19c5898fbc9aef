#include "roadblocks/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

namespace roadblocks {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageIoError("cannot open '" + path + "'");
  return f;
}

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint8_t> bytes;  // big-endian samples when bit_depth == 16
};

Decoded decode(const std::string& path, bool keep16) {
  FilePtr f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageIoError("'" + path + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageIoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageIoError("png_create_info_struct failed");
  }
  Decoded out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("failed to decode '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16 && !keep16) png_set_strip_16(png);
  if (depth < 8 && keep16) png_set_expand(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encode(const std::string& path, int width, int height, int channels, int bit_depth,
            const std::vector<png_bytep>& rows) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageIoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageIoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("failed to encode '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(f.get()) != 0) throw ImageIoError("failed to flush '" + path + "'");
}

}  // namespace

ImagePlane<std::uint8_t> read_png(const std::string& path) {
  Decoded d = decode(path, false);
  return ImagePlane<std::uint8_t>(d.width, d.height, d.channels, std::move(d.bytes));
}

RgbImage read_rgb_png(const std::string& path) {
  ImagePlane<std::uint8_t> img = read_png(path);
  if (img.channels() == 3) return img;
  RgbImage rgb(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) rgb(x, y, c) = img(x, y, std::min(c, img.channels() - 1));
    }
  }
  return rgb;
}

Mask read_mask_png(const std::string& path) {
  ImagePlane<std::uint8_t> img = read_png(path);
  if (img.channels() == 1) return img;
  Mask m(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) m(x, y) = img(x, y, 0);
  }
  return m;
}

ImagePlane<std::uint16_t> read_png16(const std::string& path) {
  Decoded d = decode(path, true);
  ImagePlane<std::uint16_t> out(d.width, d.height);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t p = (static_cast<std::size_t>(y) * d.width + x) * d.channels;
      if (d.bit_depth == 16) {
        out(x, y) = static_cast<std::uint16_t>((d.bytes[2 * p] << 8) | d.bytes[2 * p + 1]);
      } else {
        out(x, y) = static_cast<std::uint16_t>(d.bytes[p] * 257);
      }
    }
  }
  return out;
}

void write_png(const ImagePlane<std::uint8_t>& image, const std::string& path) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ImageIoError("write_png: only 1- or 3-channel images are supported");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
  for (int y = 0; y < image.height(); ++y) rows[y] = const_cast<png_bytep>(image.row(y).data());
  encode(path, image.width(), image.height(), image.channels(), 8, rows);
}

void write_png16(const ImagePlane<std::uint16_t>& image, const std::string& path) {
  if (image.channels() != 1) throw ImageIoError("write_png16: only 1-channel images are supported");
  std::vector<std::uint8_t> bytes(image.pixel_count() * 2);
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    bytes[2 * p] = static_cast<std::uint8_t>(image.data()[p] >> 8);
    bytes[2 * p + 1] = static_cast<std::uint8_t>(image.data()[p] & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
  for (int y = 0; y < image.height(); ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * image.width() * 2;
  encode(path, image.width(), image.height(), 1, 16, rows);
}

}  // namespace roadblocks
