#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "roadblocks/types.hpp"

namespace roadblocks {

struct ImageIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Decodes a PNG to 8 bits per sample. Palette and gray inputs keep their
/// native channel count (1 for gray, 3 for palette/RGB); alpha is dropped.
ImagePlane<std::uint8_t> read_png(const std::string& path);

/// Decodes a PNG and expands it to 3-channel RGB.
RgbImage read_rgb_png(const std::string& path);

/// Decodes a PNG and keeps only the first channel.
Mask read_mask_png(const std::string& path);

/// Decodes a 1-channel PNG at 16 bits per sample (8-bit inputs are scaled).
ImagePlane<std::uint16_t> read_png16(const std::string& path);

/// Writes a 1- or 3-channel 8-bit PNG.
void write_png(const ImagePlane<std::uint8_t>& image, const std::string& path);

/// Writes a 1-channel 16-bit PNG.
void write_png16(const ImagePlane<std::uint16_t>& image, const std::string& path);

}  // namespace roadblocks
