#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mug::image {

/// 8-bit interleaved RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  ///< width*height*3

  std::uint8_t at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

/// Decodes JPEG (.jpg/.jpeg) or binary PPM (.ppm). Grayscale input is
/// expanded to three channels. Throws ParseError when the file cannot be
/// decoded.
Image load(const std::filesystem::path& path);

void save_jpeg(const std::filesystem::path& path, const Image& img, int quality = 95);
void save_ppm(const std::filesystem::path& path, const Image& img);

/// Bilinear resample to side×side, channel-planar, values scaled to [0,1].
/// Output layout: [channel][y][x].
std::vector<double> resize_planar(const Image& img, int side);

/// Mean over all pixels and channels on the 0–255 scale.
double mean_intensity(const Image& img);

}  // namespace mug::image
