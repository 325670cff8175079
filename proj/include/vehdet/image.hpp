#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vehdet {

/// 8-bit interleaved RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  ///< width * height * 3 bytes

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0);

  [[nodiscard]] std::uint8_t at(int x, int y, int channel) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + channel];
  }
  std::uint8_t& at(int x, int y, int channel) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + channel];
  }

  /// Copy of the window [x0, x0 + w) x [y0, y0 + h).
  [[nodiscard]] RgbImage crop(int x0, int y0, int w, int h) const;
};

/// Reads an 8-bit (or 16-bit, downscaled) PNG; gray and alpha channels are
/// converted to RGB.
RgbImage load_png(const std::filesystem::path& path);
void save_png(const RgbImage& image, const std::filesystem::path& path);

}  // namespace vehdet
