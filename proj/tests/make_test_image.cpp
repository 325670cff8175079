// Writes a deterministic RGB test pattern: make_test_image <out.png> <width> <height>

#include <cstdlib>
#include <iostream>

#include "vehdet/image.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: make_test_image <out.png> <width> <height>\n";
    return 2;
  }
  const int w = std::atoi(argv[2]), h = std::atoi(argv[3]);
  if (w < 1 || h < 1) {
    std::cerr << "width and height must be positive\n";
    return 2;
  }
  vehdet::RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>((x * 7 + y) % 256);
      img.at(x, y, 1) = static_cast<std::uint8_t>((y * 3) % 256);
      img.at(x, y, 2) = ((x / 32 + y / 32) % 2) ? 220 : 30;
    }
  }
  vehdet::save_png(img, argv[1]);
  return 0;
}
