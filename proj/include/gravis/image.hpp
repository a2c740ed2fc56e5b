#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gravis {

// 8-bit RGB image, row-major interleaved.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool operator==(const Image& other) const = default;
};

// Binary PPM (P6), 8-bit, no comments. Throws IoFailure on malformed input
// or filesystem errors.
Image load_ppm(const std::string& path);
void save_ppm(const Image& img, const std::string& path);

Image resize_bilinear(const Image& img, int out_w, int out_h);
Image flip_horizontal(const Image& img);

}  // namespace gravis
