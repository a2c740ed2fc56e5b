#include "gravis/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "gravis/errors.hpp"

namespace gravis {

namespace {

int read_ppm_int(std::istream& in, const std::string& path) {
  int ch = in.get();
  while (ch != EOF && std::isspace(ch)) ch = in.get();
  if (ch == '#')
    throw IoFailure(path + ": comments are not supported in PPM headers");
  if (ch == EOF || !std::isdigit(ch))
    throw IoFailure(path + ": malformed PPM header");
  int value = 0;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    if (value > 1 << 24) throw IoFailure(path + ": absurd PPM header value");
    ch = in.get();
  }
  if (ch != EOF) in.unget();
  return value;
}

}  // namespace

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6')
    throw IoFailure(path + ": not a binary PPM (P6) file");
  const int w = read_ppm_int(in, path);
  const int h = read_ppm_int(in, path);
  const int maxval = read_ppm_int(in, path);
  if (w <= 0 || h <= 0) throw IoFailure(path + ": non-positive dimensions");
  if (maxval != 255) throw IoFailure(path + ": only maxval 255 is supported");
  in.get();  // single whitespace byte after the header
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size())
    throw IoFailure(path + ": truncated pixel data");
  return img;
}

void save_ppm(const Image& img, const std::string& path) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3)
    throw ShapeMismatch("pixel buffer does not match image dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoFailure("short write to " + path);
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  Image out(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = std::clamp(fx - x0, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(x0, y0, c) * (1.0 - wx) + img.at(x1, y0, c) * wx;
        const double bot = img.at(x0, y1, c) * (1.0 - wx) + img.at(x1, y1, c) * wx;
        const double v = top * (1.0 - wy) + bot * wy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  return out;
}

}  // namespace gravis
