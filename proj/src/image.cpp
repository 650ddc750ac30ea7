#include "geeco/image.hpp"

#include <cmath>
#include <fstream>

#include "geeco/param_store.hpp"  // IoError

namespace geeco::img {

void write_ppm(const dynimg::Frame& frame, const std::string& path) {
  if (frame.shape.size() != 3 || frame.dim(0) != 3)
    throw std::invalid_argument("write_ppm: expects a [3,h,w] frame");
  const int h = frame.dim(1), w = frame.dim(2);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_ppm: cannot open " + path);
  f << "P6\n" << w << " " << h << "\n255\n";
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::min(std::max(frame.at3(c, y, x), 0.0f), 1.0f);
        f.put(static_cast<char>(std::lround(v * 255.0f)));
      }
  if (!f) throw IoError("write_ppm: write failure at " + path);
}

dynimg::Frame read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_ppm: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
    throw IoError("read_ppm: unsupported format in " + path);
  f.get();  // single whitespace after the header
  dynimg::Frame frame({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        frame.at3(c, y, x) = static_cast<float>(static_cast<unsigned char>(f.get())) / 255.0f;
  if (!f) throw IoError("read_ppm: truncated file " + path);
  return frame;
}

}  // namespace geeco::img
