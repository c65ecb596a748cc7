#include "kos/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "kos/errors.hpp"

namespace kos {

Image::Image(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), pixels_(height * width, fill) {}

Image::Image(std::size_t height, std::size_t width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (pixels_.size() != height * width) {
    throw DimensionMismatch("image pixel count does not match " + std::to_string(height) +
                            "x" + std::to_string(width));
  }
}

void Image::clamp_unit() {
  for (double& p : pixels_) p = std::clamp(p, 0.0, 1.0);
}

double Image::mean() const {
  if (pixels_.empty()) return 0.0;
  return std::accumulate(pixels_.begin(), pixels_.end(), 0.0) /
         static_cast<double>(pixels_.size());
}

std::string encode_pgm(const Image& image) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + image.size());
  for (double p : image.pixels()) {
    const double scaled = std::clamp(p, 0.0, 1.0) * 255.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::floor(scaled + 0.5))));
  }
  return out;
}

void write_pgm(const Image& image, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IOFailure("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_pgm(image);
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw IOFailure("short write to " + path.string());
}

}  // namespace kos
