#ifndef KOS_IMAGE_HPP
#define KOS_IMAGE_HPP

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace kos {

// Row-major grayscale image. 1 is white paper, 0 is black ink.
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 1.0);
  Image(std::size_t height, std::size_t width, std::vector<double> pixels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }

  double& at(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }
  std::span<double> row(std::size_t r) { return {pixels_.data() + r * width_, width_}; }
  std::span<const double> row(std::size_t r) const {
    return {pixels_.data() + r * width_, width_};
  }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  void clamp_unit();
  double mean() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> pixels_;
};

// Binary PGM (P5, maxval 255). Intensities are clamped to [0,1] and
// quantized round-half-up.
std::string encode_pgm(const Image& image);
void write_pgm(const Image& image, const std::filesystem::path& path);

}  // namespace kos

#endif  // KOS_IMAGE_HPP
