#ifndef KOS_REGION_HPP
#define KOS_REGION_HPP

#include <cstddef>
#include <optional>

#include "kos/geometry.hpp"
#include "kos/image.hpp"

namespace kos {

// Fixed-size crop window; top/left is the only thing that varies in a run.
struct RegionSpec {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = kWindowHeight;
  std::size_t width = kWindowWidth;

  friend bool operator==(const RegionSpec&, const RegionSpec&) = default;
};

// Inclusive bounding box of ink pixels.
struct InkBox {
  std::size_t min_row;
  std::size_t min_col;
  std::size_t max_row;
  std::size_t max_col;
};

std::optional<InkBox> ink_bounds(const Image& image, double threshold = kInkThreshold);

// Window of the given size whose top-left sits `padding` pixels above/left of
// (min_row, min_col), shifted back inside the image when it would overhang.
// Throws OutOfBounds if the image is smaller than the window.
RegionSpec anchor_region(std::size_t min_row, std::size_t min_col, std::size_t image_height,
                         std::size_t image_width, std::size_t padding = kDetectorPadding,
                         std::size_t height = kWindowHeight, std::size_t width = kWindowWidth);

}  // namespace kos

#endif  // KOS_REGION_HPP
