#include "kos/region.hpp"

#include <algorithm>

#include "kos/errors.hpp"

namespace kos {

std::optional<InkBox> ink_bounds(const Image& image, double threshold) {
  std::optional<InkBox> box;
  for (std::size_t r = 0; r < image.height(); ++r) {
    const auto row = image.row(r);
    for (std::size_t c = 0; c < image.width(); ++c) {
      if (!(row[c] < threshold)) continue;
      if (!box) {
        box = InkBox{r, c, r, c};
      } else {
        box->min_col = std::min(box->min_col, c);
        box->max_col = std::max(box->max_col, c);
        box->max_row = r;
      }
    }
  }
  return box;
}

RegionSpec anchor_region(std::size_t min_row, std::size_t min_col, std::size_t image_height,
                         std::size_t image_width, std::size_t padding, std::size_t height,
                         std::size_t width) {
  if (image_height < height || image_width < width) {
    throw OutOfBounds("image is smaller than the crop window");
  }
  RegionSpec region{min_row > padding ? min_row - padding : 0,
                    min_col > padding ? min_col - padding : 0, height, width};
  region.top = std::min(region.top, image_height - height);
  region.left = std::min(region.left, image_width - width);
  return region;
}

}  // namespace kos
