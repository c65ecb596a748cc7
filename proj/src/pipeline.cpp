#include "kos/pipeline.hpp"

#include <algorithm>

#include "kos/errors.hpp"

namespace kos {

RegionSpec InkRegionDetector::detect(const Image& doc) const {
  std::size_t min_row = doc.height();
  std::size_t min_col = doc.width();
  for (std::size_t r = 0; r < doc.height(); ++r) {
    const auto row = doc.row(r);
    for (std::size_t c = 0; c < doc.width(); ++c) {
      if (row[c] < threshold_) {
        min_row = std::min(min_row, r);
        min_col = std::min(min_col, c);
        break;
      }
    }
  }
  if (min_row == doc.height()) throw NoInkFound("no pixel below the ink threshold");
  return anchor_region(min_row, min_col, doc.height(), doc.width(), padding_);
}

RegionSpec IdentityDetector::detect(const Image& doc) const {
  return RegionSpec{0, 0, doc.height(), doc.width()};
}

PipelineHandle::PipelineHandle(std::shared_ptr<const NetworkParams> params,
                               std::shared_ptr<const RegionDetector> detector)
    : params_(std::move(params)), detector_(std::move(detector)) {}

std::unique_ptr<PipelineHandle> PipelineHandle::fresh() const {
  return std::make_unique<PipelineHandle>(params_, detector_);
}

RegionSpec PipelineHandle::detect_region(const Image& doc) {
  ++h1_;
  return detector_->detect(doc);
}

DigitString PipelineHandle::recognize(const Image& crop) {
  ++h2_;
  return decode(forward(*params_, crop));
}

PipelineResult PipelineHandle::run_pipeline(const Image& doc) {
  const RegionSpec region = detect_region(doc);
  return {recognize(crop(doc, region)), region};
}

bool region_inside(const RegionSpec& region, const Image& doc) {
  return region.top + region.height <= doc.height() && region.left + region.width <= doc.width();
}

Image crop(const Image& doc, const RegionSpec& region) {
  if (!region_inside(region, doc)) throw OutOfBounds("crop window leaves the document");
  Image out(region.height, region.width);
  for (std::size_t r = 0; r < region.height; ++r) {
    const auto src = doc.row(region.top + r).subspan(region.left, region.width);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Image reinsert(const Image& doc, const RegionSpec& region, const Image& patch) {
  if (patch.height() != region.height || patch.width() != region.width) {
    throw DimensionMismatch("patch does not match the region size");
  }
  if (!region_inside(region, doc)) throw OutOfBounds("reinsert window leaves the document");
  Image out = doc;
  for (std::size_t r = 0; r < region.height; ++r) {
    const auto src = patch.row(r);
    auto dst = out.row(region.top + r).subspan(region.left, region.width);
    for (std::size_t c = 0; c < region.width; ++c) dst[c] = std::clamp(src[c], 0.0, 1.0);
  }
  return out;
}

}  // namespace kos
