#ifndef KOS_PIPELINE_HPP
#define KOS_PIPELINE_HPP

#include <atomic>
#include <cstdint>
#include <memory>

#include "kos/digit_string.hpp"
#include "kos/image.hpp"
#include "kos/nn.hpp"
#include "kos/region.hpp"

namespace kos {

// First stage (h1). Only reachable through PipelineHandle.
class RegionDetector {
 public:
  virtual ~RegionDetector() = default;
  virtual RegionSpec detect(const Image& doc) const = 0;
};

// Anchors the recognizer window at the minimal ink row and column.
class InkRegionDetector final : public RegionDetector {
 public:
  explicit InkRegionDetector(double threshold = kInkThreshold,
                             std::size_t padding = kDetectorPadding)
      : threshold_(threshold), padding_(padding) {}

  // Throws NoInkFound on a blank document.
  RegionSpec detect(const Image& doc) const override;

 private:
  double threshold_;
  std::size_t padding_;
};

// Test double: the document already is the window, h1 is the identity.
class IdentityDetector final : public RegionDetector {
 public:
  RegionSpec detect(const Image& doc) const override;
};

struct PipelineResult {
  DigitString prediction;
  RegionSpec region;
};

struct QueryCounts {
  std::uint64_t h1 = 0;
  std::uint64_t h2 = 0;
  friend bool operator==(const QueryCounts&, const QueryCounts&) = default;
};

// The system under attack, h2(h1(x)), with per-stage query accounting.
// Recognizer weights are exposed (h2 is white-box); the detector is not.
class PipelineHandle {
 public:
  explicit PipelineHandle(std::shared_ptr<const NetworkParams> params,
                          std::shared_ptr<const RegionDetector> detector =
                              std::make_shared<InkRegionDetector>());

  PipelineHandle(const PipelineHandle&) = delete;
  PipelineHandle& operator=(const PipelineHandle&) = delete;

  // Same models, zeroed counters.
  std::unique_ptr<PipelineHandle> fresh() const;

  RegionSpec detect_region(const Image& doc);
  DigitString recognize(const Image& crop);
  PipelineResult run_pipeline(const Image& doc);

  const NetworkParams& recognizer() const { return *params_; }
  QueryCounts counts() const { return {h1_.load(), h2_.load()}; }

 private:
  std::shared_ptr<const NetworkParams> params_;
  std::shared_ptr<const RegionDetector> detector_;
  std::atomic<std::uint64_t> h1_{0};
  std::atomic<std::uint64_t> h2_{0};
};

// Exact pixel copy of the window. Throws OutOfBounds.
Image crop(const Image& doc, const RegionSpec& region);

// Copy of doc with the window overwritten by patch, clamped to [0,1].
// Throws DimensionMismatch or OutOfBounds.
Image reinsert(const Image& doc, const RegionSpec& region, const Image& patch);

// Same window position. Sizes are fixed within a run.
inline bool same_domain(const RegionSpec& a, const RegionSpec& b) {
  return a.top == b.top && a.left == b.left;
}

bool region_inside(const RegionSpec& region, const Image& doc);

}  // namespace kos

#endif  // KOS_PIPELINE_HPP
