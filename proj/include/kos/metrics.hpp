#ifndef KOS_METRICS_HPP
#define KOS_METRICS_HPP

#include <cstddef>
#include <span>
#include <string_view>

#include "kos/image.hpp"

namespace kos {

struct MetricBundle {
  std::size_t l_full = 0;   // edit distance, target vs full-pipeline output
  std::size_t l_crop = 0;   // edit distance, target vs h2 on the attacked crop
  double mse_full = 0.0;    // against the original document
  double elapsed_seconds = 0.0;
};

// Unit-cost edit distance (insert, delete, substitute).
std::size_t levenshtein(std::string_view a, std::string_view b);

// Mean squared pixel difference. Throws DimensionMismatch.
double mse(const Image& a, const Image& b);

struct TrialMetrics {
  bool success = false;
  MetricBundle metrics;
};

struct SummaryRow {
  double success_rate = 0.0;
  double mean_l_full = 0.0;
  double mean_l_crop = 0.0;
  double mean_mse = 0.0;
  double mean_time_s = 0.0;
};

// Means over every trial, failures included. Throws EmptyInput.
SummaryRow aggregate(std::span<const TrialMetrics> trials);

}  // namespace kos

#endif  // KOS_METRICS_HPP
