#include "kos/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "kos/errors.hpp"

namespace kos {

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t substitute = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, substitute});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("mse needs images of equal size");
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pa.size());
}

SummaryRow aggregate(std::span<const TrialMetrics> trials) {
  if (trials.empty()) throw EmptyInput("aggregate needs at least one trial");
  SummaryRow row;
  for (const auto& t : trials) {
    row.success_rate += t.success ? 1.0 : 0.0;
    row.mean_l_full += static_cast<double>(t.metrics.l_full);
    row.mean_l_crop += static_cast<double>(t.metrics.l_crop);
    row.mean_mse += t.metrics.mse_full;
    row.mean_time_s += t.metrics.elapsed_seconds;
  }
  const auto n = static_cast<double>(trials.size());
  row.success_rate /= n;
  row.mean_l_full /= n;
  row.mean_l_crop /= n;
  row.mean_mse /= n;
  row.mean_time_s /= n;
  return row;
}

}  // namespace kos
