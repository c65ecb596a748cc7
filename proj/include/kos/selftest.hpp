#ifndef KOS_SELFTEST_HPP
#define KOS_SELFTEST_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kos/digit_string.hpp"
#include "kos/image.hpp"
#include "kos/nn.hpp"
#include "kos/region.hpp"

namespace kos {

// Reference implementations written independently of the production code,
// kept deliberately naive.
namespace oracle {

// Plain exponential recursion over prefixes.
std::size_t recursive_levenshtein(std::string_view a, std::string_view b);

// Full pixel scan for the detector's anchored window; nullopt without ink.
std::optional<RegionSpec> brute_force_region(const Image& doc, double threshold,
                                             std::size_t padding);

struct GradientCheck {
  std::size_t coordinates = 0;
  double worst_relative_error = 0.0;
};

// Five-point central differences on the summed cross-entropy. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradientCheck check_input_gradient(const NetworkParams& params, const Image& crop,
                                   const DigitString& target, std::size_t coordinates,
                                   std::uint64_t seed, double step = 1e-3, double floor = 1e-6);
GradientCheck check_param_gradient(const NetworkParams& params, const Image& crop,
                                   const DigitString& target, std::size_t coordinates,
                                   std::uint64_t seed, double step = 1e-3, double floor = 1e-6);

// Uniform random image in [0,1].
Image random_image(std::size_t height, std::size_t width, std::uint64_t seed);

}  // namespace oracle

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Fast oracle and property checks that need no trained recognizer.
std::vector<CheckResult> run_selftest();

}  // namespace kos

#endif  // KOS_SELFTEST_HPP
