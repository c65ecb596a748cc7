#ifndef KOS_TEST_FIXTURES_HPP
#define KOS_TEST_FIXTURES_HPP

#include <memory>

#include "kos/glyphs.hpp"
#include "kos/nn.hpp"
#include "kos/pipeline.hpp"

namespace kos::test {

// Untrained recognizer; random weights are easy to push to any target.
inline std::shared_ptr<const NetworkParams> random_recognizer(std::uint64_t seed = 0) {
  return std::make_shared<const NetworkParams>(NetworkParams::random(seed));
}

inline Image clean_window(const char* label = "079.12", std::uint64_t seed = 3) {
  const DocumentSample doc = render_document(DigitString(label), seed);
  return crop(doc.full_image, doc.true_region);
}

inline double linf(const Image& a, const Image& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.pixels()[i] - b.pixels()[i]));
  }
  return worst;
}

}  // namespace kos::test

#endif  // KOS_TEST_FIXTURES_HPP
