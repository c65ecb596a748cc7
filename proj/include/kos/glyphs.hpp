#ifndef KOS_GLYPHS_HPP
#define KOS_GLYPHS_HPP

#include <cstdint>
#include <vector>

#include "kos/digit_string.hpp"
#include "kos/image.hpp"
#include "kos/region.hpp"

namespace kos {

// Print levels. Strokes and paper are grey rather than 0/1, as on a scanned
// form. The one-pixel ring drawn around every stroke sits just above the ink
// threshold, so a bounded perturbation can move the detector's ink boundary.
inline constexpr double kInkLevel = 0.2;
inline constexpr double kPaperLevel = 0.88;
inline constexpr double kHaloLevel = 0.62;

struct GlyphStyle {
  int jitter = 2;             // max |shift| in pixels, per axis
  double noise = 0.1;         // additive uniform noise amplitude
};

// Noise-free, unshifted kCellHeight x kCellWidth bitmap.
Image glyph_template(char symbol);

// Throws UnknownSymbol for characters outside the alphabet.
Image render_glyph(char symbol, std::uint64_t jitter_seed, const GlyphStyle& style = {});

// kStripHeight x kStripWidth strip of kCellCount glyphs.
Image render_strip(const DigitString& label, std::uint64_t seed, const GlyphStyle& style = {});

struct DocumentSample {
  Image full_image;
  RegionSpec true_region;
  DigitString label;
  std::uint64_t seed;
};

// White kDocHeight x kDocWidth page with light speckle and the label's strip
// at a seeded location. true_region is the window the ink detector yields.
DocumentSample render_document(const DigitString& label, std::uint64_t placement_seed);

struct LabeledCrop {
  Image crop;
  DigitString label;
};

// Sample i is rendered from seed + i with a uniformly random label.
// Throws EmptyInput for n == 0.
std::vector<LabeledCrop> make_training_set(std::size_t n, std::uint64_t seed);

DigitString random_label(std::uint64_t seed);

}  // namespace kos

#endif  // KOS_GLYPHS_HPP
