#include "kos/glyphs.hpp"

#include <array>
#include <string_view>

#include "kos/errors.hpp"
#include "kos/rng.hpp"

namespace kos {

namespace {

constexpr std::size_t kCoreRows = 20;
constexpr std::size_t kCoreCols = 14;
constexpr std::size_t kCoreTop = 4;
constexpr std::size_t kCoreLeft = 3;

using Core = std::array<std::string_view, kCoreRows>;

// Stroke cores, '#' is ink. Index order follows kAlphabet.
constexpr std::array<Core, kNumClasses> kCores = {{
    {"....######....",
     "..##########..",
     ".####....####.",
     ".###......###.",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     ".###......###.",
     ".####....####.",
     "..##########..",
     "....######....",
     ".............."},
    {".....####.....",
     "....#####.....",
     "...######.....",
     "..###.###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "......###.....",
     "..#########...",
     "..#########..."},
    {"...########...",
     "..##########..",
     ".###......###.",
     "###........###",
     "...........###",
     "...........###",
     "..........###.",
     ".........###..",
     "........###...",
     ".......###....",
     "......###.....",
     ".....###......",
     "....###.......",
     "...###........",
     "..###.........",
     ".###..........",
     "###...........",
     "###...........",
     "##############",
     "##############"},
    {"..##########..",
     ".############.",
     "###........###",
     "...........###",
     "...........###",
     "...........###",
     "..........###.",
     "....#######...",
     "....########..",
     "..........###.",
     "...........###",
     "...........###",
     "...........###",
     "...........###",
     "...........###",
     "###........###",
     "###........###",
     ".############.",
     "..##########..",
     ".............."},
    {"........####..",
     ".......#####..",
     "......######..",
     ".....###.###..",
     "....###..###..",
     "...###...###..",
     "..###....###..",
     ".###.....###..",
     "###......###..",
     "###......###..",
     "##############",
     "##############",
     "##############",
     ".........###..",
     ".........###..",
     ".........###..",
     ".........###..",
     ".........###..",
     ".........###..",
     ".........###.."},
    {"##############",
     "##############",
     "###...........",
     "###...........",
     "###...........",
     "###...........",
     "###.#######...",
     "############..",
     "####......###.",
     "...........###",
     "...........###",
     "...........###",
     "...........###",
     "...........###",
     "...........###",
     "###........###",
     "###........###",
     ".###......###.",
     "..##########..",
     "....######...."},
    {"....#######...",
     "..##########..",
     ".###.......##.",
     "###...........",
     "###...........",
     "###...........",
     "###...........",
     "###.#######...",
     "############..",
     "####......###.",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     ".###......###.",
     "..##########..",
     "....######....",
     ".............."},
    {"##############",
     "##############",
     "...........###",
     "..........###.",
     ".........###..",
     ".........###..",
     "........###...",
     "........###...",
     ".......###....",
     ".......###....",
     "......###.....",
     "......###.....",
     ".....###......",
     ".....###......",
     "....###.......",
     "....###.......",
     "...###........",
     "...###........",
     "...###........",
     "...###........"},
    {"...########...",
     "..##########..",
     ".###......###.",
     "###........###",
     "###........###",
     "###........###",
     ".###......###.",
     "..##########..",
     "..##########..",
     ".###......###.",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     ".###......###.",
     "..##########..",
     "...########...",
     ".............."},
    {"....######....",
     "..##########..",
     ".###......###.",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     "###........###",
     ".###......####",
     "..############",
     "...#######.###",
     "...........###",
     "...........###",
     "...........###",
     "...........###",
     ".##.......###.",
     "..##########..",
     "...#######....",
     ".............."},
    {"..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     "..............",
     ".....####.....",
     "....######....",
     "....######....",
     "....######....",
     ".....####....."},
}};

std::array<Image, kNumClasses> build_templates() {
  std::array<Image, kNumClasses> out;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    Image img(kCellHeight, kCellWidth, kPaperLevel);
    for (std::size_t r = 0; r < kCoreRows; ++r) {
      for (std::size_t c = 0; c < kCoreCols; ++c) {
        if (kCores[k][r][c] == '#') img.at(kCoreTop + r, kCoreLeft + c) = kInkLevel;
      }
    }
    Image haloed = img;
    for (std::size_t r = 0; r < kCellHeight; ++r) {
      for (std::size_t c = 0; c < kCellWidth; ++c) {
        if (img.at(r, c) == kInkLevel) continue;
        bool touches_ink = false;
        for (int dr = -1; dr <= 1 && !touches_ink; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const auto rr = static_cast<std::ptrdiff_t>(r) + dr;
            const auto cc = static_cast<std::ptrdiff_t>(c) + dc;
            if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(kCellHeight) ||
                cc >= static_cast<std::ptrdiff_t>(kCellWidth)) {
              continue;
            }
            if (img.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) == kInkLevel) {
              touches_ink = true;
              break;
            }
          }
        }
        if (touches_ink) haloed.at(r, c) = kHaloLevel;
      }
    }
    out[k] = std::move(haloed);
  }
  return out;
}

const std::array<Image, kNumClasses>& templates() {
  static const std::array<Image, kNumClasses> cache = build_templates();
  return cache;
}

std::size_t require_symbol(char symbol) {
  const auto index = class_index(symbol);
  if (!index) throw UnknownSymbol(std::string("no glyph for '") + symbol + "'");
  return *index;
}

// Page margin kept free around the strip so the window and any context
// band around it stay inside the page and clear of speckle.
constexpr std::size_t kPlacementMargin = 16;
constexpr std::size_t kSpeckleCount = 160;

}  // namespace

Image glyph_template(char symbol) { return templates()[require_symbol(symbol)]; }

Image render_glyph(char symbol, std::uint64_t jitter_seed, const GlyphStyle& style) {
  const Image& base = templates()[require_symbol(symbol)];
  auto rng = make_rng(jitter_seed, 0x61797068);
  const auto dy = uniform_int(rng, -style.jitter, style.jitter);
  const auto dx = uniform_int(rng, -style.jitter, style.jitter);
  Image out(kCellHeight, kCellWidth, kPaperLevel);
  for (std::size_t r = 0; r < kCellHeight; ++r) {
    for (std::size_t c = 0; c < kCellWidth; ++c) {
      const auto sr = static_cast<std::int64_t>(r) - dy;
      const auto sc = static_cast<std::int64_t>(c) - dx;
      double v = kPaperLevel;
      if (sr >= 0 && sc >= 0 && sr < static_cast<std::int64_t>(kCellHeight) &&
          sc < static_cast<std::int64_t>(kCellWidth)) {
        v = base.at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
      }
      if (style.noise > 0.0) v += uniform(rng, -style.noise, style.noise);
      out.at(r, c) = v;
    }
  }
  out.clamp_unit();
  return out;
}

Image render_strip(const DigitString& label, std::uint64_t seed, const GlyphStyle& style) {
  Image strip(kStripHeight, kStripWidth, kPaperLevel);
  for (std::size_t cell = 0; cell < kCellCount; ++cell) {
    const Image glyph = render_glyph(label.str()[cell], splitmix64(seed) + cell, style);
    for (std::size_t r = 0; r < kCellHeight; ++r) {
      for (std::size_t c = 0; c < kCellWidth; ++c) {
        strip.at(r, cell * kCellWidth + c) = glyph.at(r, c);
      }
    }
  }
  return strip;
}

DocumentSample render_document(const DigitString& label, std::uint64_t placement_seed) {
  auto rng = make_rng(placement_seed, 0x646F63);
  const auto top = static_cast<std::size_t>(uniform_int(
      rng, kPlacementMargin, kDocHeight - kStripHeight - kPlacementMargin));
  const auto left = static_cast<std::size_t>(
      uniform_int(rng, kPlacementMargin, kDocWidth - kStripWidth - kPlacementMargin));

  Image page(kDocHeight, kDocWidth, kPaperLevel);
  // Keep-out box: the largest window the detector could anchor on this
  // strip, plus the placement margin.
  const std::size_t keep_top = top > kPlacementMargin ? top - kPlacementMargin : 0;
  const std::size_t keep_left = left > kPlacementMargin ? left - kPlacementMargin : 0;
  const std::size_t keep_bottom = top + kStripHeight + kWindowHeight;
  const std::size_t keep_right = left + kWindowWidth + kPlacementMargin;
  for (std::size_t n = 0; n < kSpeckleCount; ++n) {
    const auto r = static_cast<std::size_t>(uniform_int(rng, 0, kDocHeight - 1));
    const auto c = static_cast<std::size_t>(uniform_int(rng, 0, kDocWidth - 1));
    const double v = uniform(rng, 0.8, 0.95) * kPaperLevel;
    if (r >= keep_top && r < keep_bottom && c >= keep_left && c < keep_right) continue;
    page.at(r, c) = v;
  }

  const Image strip = render_strip(label, rng());
  for (std::size_t r = 0; r < kStripHeight; ++r) {
    for (std::size_t c = 0; c < kStripWidth; ++c) page.at(top + r, left + c) = strip.at(r, c);
  }

  const auto ink = ink_bounds(page);
  if (!ink) throw NoInkFound("rendered document has no ink");
  const RegionSpec region = anchor_region(ink->min_row, ink->min_col, kDocHeight, kDocWidth);
  return {std::move(page), region, label, placement_seed};
}

DigitString random_label(std::uint64_t seed) {
  auto rng = make_rng(seed, 0x6C6162);
  std::array<std::size_t, kCellCount> classes{};
  for (auto& c : classes) c = static_cast<std::size_t>(uniform_int(rng, 0, kNumClasses - 1));
  return DigitString::from_classes(classes);
}

std::vector<LabeledCrop> make_training_set(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw EmptyInput("training set size must be at least 1");
  std::vector<LabeledCrop> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t sample_seed = seed + i;
    DocumentSample doc = render_document(random_label(sample_seed), sample_seed);
    const RegionSpec& r = doc.true_region;
    Image crop(r.height, r.width);
    for (std::size_t y = 0; y < r.height; ++y) {
      for (std::size_t x = 0; x < r.width; ++x) crop.at(y, x) = doc.full_image.at(r.top + y, r.left + x);
    }
    out.push_back({std::move(crop), doc.label});
  }
  return out;
}

}  // namespace kos
