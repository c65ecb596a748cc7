#include "kos/digit_string.hpp"

#include "kos/errors.hpp"

namespace kos {

std::optional<std::size_t> class_index(char symbol) {
  const auto pos = kAlphabet.find(symbol);
  if (pos == std::string_view::npos) return std::nullopt;
  return pos;
}

char class_symbol(std::size_t index) {
  if (index >= kAlphabet.size()) throw UnknownSymbol("class index out of range");
  return kAlphabet[index];
}

DigitString::DigitString(std::string_view text) : text_(text) {
  if (text_.size() != kCellCount) {
    throw TargetLengthMismatch("digit string '" + text_ + "' must have " +
                               std::to_string(kCellCount) + " symbols");
  }
  for (char c : text_) {
    if (!class_index(c)) throw UnknownSymbol(std::string("symbol '") + c + "' not in alphabet");
  }
}

DigitString DigitString::from_classes(const std::array<std::size_t, kCellCount>& classes) {
  std::string text;
  for (std::size_t c : classes) text.push_back(class_symbol(c));
  return DigitString(text);
}

std::size_t DigitString::class_at(std::size_t cell) const { return *class_index(text_.at(cell)); }

}  // namespace kos
