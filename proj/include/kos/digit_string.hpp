#ifndef KOS_DIGIT_STRING_HPP
#define KOS_DIGIT_STRING_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "kos/geometry.hpp"

namespace kos {

// Symbols in class-index order: digits 0-9, then '.'.
inline constexpr std::string_view kAlphabet = "0123456789.";

std::optional<std::size_t> class_index(char symbol);
char class_symbol(std::size_t index);

// Fixed-width amount over kAlphabet, e.g. "100.00".
class DigitString {
 public:
  // Throws TargetLengthMismatch on wrong length, UnknownSymbol on a bad char.
  explicit DigitString(std::string_view text);

  static DigitString from_classes(const std::array<std::size_t, kCellCount>& classes);

  const std::string& str() const { return text_; }
  std::size_t class_at(std::size_t cell) const;

  friend bool operator==(const DigitString&, const DigitString&) = default;

 private:
  std::string text_;
};

}  // namespace kos

#endif  // KOS_DIGIT_STRING_HPP
