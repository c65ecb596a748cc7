#ifndef KOS_GEOMETRY_HPP
#define KOS_GEOMETRY_HPP

#include <cstddef>

namespace kos {

// Fixed sizes shared by the renderer, the detector and the recognizer.
inline constexpr std::size_t kCellCount = 6;
inline constexpr std::size_t kNumClasses = 11;

inline constexpr std::size_t kCellHeight = 28;
inline constexpr std::size_t kCellWidth = 20;
inline constexpr std::size_t kStripHeight = kCellHeight;
inline constexpr std::size_t kStripWidth = kCellWidth * kCellCount;

// Recognizer input window. Large enough to hold any jittered strip once the
// detector padding is applied.
inline constexpr std::size_t kWindowHeight = 32;
inline constexpr std::size_t kWindowWidth = 128;

inline constexpr std::size_t kDocHeight = 192;
inline constexpr std::size_t kDocWidth = 384;

// A pixel strictly below this value counts as ink.
inline constexpr double kInkThreshold = 0.5;
inline constexpr std::size_t kDetectorPadding = 2;

}  // namespace kos

#endif  // KOS_GEOMETRY_HPP
