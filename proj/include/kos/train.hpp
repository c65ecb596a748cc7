#ifndef KOS_TRAIN_HPP
#define KOS_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kos/glyphs.hpp"
#include "kos/nn.hpp"

namespace kos {

struct TrainOptions {
  std::size_t epochs = 8;
  double learning_rate = 0.03;
  std::uint64_t seed = 1;
  std::size_t batch_size = 16;
  std::size_t train_samples = 12000;
};

struct TrainingReport {
  std::vector<double> epoch_mean_loss;
};

// Minibatch SGD from a seeded random initialization. Throws EmptyInput on an
// empty set and TrainingDiverged if the loss stops being finite.
NetworkParams train(std::span<const LabeledCrop> train_set, const TrainOptions& options,
                    TrainingReport* report = nullptr,
                    const std::function<void(std::size_t, double)>& on_epoch = {});

// Fraction of samples whose whole string decodes correctly.
double full_string_accuracy(const NetworkParams& params, std::span<const LabeledCrop> samples);

// First seed of the held-out range for a given training seed. Far enough
// from the training range that the two never overlap.
inline std::uint64_t held_out_seed(std::uint64_t training_seed) {
  return training_seed + (std::uint64_t{1} << 40);
}

inline constexpr std::size_t kHeldOutSize = 500;
inline constexpr double kAccuracyGate = 0.98;

// Full-string accuracy on the kHeldOutSize samples that follow
// held_out_seed(training_seed).
double held_out_accuracy(const NetworkParams& params, std::uint64_t training_seed);

}  // namespace kos

#endif  // KOS_TRAIN_HPP
