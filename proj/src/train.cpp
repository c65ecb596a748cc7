#include "kos/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kos/errors.hpp"
#include "kos/rng.hpp"

namespace kos {

namespace {
constexpr double kWarmupBatches = 300.0;
constexpr double kClipNorm = 5.0;

double global_norm(const ParamGrads& grads) {
  double sum = 0.0;
  for (const Tensor& g : grads.tensors()) {
    for (double v : g.data) sum += v * v;
  }
  return std::sqrt(sum);
}
}  // namespace

NetworkParams train(std::span<const LabeledCrop> train_set, const TrainOptions& options,
                    TrainingReport* report,
                    const std::function<void(std::size_t, double)>& on_epoch) {
  if (train_set.empty()) throw EmptyInput("training set is empty");
  if (options.batch_size == 0) throw ConfigInvalid("batch size must be positive");

  NetworkParams params = NetworkParams::random(options.seed);
  ParamGrads grads = NetworkParams::zeros();
  std::size_t batches = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    auto rng = make_rng(options.seed, 0x7261696E + epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, i - 1))]);
    }
    // Linear decay to a tenth of the base rate over the run.
    const double progress =
        options.epochs > 1 ? static_cast<double>(epoch) / (options.epochs - 1) : 0.0;
    const double lr = options.learning_rate * (1.0 - 0.9 * progress);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      for (Tensor& g : grads.tensors()) std::fill(g.data.begin(), g.data.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const LabeledCrop& sample = train_set[order[b]];
        loss_sum += evaluate(params, sample.crop, &sample.label, false, &grads).loss;
      }
      // Short linear warmup keeps the first updates from saturating the
      // activations.
      const double warm = std::min(1.0, static_cast<double>(++batches) / kWarmupBatches);
      const double count = static_cast<double>(end - start);
      const double norm = global_norm(grads) / count;
      const double clip = norm > kClipNorm ? kClipNorm / norm : 1.0;
      apply_sgd(params, grads, clip * warm * lr / count);
    }
    const double mean_loss = loss_sum / static_cast<double>(train_set.size());
    if (!std::isfinite(mean_loss)) {
      throw TrainingDiverged("loss became non-finite in epoch " + std::to_string(epoch));
    }
    if (report) report->epoch_mean_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  return params;
}

double full_string_accuracy(const NetworkParams& params, std::span<const LabeledCrop> samples) {
  if (samples.empty()) throw EmptyInput("no samples to score");
  std::size_t correct = 0;
  for (const auto& s : samples) {
    if (decode(forward(params, s.crop)) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double held_out_accuracy(const NetworkParams& params, std::uint64_t training_seed) {
  const auto held_out = make_training_set(kHeldOutSize, held_out_seed(training_seed));
  return full_string_accuracy(params, held_out);
}

}  // namespace kos
