#ifndef KOS_NN_HPP
#define KOS_NN_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kos/digit_string.hpp"
#include "kos/geometry.hpp"
#include "kos/image.hpp"
#include "kos/tensor.hpp"

namespace kos {

// Recognizer layout: window -> conv3x3 -> act -> conv3x3 -> act -> one affine
// head per character cell. Each head reads a column band of the second
// feature map around its nominal cell position.
inline constexpr std::size_t kConv1Channels = 4;
inline constexpr std::size_t kConv2Channels = 6;
inline constexpr std::size_t kHeadBandWidth = 32;
inline constexpr std::size_t kHeadBandLead = 8;

struct HeadBand {
  std::size_t begin;
  std::size_t end;
  std::size_t width() const { return end - begin; }
};
HeadBand head_band(std::size_t cell);

// All recognizer weights. Also used as the container for parameter
// gradients, which share the exact layout.
class NetworkParams {
 public:
  // Tensor order: conv1 weight, conv1 bias, conv2 weight, conv2 bias, then
  // (head weight, head bias) for each cell.
  static constexpr std::size_t kTensorCount = 4 + 2 * kCellCount;

  static NetworkParams zeros();
  static NetworkParams random(std::uint64_t seed);

  std::span<Tensor> tensors() { return tensors_; }
  std::span<const Tensor> tensors() const { return tensors_; }

  const Tensor& conv1_weight() const { return tensors_[0]; }
  const Tensor& conv1_bias() const { return tensors_[1]; }
  const Tensor& conv2_weight() const { return tensors_[2]; }
  const Tensor& conv2_bias() const { return tensors_[3]; }
  const Tensor& head_weight(std::size_t cell) const { return tensors_[4 + 2 * cell]; }
  const Tensor& head_bias(std::size_t cell) const { return tensors_[5 + 2 * cell]; }

  std::size_t parameter_count() const;
  bool same_layout(const NetworkParams& other) const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

 private:
  NetworkParams();
  std::vector<Tensor> tensors_;
};

using ParamGrads = NetworkParams;

struct GradientPair {
  double value = 0.0;
  Tensor input_grad;  // [kWindowHeight, kWindowWidth]
};

// Full result of one pass; fields are filled according to the request.
struct Evaluation {
  Tensor logits;  // [kCellCount, kNumClasses]
  double loss = 0.0;
  Tensor input_grad;
};

// Logits for every cell. Throws DimensionMismatch on a wrong-size crop.
Tensor forward(const NetworkParams& params, const Image& crop);

// Summed per-cell cross-entropy against target and its gradient w.r.t. the
// crop pixels.
GradientPair loss_and_input_grad(const NetworkParams& params, const Image& crop,
                                 const DigitString& target);

ParamGrads param_grad(const NetworkParams& params, const Image& crop, const DigitString& target);

// One pass computing whichever gradients are requested. param_grads, when
// given, is accumulated into (not overwritten).
Evaluation evaluate(const NetworkParams& params, const Image& crop, const DigitString* target,
                    bool want_input_grad, ParamGrads* param_grads);

// params - learning_rate * grads, tensor by tensor.
NetworkParams sgd_step(const NetworkParams& params, const ParamGrads& grads,
                       double learning_rate);

// In-place form of sgd_step.
void apply_sgd(NetworkParams& params, const ParamGrads& grads, double learning_rate);

// Per-cell argmax; ties go to the lowest class index.
DigitString decode(const Tensor& logits);

// Flat binary: "KOSN", version byte, u32 tensor count, per tensor u32 rank and
// u32 dims, then every value as a little-endian f64 in tensor order.
std::string serialize(const NetworkParams& params);
NetworkParams deserialize(std::string_view bytes);
void save_params(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_params(const std::filesystem::path& path);

}  // namespace kos

#endif  // KOS_NN_HPP
