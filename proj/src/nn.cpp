#include "kos/nn.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kos/errors.hpp"
#include "kos/rng.hpp"

namespace kos {

namespace {

constexpr std::size_t H = kWindowHeight;
constexpr std::size_t W = kWindowWidth;
constexpr std::size_t kPlane = H * W;
// Zero-padded planes carry a one-pixel border for the 3x3 convolutions.
constexpr std::size_t kPadStride = W + 2;
constexpr std::size_t kPadPlane = (H + 2) * kPadStride;

constexpr std::size_t C1 = kConv1Channels;
constexpr std::size_t C2 = kConv2Channels;

std::vector<std::vector<std::size_t>> layer_shapes() {
  std::vector<std::vector<std::size_t>> shapes = {
      {C1, 1, 3, 3}, {C1}, {C2, C1, 3, 3}, {C2}};
  for (std::size_t cell = 0; cell < kCellCount; ++cell) {
    shapes.push_back({kNumClasses, C2, H, head_band(cell).width()});
    shapes.push_back({kNumClasses});
  }
  return shapes;
}

// Smooth bounded activation x / sqrt(1 + x^2); derivative (1 + x^2)^-3/2.
inline void activate(const double* z, double* a, double* slope, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 / std::sqrt(1.0 + z[i] * z[i]);
    a[i] = z[i] * s;
    slope[i] = s * s * s;
  }
}

// out[o] (HxW) += sum_c conv(in_pad[c], w[o][c]).
void conv_forward(const double* in_pad, std::size_t cin, const Tensor& weight,
                  const Tensor& bias, std::size_t cout, double* out) {
  for (std::size_t o = 0; o < cout; ++o) {
    double* z = out + o * kPlane;
    std::fill(z, z + kPlane, bias[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* src_plane = in_pad + c * kPadPlane;
      const double* k = weight.data.data() + (o * cin + c) * 9;
      for (std::size_t i = 0; i < H; ++i) {
        double* dst = z + i * W;
        for (std::size_t di = 0; di < 3; ++di) {
          const double* src = src_plane + (i + di) * kPadStride;
          const double k0 = k[di * 3], k1 = k[di * 3 + 1], k2 = k[di * 3 + 2];
          for (std::size_t j = 0; j < W; ++j) {
            dst[j] += k0 * src[j] + k1 * src[j + 1] + k2 * src[j + 2];
          }
        }
      }
    }
  }
}

// Gradients of conv_forward given dz (cout x HxW). Accumulates into
// weight/bias grads when non-null and into din_pad when non-null.
void conv_backward(const double* in_pad, std::size_t cin, const Tensor& weight,
                   std::size_t cout, const double* dz, Tensor* dweight, Tensor* dbias,
                   double* din_pad) {
  for (std::size_t o = 0; o < cout; ++o) {
    const double* g = dz + o * kPlane;
    if (dbias) {
      double sum = 0.0;
      for (std::size_t i = 0; i < kPlane; ++i) sum += g[i];
      (*dbias)[o] += sum;
    }
    for (std::size_t c = 0; c < cin; ++c) {
      const double* k = weight.data.data() + (o * cin + c) * 9;
      if (dweight) {
        const double* src_plane = in_pad + c * kPadPlane;
        double* dk = dweight->data.data() + (o * cin + c) * 9;
        for (std::size_t di = 0; di < 3; ++di) {
          for (std::size_t dj = 0; dj < 3; ++dj) {
            // Per-lane partial sums keep the inner loop vectorizable.
            std::array<double, W> lanes{};
            for (std::size_t i = 0; i < H; ++i) {
              const double* src = src_plane + (i + di) * kPadStride + dj;
              const double* gr = g + i * W;
              for (std::size_t j = 0; j < W; ++j) lanes[j] += gr[j] * src[j];
            }
            double sum = 0.0;
            for (double v : lanes) sum += v;
            dk[di * 3 + dj] += sum;
          }
        }
      }
      if (din_pad) {
        double* dst_plane = din_pad + c * kPadPlane;
        for (std::size_t i = 0; i < H; ++i) {
          const double* gr = g + i * W;
          for (std::size_t di = 0; di < 3; ++di) {
            double* dst = dst_plane + (i + di) * kPadStride;
            const double k0 = k[di * 3], k1 = k[di * 3 + 1], k2 = k[di * 3 + 2];
            for (std::size_t j = 0; j < W; ++j) {
              dst[j] += k0 * gr[j];
              dst[j + 1] += k1 * gr[j];
              dst[j + 2] += k2 * gr[j];
            }
          }
        }
      }
    }
  }
}

void copy_into_padded(const double* plane, double* pad) {
  for (std::size_t i = 0; i < H; ++i) {
    std::memcpy(pad + (i + 1) * kPadStride + 1, plane + i * W, W * sizeof(double));
  }
}

struct Workspace {
  std::vector<double> x_pad = std::vector<double>(kPadPlane);
  std::vector<double> z1 = std::vector<double>(C1 * kPlane);
  std::vector<double> a1 = std::vector<double>(C1 * kPlane);
  std::vector<double> s1 = std::vector<double>(C1 * kPlane);
  std::vector<double> a1_pad = std::vector<double>(C1 * kPadPlane);
  std::vector<double> z2 = std::vector<double>(C2 * kPlane);
  std::vector<double> a2 = std::vector<double>(C2 * kPlane);
  std::vector<double> s2 = std::vector<double>(C2 * kPlane);
  std::vector<double> da2 = std::vector<double>(C2 * kPlane);
  std::vector<double> da1_pad = std::vector<double>(C1 * kPadPlane);
  std::vector<double> dz1 = std::vector<double>(C1 * kPlane);
  std::vector<double> dx_pad = std::vector<double>(kPadPlane);
};

void require_window(const Image& crop) {
  if (crop.height() != H || crop.width() != W) {
    throw DimensionMismatch("recognizer expects a " + std::to_string(H) + "x" +
                            std::to_string(W) + " crop, got " + std::to_string(crop.height()) +
                            "x" + std::to_string(crop.width()));
  }
}

}  // namespace

HeadBand head_band(std::size_t cell) {
  const std::size_t nominal = cell * kCellWidth;
  const std::size_t begin = nominal > kHeadBandLead ? nominal - kHeadBandLead : 0;
  const std::size_t end = std::min(W, nominal + kHeadBandWidth - kHeadBandLead);
  return {begin, end};
}

NetworkParams::NetworkParams() {
  for (auto& shape : layer_shapes()) tensors_.emplace_back(std::move(shape));
}

NetworkParams NetworkParams::zeros() { return NetworkParams(); }

NetworkParams NetworkParams::random(std::uint64_t seed) {
  NetworkParams params;
  auto rng = make_rng(seed, 0x6E6E);
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    Tensor& tensor = params.tensors_[t];
    const bool is_bias = tensor.shape.size() == 1;
    if (is_bias) continue;
    const std::size_t fan_in = tensor.numel() / tensor.shape[0];
    const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (double& v : tensor.data) v = uniform(rng, -limit, limit);
  }
  return params;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

bool NetworkParams::same_layout(const NetworkParams& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].shape != other.tensors_[i].shape) return false;
  }
  return true;
}

Evaluation evaluate(const NetworkParams& params, const Image& crop, const DigitString* target,
                    bool want_input_grad, ParamGrads* param_grads) {
  require_window(crop);
  const bool backward = want_input_grad || param_grads != nullptr;
  if (backward && target == nullptr) {
    throw TargetLengthMismatch("gradients require a target string");
  }

  // Buffers are reused across calls; padded borders are never written, so
  // they stay zero.
  thread_local Workspace ws;
  auto& [x_pad, z1, a1, s1, a1_pad, z2, a2, s2, da2, da1_pad, dz1, dx_pad] = ws;
  copy_into_padded(crop.pixels().data(), x_pad.data());

  conv_forward(x_pad.data(), 1, params.conv1_weight(), params.conv1_bias(), C1, z1.data());
  activate(z1.data(), a1.data(), s1.data(), z1.size());
  for (std::size_t c = 0; c < C1; ++c) {
    copy_into_padded(a1.data() + c * kPlane, a1_pad.data() + c * kPadPlane);
  }

  conv_forward(a1_pad.data(), C1, params.conv2_weight(), params.conv2_bias(), C2, z2.data());
  activate(z2.data(), a2.data(), s2.data(), z2.size());

  Evaluation result;
  result.logits = Tensor({kCellCount, kNumClasses});
  for (std::size_t cell = 0; cell < kCellCount; ++cell) {
    const HeadBand band = head_band(cell);
    const Tensor& hw = params.head_weight(cell);
    const Tensor& hb = params.head_bias(cell);
    const std::size_t bw = band.width();
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      std::array<double, kHeadBandWidth> lanes{};
      const double* w = hw.data.data() + k * C2 * H * bw;
      for (std::size_t o = 0; o < C2; ++o) {
        for (std::size_t i = 0; i < H; ++i) {
          const double* act = a2.data() + o * kPlane + i * W + band.begin;
          const double* wr = w + (o * H + i) * bw;
          for (std::size_t j = 0; j < bw; ++j) lanes[j] += wr[j] * act[j];
        }
      }
      double sum = 0.0;
      for (double v : lanes) sum += v;
      result.logits[cell * kNumClasses + k] = hb[k] + sum;
    }
  }

  if (target == nullptr) return result;

  // Cross-entropy per cell and its logit gradient (softmax - onehot).
  std::vector<double> dlogits(kCellCount * kNumClasses);
  double loss = 0.0;
  for (std::size_t cell = 0; cell < kCellCount; ++cell) {
    const double* row = result.logits.data.data() + cell * kNumClasses;
    const double peak = *std::max_element(row, row + kNumClasses);
    double denom = 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) denom += std::exp(row[k] - peak);
    const std::size_t want = target->class_at(cell);
    loss += std::log(denom) - (row[want] - peak);
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      dlogits[cell * kNumClasses + k] =
          std::exp(row[k] - peak) / denom - (k == want ? 1.0 : 0.0);
    }
  }
  result.loss = loss;
  if (!backward) return result;

  std::fill(da2.begin(), da2.end(), 0.0);
  for (std::size_t cell = 0; cell < kCellCount; ++cell) {
    const HeadBand band = head_band(cell);
    const Tensor& hw = params.head_weight(cell);
    const std::size_t bw = band.width();
    Tensor* dhw = param_grads ? &param_grads->tensors()[4 + 2 * cell] : nullptr;
    Tensor* dhb = param_grads ? &param_grads->tensors()[5 + 2 * cell] : nullptr;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const double g = dlogits[cell * kNumClasses + k];
      if (dhb) (*dhb)[k] += g;
      const double* w = hw.data.data() + k * C2 * H * bw;
      double* dw = dhw ? dhw->data.data() + k * C2 * H * bw : nullptr;
      for (std::size_t o = 0; o < C2; ++o) {
        for (std::size_t i = 0; i < H; ++i) {
          const std::size_t off = o * kPlane + i * W + band.begin;
          double* dact = da2.data() + off;
          const double* wr = w + (o * H + i) * bw;
          for (std::size_t j = 0; j < bw; ++j) dact[j] += g * wr[j];
          if (dw) {
            const double* act = a2.data() + off;
            double* dwr = dw + (o * H + i) * bw;
            for (std::size_t j = 0; j < bw; ++j) dwr[j] += g * act[j];
          }
        }
      }
    }
  }

  std::vector<double>& dz2 = da2;
  for (std::size_t i = 0; i < dz2.size(); ++i) dz2[i] *= s2[i];

  std::fill(da1_pad.begin(), da1_pad.end(), 0.0);
  conv_backward(a1_pad.data(), C1, params.conv2_weight(), C2, dz2.data(),
                param_grads ? &param_grads->tensors()[2] : nullptr,
                param_grads ? &param_grads->tensors()[3] : nullptr, da1_pad.data());

  for (std::size_t c = 0; c < C1; ++c) {
    for (std::size_t i = 0; i < H; ++i) {
      const double* src = da1_pad.data() + c * kPadPlane + (i + 1) * kPadStride + 1;
      double* dst = dz1.data() + c * kPlane + i * W;
      const double* slope = s1.data() + c * kPlane + i * W;
      for (std::size_t j = 0; j < W; ++j) dst[j] = src[j] * slope[j];
    }
  }

  if (want_input_grad) std::fill(dx_pad.begin(), dx_pad.end(), 0.0);
  conv_backward(x_pad.data(), 1, params.conv1_weight(), C1, dz1.data(),
                param_grads ? &param_grads->tensors()[0] : nullptr,
                param_grads ? &param_grads->tensors()[1] : nullptr,
                want_input_grad ? dx_pad.data() : nullptr);

  if (want_input_grad) {
    result.input_grad = Tensor({H, W});
    for (std::size_t i = 0; i < H; ++i) {
      std::memcpy(result.input_grad.data.data() + i * W, dx_pad.data() + (i + 1) * kPadStride + 1,
                  W * sizeof(double));
    }
  }
  return result;
}

Tensor forward(const NetworkParams& params, const Image& crop) {
  return evaluate(params, crop, nullptr, false, nullptr).logits;
}

GradientPair loss_and_input_grad(const NetworkParams& params, const Image& crop,
                                 const DigitString& target) {
  Evaluation e = evaluate(params, crop, &target, true, nullptr);
  return {e.loss, std::move(e.input_grad)};
}

ParamGrads param_grad(const NetworkParams& params, const Image& crop, const DigitString& target) {
  ParamGrads grads = NetworkParams::zeros();
  evaluate(params, crop, &target, false, &grads);
  return grads;
}

void apply_sgd(NetworkParams& params, const ParamGrads& grads, double learning_rate) {
  if (!params.same_layout(grads)) throw DimensionMismatch("gradient layout differs from params");
  auto out = params.tensors();
  auto g = grads.tensors();
  for (std::size_t t = 0; t < out.size(); ++t) {
    for (std::size_t i = 0; i < out[t].numel(); ++i) out[t][i] -= learning_rate * g[t][i];
  }
}

NetworkParams sgd_step(const NetworkParams& params, const ParamGrads& grads,
                       double learning_rate) {
  NetworkParams next = params;
  apply_sgd(next, grads, learning_rate);
  return next;
}

DigitString decode(const Tensor& logits) {
  if (logits.shape != std::vector<std::size_t>{kCellCount, kNumClasses}) {
    throw DimensionMismatch("logits must be cells x classes");
  }
  std::array<std::size_t, kCellCount> classes{};
  for (std::size_t cell = 0; cell < kCellCount; ++cell) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < kNumClasses; ++k) {
      if (logits[cell * kNumClasses + k] > logits[cell * kNumClasses + best]) best = k;
    }
    classes[cell] = best;
  }
  return DigitString::from_classes(classes);
}

namespace {

constexpr char kMagic[4] = {'K', 'O', 'S', 'N'};
constexpr std::uint8_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IOFailure("truncated parameter file");
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < n; ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += n;
    return v;
  }
  std::string_view raw(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IOFailure("truncated parameter file");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const NetworkParams& params) {
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kFormatVersion));
  put_u32(out, static_cast<std::uint32_t>(params.tensors().size()));
  for (const Tensor& t : params.tensors()) {
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const Tensor& t : params.tensors()) {
    for (double v : t.data) put_f64(out, v);
  }
  return out;
}

NetworkParams deserialize(std::string_view bytes) {
  Reader in(bytes);
  if (in.raw(4) != std::string_view(kMagic, 4)) throw IOFailure("bad parameter file magic");
  if (in.take(1) != kFormatVersion) throw IOFailure("unsupported parameter file version");
  NetworkParams params = NetworkParams::zeros();
  if (in.take(4) != params.tensors().size()) {
    throw DimensionMismatch("parameter file has a different tensor count");
  }
  for (const Tensor& t : params.tensors()) {
    const auto rank = in.take(4);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = in.take(4);
    if (shape != t.shape) throw DimensionMismatch("parameter file layer shape mismatch");
  }
  for (Tensor& t : params.tensors()) {
    for (double& v : t.data) v = std::bit_cast<double>(in.take(8));
  }
  if (!in.done()) throw IOFailure("trailing bytes in parameter file");
  return params;
}

void save_params(const NetworkParams& params, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IOFailure("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize(params);
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw IOFailure("short write to " + path.string());
}

NetworkParams load_params(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IOFailure("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return deserialize(buffer.str());
}

}  // namespace kos
