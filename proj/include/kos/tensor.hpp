#ifndef KOS_TENSOR_HPP
#define KOS_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace kos {

// Dense row-major tensor of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
      : shape(std::move(dims)), data(element_count(shape), fill) {}

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t numel() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace kos

#endif  // KOS_TENSOR_HPP
