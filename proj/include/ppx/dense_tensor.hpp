#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ppx/error.hpp"

namespace ppx {

using Shape = std::vector<std::size_t>;
using MultiIndex = std::vector<std::size_t>;

inline double shape_numel(std::span<const std::size_t> shape) {
  double n = 1.0;
  for (auto s : shape) n *= static_cast<double>(s);
  return n;
}

inline std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

/// Explicit row-major array of doubles. A tensor with an empty shape holds a
/// single scalar.
class DenseTensor {
 public:
  DenseTensor() : values_(1, 0.0) {}

  explicit DenseTensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_shape();
    values_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
  }

  DenseTensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape();
    if (static_cast<double>(values_.size()) != shape_numel(shape_))
      throw InvalidArgument("dense tensor of shape " + shape_string(shape_) + " given " +
                            std::to_string(values_.size()) + " values");
  }

  /// Fills every entry from a callback on the multi-index.
  static DenseTensor generate(Shape shape,
                              const std::function<double(std::span<const std::size_t>)>& fn) {
    DenseTensor t(std::move(shape));
    MultiIndex idx(t.ndim(), 0);
    for (std::size_t lin = 0; lin < t.size(); ++lin) {
      t.values_[lin] = fn(idx);
      for (std::size_t k = t.ndim(); k-- > 0;) {
        if (++idx[k] < t.shape_[k]) break;
        idx[k] = 0;
      }
    }
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  std::size_t linear_index(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.size())
      throw InvalidArgument("index has " + std::to_string(idx.size()) + " entries, tensor has " +
                            std::to_string(shape_.size()) + " axes");
    std::size_t lin = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
      if (idx[k] >= shape_[k])
        throw InvalidArgument("index " + std::to_string(idx[k]) + " out of range on axis " +
                              std::to_string(k));
      lin = lin * shape_[k] + idx[k];
    }
    return lin;
  }

  MultiIndex multi_index(std::size_t lin) const {
    MultiIndex idx(shape_.size());
    for (std::size_t k = shape_.size(); k-- > 0;) {
      idx[k] = lin % shape_[k];
      lin /= shape_[k];
    }
    return idx;
  }

  double operator()(std::span<const std::size_t> idx) const { return values_[linear_index(idx)]; }
  double& operator()(std::span<const std::size_t> idx) { return values_[linear_index(idx)]; }
  double operator()(std::initializer_list<std::size_t> idx) const {
    return (*this)(std::span<const std::size_t>(idx.begin(), idx.size()));
  }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

 private:
  void check_shape() const {
    for (auto s : shape_)
      if (s == 0) throw InvalidArgument("dense tensor axes must be non-empty");
    if (shape_numel(shape_) > static_cast<double>(kDenseGuard))
      throw GuardExceeded("dense tensor " + shape_string(shape_), shape_numel(shape_),
                          static_cast<double>(kDenseGuard));
  }

  Shape shape_;
  std::vector<double> values_;
};

/// Relative Frobenius distance ‖a − b‖ / ‖b‖ (absolute when b is zero).
inline double relative_error(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw InvalidArgument("relative_error: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    num += d * d;
    den += b.values()[i] * b.values()[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace ppx
