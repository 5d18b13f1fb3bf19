#pragma once

// Brute-force oracles and generators shared by the test suites. Nothing here
// calls into the TT code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "ppx/dense_tensor.hpp"
#include "ppx/tt_tensor.hpp"

namespace ppx::testing {

inline DenseTensor random_dense(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseTensor t(shape);
  for (auto& v : t.values()) v = g(rng);
  return t;
}

/// Random TT with the given shape and bond ranks (clipped to be consistent).
inline TTTensor random_tt(const Shape& shape, std::size_t rank, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<TTCore> cores;
  std::size_t left = 1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const std::size_t right = k + 1 == shape.size() ? 1 : rank;
    TTCore c(left, shape[k], right);
    for (auto& v : c.data) v = g(rng);
    cores.push_back(std::move(c));
    left = right;
  }
  return TTTensor(std::move(cores));
}

/// Mean of a dense tensor over a set of axes, by explicit accumulation.
inline DenseTensor dense_mean(const DenseTensor& t, const std::vector<std::size_t>& axes) {
  std::vector<bool> drop(t.ndim(), false);
  for (auto a : axes) drop[a] = true;
  Shape out;
  double count = 1.0;
  for (std::size_t k = 0; k < t.ndim(); ++k) {
    if (drop[k])
      count *= static_cast<double>(t.shape()[k]);
    else
      out.push_back(t.shape()[k]);
  }
  DenseTensor r(out, 0.0);
  for (std::size_t lin = 0; lin < t.size(); ++lin) {
    const auto idx = t.multi_index(lin);
    MultiIndex o;
    for (std::size_t k = 0; k < t.ndim(); ++k)
      if (!drop[k]) o.push_back(idx[k]);
    r(o) += t.values()[lin];
  }
  for (auto& v : r.values()) v /= count;
  return r;
}

inline double dense_mean_all(const DenseTensor& t) {
  return std::accumulate(t.values().begin(), t.values().end(), 0.0) /
         static_cast<double>(t.size());
}

inline double dense_variance(const DenseTensor& t) {
  const double m = dense_mean_all(t);
  double s = 0.0;
  for (double v : t.values()) s += (v - m) * (v - m);
  return s / static_cast<double>(t.size());
}

inline DenseTensor dense_slice(const DenseTensor& t, std::size_t axis, std::size_t index) {
  Shape out;
  for (std::size_t k = 0; k < t.ndim(); ++k)
    if (k != axis) out.push_back(t.shape()[k]);
  DenseTensor r(out);
  std::size_t w = 0;
  for (std::size_t lin = 0; lin < t.size(); ++lin) {
    const auto idx = t.multi_index(lin);
    if (idx[axis] == index) r.values()[w++] = t.values()[lin];
  }
  return r;
}

inline DenseTensor dense_permute(const DenseTensor& t, const std::vector<std::size_t>& order) {
  Shape out(order.size());
  for (std::size_t j = 0; j < order.size(); ++j) out[j] = t.shape()[order[j]];
  DenseTensor r(out);
  for (std::size_t lin = 0; lin < r.size(); ++lin) {
    const auto ridx = r.multi_index(lin);
    MultiIndex src(t.ndim());
    for (std::size_t j = 0; j < order.size(); ++j) src[order[j]] = ridx[j];
    r.values()[lin] = t(src);
  }
  return r;
}

inline double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

inline double max_abs(const DenseTensor& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace ppx::testing
