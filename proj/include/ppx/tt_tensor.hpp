#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ppx/dense_tensor.hpp"
#include "ppx/error.hpp"

namespace ppx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One 3-way core of shape (left, size, right), stored row-major.
struct TTCore {
  std::size_t left = 1;
  std::size_t size = 1;
  std::size_t right = 1;
  std::vector<double> data;

  TTCore() : data(1, 0.0) {}
  TTCore(std::size_t l, std::size_t n, std::size_t r, double fill = 0.0)
      : left(l), size(n), right(r), data(l * n * r, fill) {}

  double& operator()(std::size_t a, std::size_t i, std::size_t b) {
    return data[(a * size + i) * right + b];
  }
  double operator()(std::size_t a, std::size_t i, std::size_t b) const {
    return data[(a * size + i) * right + b];
  }

  /// (left*size) x right view.
  Eigen::Map<RowMatrix> left_unfolding() {
    return {data.data(), Eigen::Index(left * size), Eigen::Index(right)};
  }
  Eigen::Map<const RowMatrix> left_unfolding() const {
    return {data.data(), Eigen::Index(left * size), Eigen::Index(right)};
  }
  /// left x (size*right) view.
  Eigen::Map<RowMatrix> right_unfolding() {
    return {data.data(), Eigen::Index(left), Eigen::Index(size * right)};
  }
  Eigen::Map<const RowMatrix> right_unfolding() const {
    return {data.data(), Eigen::Index(left), Eigen::Index(size * right)};
  }
  /// The left x right matrix selected by index i.
  Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>> slice(std::size_t i) const {
    return {data.data() + i * right, Eigen::Index(left), Eigen::Index(right),
            Eigen::OuterStride<>(Eigen::Index(size * right))};
  }

  RowMatrix mean_matrix() const {
    RowMatrix m = RowMatrix::Zero(Eigen::Index(left), Eigen::Index(right));
    for (std::size_t i = 0; i < size; ++i) m += slice(i);
    return m / static_cast<double>(size);
  }

  static TTCore from_left_unfolding(const RowMatrix& m, std::size_t l, std::size_t n) {
    TTCore c(l, n, static_cast<std::size_t>(m.cols()));
    c.left_unfolding() = m;
    return c;
  }
  static TTCore from_right_unfolding(const RowMatrix& m, std::size_t n, std::size_t r) {
    TTCore c(static_cast<std::size_t>(m.rows()), n, r);
    c.right_unfolding() = m;
    return c;
  }
};

/// Compressed N-dimensional array: entry (i_1..i_N) is the product of the
/// per-axis matrices core_1[i_1] ... core_N[i_N]. A tensor without cores is a
/// scalar.
class TTTensor {
 public:
  TTTensor() = default;

  explicit TTTensor(std::vector<TTCore> cores) : cores_(std::move(cores)) { validate(); }

  static TTTensor scalar(double value) {
    TTTensor t;
    t.scalar_ = value;
    return t;
  }

  std::size_t ndim() const noexcept { return cores_.size(); }
  bool is_scalar() const noexcept { return cores_.empty(); }
  double scalar_value() const {
    if (!is_scalar()) throw InvalidArgument("scalar_value on a tensor with axes");
    return scalar_;
  }

  const std::vector<TTCore>& cores() const noexcept { return cores_; }
  const TTCore& core(std::size_t k) const { return cores_.at(k); }

  Shape shape() const {
    Shape s(cores_.size());
    for (std::size_t k = 0; k < cores_.size(); ++k) s[k] = cores_[k].size;
    return s;
  }

  /// r_0 .. r_N.
  std::vector<std::size_t> ranks() const {
    std::vector<std::size_t> r{1};
    for (const auto& c : cores_) r.push_back(c.right);
    return r;
  }

  std::size_t max_rank() const {
    auto r = ranks();
    return *std::max_element(r.begin(), r.end());
  }

  double numel() const { return shape_numel(shape()); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& c : cores_) n += c.data.size();
    return n;
  }

 private:
  void validate() const {
    if (cores_.empty()) return;
    if (cores_.front().left != 1 || cores_.back().right != 1)
      throw InvalidArgument("TT boundary ranks must be 1");
    for (std::size_t k = 0; k < cores_.size(); ++k) {
      const auto& c = cores_[k];
      if (c.size == 0 || c.left == 0 || c.right == 0)
        throw InvalidArgument("TT core " + std::to_string(k) + " has an empty dimension");
      if (c.data.size() != c.left * c.size * c.right)
        throw InvalidArgument("TT core " + std::to_string(k) + " storage mismatch");
      if (k + 1 < cores_.size() && c.right != cores_[k + 1].left)
        throw InvalidArgument("TT ranks do not chain between cores " + std::to_string(k) +
                              " and " + std::to_string(k + 1));
      for (double v : c.data)
        if (!std::isfinite(v))
          throw InvalidArgument("TT core " + std::to_string(k) + " has a non-finite entry");
    }
  }

  std::vector<TTCore> cores_;
  double scalar_ = 0.0;
};

namespace tt {

namespace detail {

inline void check_eps(double eps, const char* op) {
  if (!(eps > 0.0 && eps < 1.0))
    throw InvalidArgument(std::string(op) + ": tolerance must lie in (0, 1)");
}

/// Smallest rank whose discarded tail has squared sum <= delta^2 (at least 1).
inline std::size_t truncation_rank(const Vector& sv, double delta) {
  std::size_t r = static_cast<std::size_t>(sv.size());
  double tail = 0.0;
  const double budget = delta * delta;
  while (r > 1) {
    const double s = sv[Eigen::Index(r - 1)];
    if (tail + s * s > budget) break;
    tail += s * s;
    --r;
  }
  return std::max<std::size_t>(r, 1);
}

struct Svd {
  Matrix u;
  Vector s;
  Matrix v;
};

/// Thin SVD. Jacobi rather than BDCSVD: the divide-and-conquer solver in Eigen
/// 3.4.0 returns wrong factors for some small rank-deficient matrices.
inline Svd svd(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

/// Thin QR: a = q * r with q orthonormal columns, r upper triangular.
inline std::pair<Matrix, Matrix> thin_qr(const Matrix& a) {
  const Eigen::Index k = std::min(a.rows(), a.cols());
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), k);
  Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return {std::move(q), std::move(r)};
}

/// Right-orthonormalizes core k and pushes the remainder into core k-1.
inline void orthogonalize_step_left(std::vector<TTCore>& cores, std::size_t k) {
  TTCore& c = cores[k];
  auto [q, r] = thin_qr(Matrix(c.right_unfolding().transpose()));
  TTCore nc(static_cast<std::size_t>(q.cols()), c.size, c.right);
  nc.right_unfolding() = q.transpose();
  TTCore& p = cores[k - 1];
  RowMatrix merged = p.left_unfolding() * r.transpose();
  p = TTCore::from_left_unfolding(merged, p.left, p.size);
  c = std::move(nc);
}

/// Left-orthonormalizes core k and pushes the remainder into core k+1.
inline void orthogonalize_step_right(std::vector<TTCore>& cores, std::size_t k) {
  TTCore& c = cores[k];
  auto [q, r] = thin_qr(Matrix(c.left_unfolding()));
  TTCore nc = TTCore::from_left_unfolding(RowMatrix(q), c.left, c.size);
  TTCore& n = cores[k + 1];
  RowMatrix merged = r * n.right_unfolding();
  n = TTCore::from_right_unfolding(merged, n.size, n.right);
  c = std::move(nc);
}

/// Makes cores [from, N) right-orthonormal, pushing the remainder into core
/// from-1. Requires from >= 1.
inline void right_orthogonalize(std::vector<TTCore>& cores, std::size_t from) {
  for (std::size_t k = cores.size() - 1; k >= from && k > 0; --k) orthogonalize_step_left(cores, k);
}

inline void check_axes(const TTTensor& t, std::span<const std::size_t> axes, const char* op) {
  std::vector<bool> seen(t.ndim(), false);
  for (auto a : axes) {
    if (a >= t.ndim())
      throw InvalidArgument(std::string(op) + ": axis " + std::to_string(a) + " out of range");
    if (seen[a]) throw InvalidArgument(std::string(op) + ": repeated axis " + std::to_string(a));
    seen[a] = true;
  }
}

/// Replaces selected cores with fixed left x right matrices and folds each of
/// them into a neighbouring kept core.
inline TTTensor absorb(const TTTensor& t, const std::vector<std::optional<RowMatrix>>& reduce) {
  std::vector<TTCore> out;
  RowMatrix carry = RowMatrix::Identity(1, 1);
  for (std::size_t k = 0; k < t.ndim(); ++k) {
    const TTCore& c = t.core(k);
    if (reduce[k]) {
      carry = carry * *reduce[k];
      continue;
    }
    RowMatrix merged = carry * c.right_unfolding();
    out.push_back(TTCore::from_right_unfolding(merged, c.size, c.right));
    carry = RowMatrix::Identity(Eigen::Index(c.right), Eigen::Index(c.right));
  }
  if (out.empty()) return TTTensor::scalar(carry(0, 0));
  TTCore& last = out.back();
  if (carry.rows() != 1 || carry.cols() != 1 || carry(0, 0) != 1.0) {
    RowMatrix merged = last.left_unfolding() * carry;
    last = TTCore::from_left_unfolding(merged, last.left, last.size);
  }
  return TTTensor(std::move(out));
}

}  // namespace detail

/// TT-SVD compression with relative Frobenius tolerance eps.
inline TTTensor from_dense(const DenseTensor& t, double eps) {
  detail::check_eps(eps, "tt_from_dense");
  if (!t.all_finite()) throw InvalidArgument("tt_from_dense: input has non-finite values");
  const std::size_t n = t.ndim();
  if (n == 0) return TTTensor::scalar(t.values()[0]);
  const auto& shape = t.shape();
  if (n == 1) {
    TTCore c(1, shape[0], 1);
    c.data = t.values();
    return TTTensor({c});
  }
  const double delta = eps * t.frobenius_norm() / std::sqrt(static_cast<double>(n - 1));
  std::vector<TTCore> cores;
  RowMatrix work = Eigen::Map<const RowMatrix>(t.values().data(), Eigen::Index(shape[0]),
                                               Eigen::Index(t.size() / shape[0]));
  std::size_t rprev = 1;
  std::size_t cols = t.size();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const std::size_t rows = rprev * shape[k];
    cols /= shape[k];
    Eigen::Map<const RowMatrix> a(work.data(), Eigen::Index(rows), Eigen::Index(cols));
    auto dec = detail::svd(Matrix(a));
    const std::size_t r = detail::truncation_rank(dec.s, delta);
    cores.push_back(TTCore::from_left_unfolding(RowMatrix(dec.u.leftCols(Eigen::Index(r))), rprev,
                                                shape[k]));
    work = dec.s.head(Eigen::Index(r)).asDiagonal() * dec.v.leftCols(Eigen::Index(r)).transpose();
    rprev = r;
  }
  TTCore last(rprev, shape[n - 1], 1);
  std::copy(work.data(), work.data() + work.size(), last.data.begin());
  cores.push_back(std::move(last));
  return TTTensor(std::move(cores));
}

inline DenseTensor to_dense(const TTTensor& t) {
  if (t.is_scalar()) return DenseTensor({}, std::vector<double>{t.scalar_value()});
  const double numel = t.numel();
  if (numel > static_cast<double>(kDenseGuard))
    throw GuardExceeded("tt_to_dense of shape " + shape_string(t.shape()), numel,
                        static_cast<double>(kDenseGuard));
  RowMatrix acc = RowMatrix::Ones(1, 1);
  for (const auto& c : t.cores()) {
    RowMatrix next = acc * c.right_unfolding();
    acc = Eigen::Map<RowMatrix>(next.data(), Eigen::Index(next.rows() * c.size),
                                Eigen::Index(c.right));
  }
  return DenseTensor(t.shape(), std::vector<double>(acc.data(), acc.data() + acc.size()));
}

inline double eval(const TTTensor& t, std::span<const std::size_t> idx) {
  if (idx.size() != t.ndim())
    throw InvalidArgument("tt_eval: index has " + std::to_string(idx.size()) +
                          " entries, tensor has " + std::to_string(t.ndim()) + " axes");
  if (t.is_scalar()) return t.scalar_value();
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
  for (std::size_t k = 0; k < t.ndim(); ++k) {
    const auto& c = t.core(k);
    if (idx[k] >= c.size)
      throw InvalidArgument("tt_eval: index " + std::to_string(idx[k]) + " out of range on axis " +
                            std::to_string(k));
    v = v * c.slice(idx[k]);
  }
  return v(0);
}

inline double eval(const TTTensor& t, std::initializer_list<std::size_t> idx) {
  return eval(t, std::span<const std::size_t>(idx.begin(), idx.size()));
}

/// Tensor with every entry equal to value.
inline TTTensor constant(const Shape& shape, double value) {
  if (shape.empty()) return TTTensor::scalar(value);
  std::vector<TTCore> cores;
  for (std::size_t k = 0; k < shape.size(); ++k)
    cores.emplace_back(1, shape[k], 1, k == 0 ? value : 1.0);
  return TTTensor(std::move(cores));
}

/// Exact a*x + y; ranks add.
inline TTTensor axpy(double a, const TTTensor& x, const TTTensor& y) {
  if (x.shape() != y.shape())
    throw InvalidArgument("tt_axpy: shape mismatch " + shape_string(x.shape()) + " vs " +
                          shape_string(y.shape()));
  if (x.is_scalar()) return TTTensor::scalar(a * x.scalar_value() + y.scalar_value());
  const std::size_t n = x.ndim();
  if (n == 1) {
    TTCore c(1, x.core(0).size, 1);
    for (std::size_t i = 0; i < c.size; ++i) c.data[i] = a * x.core(0).data[i] + y.core(0).data[i];
    return TTTensor({c});
  }
  std::vector<TTCore> cores;
  for (std::size_t k = 0; k < n; ++k) {
    const TTCore& cx = x.core(k);
    const TTCore& cy = y.core(k);
    const bool first = k == 0, last = k + 1 == n;
    const std::size_t l = first ? 1 : cx.left + cy.left;
    const std::size_t r = last ? 1 : cx.right + cy.right;
    TTCore c(l, cx.size, r);
    const double scale = first ? a : 1.0;
    for (std::size_t i = 0; i < cx.size; ++i) {
      for (std::size_t p = 0; p < cx.left; ++p)
        for (std::size_t q = 0; q < cx.right; ++q) c(p, i, q) = scale * cx(p, i, q);
      const std::size_t lo = first ? 0 : cx.left;
      const std::size_t ro = last ? 0 : cx.right;
      for (std::size_t p = 0; p < cy.left; ++p)
        for (std::size_t q = 0; q < cy.right; ++q) c(lo + p, i, ro + q) = cy(p, i, q);
    }
    cores.push_back(std::move(c));
  }
  return TTTensor(std::move(cores));
}

/// Raw Frobenius norm, computed through orthogonalization so that tensors of
/// tiny norm built from large cancelling terms keep their accuracy.
inline double norm(const TTTensor& t) {
  if (t.is_scalar()) return std::abs(t.scalar_value());
  std::vector<TTCore> cores = t.cores();
  if (cores.size() > 1) detail::right_orthogonalize(cores, 1);
  return Eigen::Map<const Vector>(cores[0].data.data(), Eigen::Index(cores[0].data.size())).norm();
}

/// TT recompression to relative accuracy eps.
inline TTTensor round(const TTTensor& t, double eps) {
  detail::check_eps(eps, "tt_round");
  const std::size_t n = t.ndim();
  if (n <= 1) return t;
  std::vector<TTCore> cores = t.cores();
  detail::right_orthogonalize(cores, 1);
  const double nrm =
      Eigen::Map<const Vector>(cores[0].data.data(), Eigen::Index(cores[0].data.size())).norm();
  const double delta = eps * nrm / std::sqrt(static_cast<double>(n - 1));
  for (std::size_t k = 0; k + 1 < n; ++k) {
    TTCore& c = cores[k];
    auto dec = detail::svd(Matrix(c.left_unfolding()));
    const auto r = Eigen::Index(detail::truncation_rank(dec.s, delta));
    TTCore nc = TTCore::from_left_unfolding(RowMatrix(dec.u.leftCols(r)), c.left, c.size);
    RowMatrix sv = dec.s.head(r).asDiagonal() * dec.v.leftCols(r).transpose();
    TTCore& nx = cores[k + 1];
    RowMatrix merged = sv * nx.right_unfolding();
    nx = TTCore::from_right_unfolding(merged, nx.size, nx.right);
    c = std::move(nc);
  }
  return TTTensor(std::move(cores));
}

/// Normalized inner product (1/numel) * sum(a .* b): the expectation under the
/// uniform grid measure.
inline double dot(const TTTensor& a, const TTTensor& b) {
  if (a.shape() != b.shape())
    throw InvalidArgument("tt_dot: shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  if (a.is_scalar()) return a.scalar_value() * b.scalar_value();
  RowMatrix w = RowMatrix::Ones(1, 1);
  for (std::size_t k = 0; k < a.ndim(); ++k) {
    const TTCore& ca = a.core(k);
    const TTCore& cb = b.core(k);
    RowMatrix next = RowMatrix::Zero(Eigen::Index(ca.right), Eigen::Index(cb.right));
    for (std::size_t i = 0; i < ca.size; ++i) next.noalias() += ca.slice(i).transpose() * (w * cb.slice(i));
    w = next / static_cast<double>(ca.size);
  }
  return w(0, 0);
}

/// Arithmetic mean over the given axes; the result keeps the remaining axes in
/// order. Averaging every axis yields a scalar tensor.
inline TTTensor mean_axes(const TTTensor& t, std::span<const std::size_t> axes) {
  if (axes.empty()) throw InvalidArgument("tt_mean_axes: empty axis set");
  detail::check_axes(t, axes, "tt_mean_axes");
  std::vector<std::optional<RowMatrix>> reduce(t.ndim());
  for (auto a : axes) reduce[a] = t.core(a).mean_matrix();
  return detail::absorb(t, reduce);
}

inline TTTensor mean_axes(const TTTensor& t, std::initializer_list<std::size_t> axes) {
  return mean_axes(t, std::span<const std::size_t>(axes.begin(), axes.size()));
}

/// Global mean of all entries.
inline double mean(const TTTensor& t) {
  if (t.is_scalar()) return t.scalar_value();
  std::vector<std::size_t> all(t.ndim());
  std::iota(all.begin(), all.end(), 0);
  return mean_axes(t, all).scalar_value();
}

/// Inserts a new axis of the given size at position axis; the result is
/// constant along it.
inline TTTensor broadcast(const TTTensor& t, std::size_t axis, std::size_t size) {
  if (axis > t.ndim())
    throw InvalidArgument("tt_broadcast: position " + std::to_string(axis) + " out of range");
  if (size == 0) throw InvalidArgument("tt_broadcast: size must be positive");
  if (t.is_scalar()) {
    TTCore c(1, size, 1, t.scalar_value());
    return TTTensor({c});
  }
  const auto ranks = t.ranks();
  const std::size_t r = ranks[axis];
  TTCore c(r, size, r);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t a = 0; a < r; ++a) c(a, i, a) = 1.0;
  std::vector<TTCore> cores = t.cores();
  cores.insert(cores.begin() + static_cast<std::ptrdiff_t>(axis), std::move(c));
  return TTTensor(std::move(cores));
}

/// The hyperslice at index along axis.
inline TTTensor fix_axis(const TTTensor& t, std::size_t axis, std::size_t index) {
  if (axis >= t.ndim())
    throw InvalidArgument("tt_fix_axis: axis " + std::to_string(axis) + " out of range");
  if (index >= t.core(axis).size)
    throw InvalidArgument("tt_fix_axis: index " + std::to_string(index) + " out of range on axis " +
                          std::to_string(axis));
  std::vector<std::optional<RowMatrix>> reduce(t.ndim());
  reduce[axis] = RowMatrix(t.core(axis).slice(index));
  return detail::absorb(t, reduce);
}

/// Reorders axes so that result axis j is input axis order[j]. Implemented by
/// adjacent transpositions, each truncated so the accumulated error stays below
/// eps relative to the norm of t.
inline TTTensor permute_axes(const TTTensor& t, std::span<const std::size_t> order, double eps) {
  const std::size_t n = t.ndim();
  if (order.size() != n) throw InvalidArgument("tt_permute_axes: order must list every axis");
  detail::check_axes(t, order, "tt_permute_axes");
  detail::check_eps(eps, "tt_permute_axes");

  // Plan the adjacent swaps first so the per-swap budget is known.
  std::vector<std::size_t> cur(n);
  std::iota(cur.begin(), cur.end(), 0);
  std::vector<std::size_t> swaps;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t p = static_cast<std::size_t>(std::find(cur.begin(), cur.end(), order[j]) - cur.begin());
    for (; p > j; --p) {
      swaps.push_back(p - 1);
      std::swap(cur[p - 1], cur[p]);
    }
  }
  if (swaps.empty()) return t;

  std::vector<TTCore> cores = t.cores();
  detail::right_orthogonalize(cores, 1);
  std::size_t center = 0;
  const double nrm =
      Eigen::Map<const Vector>(cores[0].data.data(), Eigen::Index(cores[0].data.size())).norm();
  const double delta = eps * nrm / static_cast<double>(swaps.size());

  for (std::size_t k : swaps) {
    // Move the orthogonality center onto core k.
    for (; center < k; ++center) detail::orthogonalize_step_right(cores, center);
    for (; center > k; --center) detail::orthogonalize_step_left(cores, center);
    const TTCore& a = cores[k];
    const TTCore& b = cores[k + 1];
    // Supercore (r0, Ia, Ib, r2) -> matrix (r0*Ib) x (Ia*r2).
    RowMatrix ab = a.left_unfolding() * b.right_unfolding();  // (r0*Ia) x (Ib*r2)
    const std::size_t r0 = a.left, ia = a.size, ib = b.size, r2 = b.right;
    RowMatrix sw(Eigen::Index(r0 * ib), Eigen::Index(ia * r2));
    for (std::size_t p = 0; p < r0; ++p)
      for (std::size_t i = 0; i < ia; ++i)
        for (std::size_t j = 0; j < ib; ++j)
          for (std::size_t q = 0; q < r2; ++q)
            sw(Eigen::Index(p * ib + j), Eigen::Index(i * r2 + q)) =
                ab(Eigen::Index(p * ia + i), Eigen::Index(j * r2 + q));
    auto dec = detail::svd(Matrix(sw));
    const auto r = Eigen::Index(detail::truncation_rank(dec.s, delta));
    TTCore na = TTCore::from_left_unfolding(RowMatrix(dec.u.leftCols(r)), r0, ib);
    RowMatrix rest = dec.s.head(r).asDiagonal() * dec.v.leftCols(r).transpose();
    TTCore nb = TTCore::from_right_unfolding(rest, ia, r2);
    cores[k] = std::move(na);
    cores[k + 1] = std::move(nb);
    center = k + 1;
  }
  return TTTensor(std::move(cores));
}

inline TTTensor permute_axes(const TTTensor& t, std::initializer_list<std::size_t> order,
                             double eps) {
  return permute_axes(t, std::span<const std::size_t>(order.begin(), order.size()), eps);
}

/// Target/free split of a tensor: with the free-side cores right-orthonormal,
/// the unfolding M (rows = first K axes, cols = remaining axes) factors as
/// M = P * Q^T with Q^T Q = I.
struct InterfaceFactor {
  Matrix p;                         ///< prod(shape[0..K)) x R
  std::vector<TTCore> free_cores;   ///< right-orthonormal; first core has left rank R
  Shape target_shape;
  Shape free_shape;
};

inline InterfaceFactor interface_factor(const TTTensor& t, std::size_t split) {
  const std::size_t n = t.ndim();
  if (split < 1 || split >= n)
    throw InvalidArgument("interface_factor: split must satisfy 1 <= K < N");
  std::vector<TTCore> cores = t.cores();
  detail::right_orthogonalize(cores, split);
  RowMatrix acc = RowMatrix::Ones(1, 1);
  for (std::size_t k = 0; k < split; ++k) {
    const TTCore& c = cores[k];
    RowMatrix next = acc * c.right_unfolding();
    acc = Eigen::Map<RowMatrix>(next.data(), Eigen::Index(next.rows() * c.size),
                                Eigen::Index(c.right));
  }
  InterfaceFactor f;
  f.p = acc;
  f.free_cores.assign(cores.begin() + static_cast<std::ptrdiff_t>(split), cores.end());
  const Shape shape = t.shape();
  f.target_shape.assign(shape.begin(), shape.begin() + static_cast<std::ptrdiff_t>(split));
  f.free_shape.assign(shape.begin() + static_cast<std::ptrdiff_t>(split), shape.end());
  return f;
}

}  // namespace tt
}  // namespace ppx
