#pragma once

// Principal parameterizations: each partial function of a model, obtained by
// fixing the target variables, is mapped to a point (X, Y, Z). X is the
// partial's mean; (Y, Z) are its coordinates along the two leading principal
// directions of the doubly centered collection of partials.
//
// The compressed route never forms the I^K x I^K covariance. After moving the
// targets to the front and centering in TT form, the free side of the tensor
// is right-orthogonalized so the collection unfolds as M = P * Q^T with
// orthonormal Q. The covariance (1/n_free) M M^T then shares its nonzero
// spectrum with the R x R Gram (1/n_free) P^T P, and the scores are
// P * W / sqrt(n_free) for its eigenvectors W.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ppx/anova.hpp"
#include "ppx/dense_tensor.hpp"
#include "ppx/error.hpp"
#include "ppx/tt_tensor.hpp"

namespace ppx {

struct ParamOptions {
  /// Upper bound on the number of targets accepted (the library itself only
  /// needs K < N).
  std::size_t max_targets = 3;
  /// Rounding tolerance of the centering stages and of axis reordering.
  double round_eps = 1e-12;
};

/// Free-side basis retained for reconstructing partials from their (X, Y, Z).
struct ParamBasis {
  std::vector<std::size_t> free_axes;  ///< original ids, ascending
  std::vector<TTCore> free_cores;      ///< right-orthonormal; first core has left rank R
  Matrix directions;                   ///< R x 2 Gram eigenvectors (zero column if unused)
  double scale = 1.0;                  ///< sqrt(number of free grid cells)
  TTTensor cross_mean;                 ///< over the free axes
};

struct PrincipalParam {
  std::vector<std::size_t> targets;  ///< original axis ids, in output order
  Shape grid_shape;                  ///< bins of each target
  DenseTensor x, y, z;               ///< coordinate tensors of shape grid_shape
  std::array<double, 2> eigenvalues{0.0, 0.0};
  double total_energy = 0.0;  ///< mean squared norm of the centered partials
  double global_mean = 0.0;
  std::vector<double> slice_norms;  ///< norm of each centered partial
  std::vector<double> residual;     ///< distance of each partial to its reconstruction
  bool degenerate = false;          ///< centered collection collapsed to a point
  bool rotational_indeterminacy = false;
  std::shared_ptr<const ParamBasis> basis;  ///< null for the dense oracle

  std::size_t points() const noexcept { return x.size(); }
};

namespace param_detail {

/// Eigenvalues below this fraction of the trace are truncation noise.
inline constexpr double kEigenFloor = 1e-12;
inline constexpr double kTieTolerance = 1e-9;

inline std::vector<std::size_t> check_targets(std::size_t ndim, std::span<const std::size_t> targets,
                                              std::size_t max_targets, bool allow_all = false) {
  if (targets.empty()) throw InvalidArgument("principal_param: no target axes");
  if (targets.size() > max_targets)
    throw InvalidArgument("principal_param: at most " + std::to_string(max_targets) +
                          " target axes are supported");
  if (targets.size() > ndim || (targets.size() == ndim && !allow_all))
    throw InvalidArgument("principal_param: K must be smaller than the number of axes");
  std::vector<bool> seen(ndim, false);
  for (auto a : targets) {
    if (a >= ndim) throw InvalidArgument("principal_param: axis " + std::to_string(a) + " out of range");
    if (seen[a]) throw InvalidArgument("principal_param: repeated target axis");
    seen[a] = true;
  }
  std::vector<std::size_t> free;
  for (std::size_t k = 0; k < ndim; ++k)
    if (!seen[k]) free.push_back(k);
  return free;
}

/// Flips v so that its entry of largest magnitude is positive (ties resolved
/// towards the lowest index). Returns the applied sign.
inline double canonical_sign(Eigen::Ref<Vector> v) {
  if (v.size() == 0) return 1.0;
  const double m = v.cwiseAbs().maxCoeff();
  if (m == 0.0) return 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) >= m * (1.0 - kTieTolerance)) {
      if (v[i] < 0.0) {
        v = -v;
        return -1.0;
      }
      return 1.0;
    }
  return 1.0;
}

/// Leading two eigenpairs of a symmetric positive semidefinite matrix, in
/// descending order, with eigenvalues below the noise floor set to zero.
struct LeadingPairs {
  std::array<double, 2> values{0.0, 0.0};
  Matrix vectors;  ///< n x 2
  double trace = 0.0;
};

inline LeadingPairs leading_pairs(const Matrix& sym) {
  LeadingPairs out;
  const Eigen::Index n = sym.rows();
  out.vectors = Matrix::Zero(n, 2);
  out.trace = sym.trace();
  if (n == 0 || !(out.trace > 0.0)) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  for (Eigen::Index c = 0; c < 2 && c < n; ++c) {
    const double mu = es.eigenvalues()[n - 1 - c];
    if (mu <= kEigenFloor * out.trace) break;
    out.values[std::size_t(c)] = mu;
    out.vectors.col(c) = es.eigenvectors().col(n - 1 - c);
  }
  return out;
}

inline bool rotationally_indeterminate(const std::array<double, 2>& ev) {
  return ev[1] > 0.0 && ev[0] - ev[1] <= kTieTolerance * ev[0];
}

inline bool degenerate_energy(double total_energy, double second_moment) {
  return !(total_energy > anova::kDegenerateVariance * second_moment);
}

}  // namespace param_detail

/// Compressed-domain principal parameterization of t over the given targets.
inline PrincipalParam principal_param(const TTTensor& t, std::span<const std::size_t> targets,
                                      const ParamOptions& opts = {}) {
  const std::size_t n = t.ndim();
  const auto free = param_detail::check_targets(n, targets, opts.max_targets, true);
  const std::size_t k = targets.size();
  const Shape shape = t.shape();

  // Every axis is a target: each partial is a single value, so the collection
  // collapses onto the X axis and there is no basis to reconstruct from.
  if (free.empty()) {
    PrincipalParam p;
    p.targets.assign(targets.begin(), targets.end());
    const TTTensor tp = tt::permute_axes(t, std::vector<std::size_t>(targets.begin(), targets.end()),
                                         opts.round_eps);
    p.grid_shape = tp.shape();
    p.global_mean = tt::mean(tp);
    p.x = tt::to_dense(tp);
    p.y = DenseTensor(p.grid_shape);
    p.z = DenseTensor(p.grid_shape);
    p.slice_norms.assign(p.points(), 0.0);
    p.residual.assign(p.points(), 0.0);
    p.degenerate = true;
    return p;
  }

  std::vector<std::size_t> order(targets.begin(), targets.end());
  order.insert(order.end(), free.begin(), free.end());
  const TTTensor tp = tt::permute_axes(t, order, opts.round_eps);

  std::vector<std::size_t> target_pos(k), free_pos(n - k);
  std::iota(target_pos.begin(), target_pos.end(), 0);
  std::iota(free_pos.begin(), free_pos.end(), k);
  const Shape pshape = tp.shape();

  PrincipalParam p;
  p.targets.assign(targets.begin(), targets.end());
  p.grid_shape.assign(pshape.begin(), pshape.begin() + static_cast<std::ptrdiff_t>(k));
  p.global_mean = tt::mean(tp);

  // Stage A: within-mean becomes X and is removed from every partial.
  const TTTensor within = tt::mean_axes(tp, free_pos);
  p.x = tt::to_dense(within);
  const TTTensor corr =
      tt::round(tt::axpy(-1.0, anova::detail::broadcast_back(within, free_pos, pshape), tp),
                opts.round_eps);

  // Stage B: cross-mean moves the collection's origin to its barycenter.
  const TTTensor cross = tt::mean_axes(corr, target_pos);
  TTTensor cross_b = cross;
  for (std::size_t j = k; j-- > 0;) cross_b = tt::broadcast(cross_b, 0, pshape[j]);
  const TTTensor centered = tt::round(tt::axpy(-1.0, cross_b, corr), opts.round_eps);

  // Stage C on the R x R Gram of the interface factor.
  auto factor = tt::interface_factor(centered, k);
  const double n_free = shape_numel(factor.free_shape);
  const double n_points = static_cast<double>(factor.p.rows());
  const Matrix gram = factor.p.transpose() * factor.p / n_free;
  auto lead = param_detail::leading_pairs(gram);

  p.total_energy = lead.trace / n_points;
  p.degenerate = param_detail::degenerate_energy(p.total_energy, tt::dot(tp, tp));
  if (p.degenerate) {
    lead.values = {0.0, 0.0};
    lead.vectors.setZero();
  }
  p.eigenvalues = {lead.values[0] / n_points, lead.values[1] / n_points};
  p.rotational_indeterminacy = param_detail::rotationally_indeterminate(p.eigenvalues);

  const double scale = std::sqrt(n_free);
  Matrix scores = factor.p * lead.vectors / scale;
  for (Eigen::Index c = 0; c < 2; ++c)
    if (param_detail::canonical_sign(scores.col(c)) < 0.0) lead.vectors.col(c) *= -1.0;

  p.y = DenseTensor(p.grid_shape);
  p.z = DenseTensor(p.grid_shape);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    p.y.values()[std::size_t(i)] = scores(i, 0);
    p.z.values()[std::size_t(i)] = scores(i, 1);
  }

  // Residuals from the component of each row orthogonal to the two directions,
  // so that small errors are not lost to cancellation.
  const Matrix orth = factor.p - (factor.p * lead.vectors) * lead.vectors.transpose();
  p.slice_norms.resize(p.points());
  p.residual.resize(p.points());
  for (Eigen::Index i = 0; i < factor.p.rows(); ++i) {
    p.slice_norms[std::size_t(i)] = factor.p.row(i).norm() / scale;
    p.residual[std::size_t(i)] = orth.row(i).norm() / scale;
  }

  auto basis = std::make_shared<ParamBasis>();
  basis->free_axes = free;
  basis->free_cores = std::move(factor.free_cores);
  basis->directions = lead.vectors;
  basis->scale = scale;
  basis->cross_mean = cross;
  p.basis = std::move(basis);
  return p;
}

inline PrincipalParam principal_param(const TTTensor& t, std::initializer_list<std::size_t> targets,
                                      const ParamOptions& opts = {}) {
  return principal_param(t, std::span<const std::size_t>(targets.begin(), targets.size()), opts);
}

/// Brute-force parameterization: explicit within/cross means and the full
/// I^K x I^K covariance filled pair by pair. Intended for verification and for
/// small exports.
inline PrincipalParam dense_principal_param(const DenseTensor& t,
                                            std::span<const std::size_t> targets,
                                            const ParamOptions& opts = {}) {
  const std::size_t n = t.ndim();
  const auto free = param_detail::check_targets(n, targets, std::max(opts.max_targets, n));
  const std::size_t k = targets.size();
  const Shape& shape = t.shape();

  PrincipalParam p;
  p.targets.assign(targets.begin(), targets.end());
  for (auto a : targets) p.grid_shape.push_back(shape[a]);
  Shape free_shape;
  for (auto a : free) free_shape.push_back(shape[a]);
  const auto n_points = static_cast<std::size_t>(shape_numel(p.grid_shape));
  const auto n_free = static_cast<std::size_t>(shape_numel(free_shape));
  if (static_cast<double>(n_points) * static_cast<double>(n_points) > static_cast<double>(kDenseGuard))
    throw GuardExceeded("dense covariance", static_cast<double>(n_points) * double(n_points),
                        static_cast<double>(kDenseGuard));

  // Partials as rows: row = target multi-index, column = free multi-index.
  Matrix m(static_cast<Eigen::Index>(n_points), static_cast<Eigen::Index>(n_free));
  DenseTensor grid(p.grid_shape), rest(free_shape);
  MultiIndex full(n);
  for (std::size_t i = 0; i < n_points; ++i) {
    const auto ti = grid.multi_index(i);
    for (std::size_t a = 0; a < k; ++a) full[targets[a]] = ti[a];
    for (std::size_t j = 0; j < n_free; ++j) {
      const auto fj = rest.multi_index(j);
      for (std::size_t b = 0; b < free.size(); ++b) full[free[b]] = fj[b];
      m(Eigen::Index(i), Eigen::Index(j)) = t(full);
    }
  }

  double sumsq = 0.0, sum = 0.0;
  for (double v : t.values()) {
    sumsq += v * v;
    sum += v;
  }
  p.global_mean = sum / static_cast<double>(t.size());

  // Stage A
  p.x = DenseTensor(p.grid_shape);
  for (std::size_t i = 0; i < n_points; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n_free; ++j) s += m(Eigen::Index(i), Eigen::Index(j));
    p.x.values()[i] = s / static_cast<double>(n_free);
    for (std::size_t j = 0; j < n_free; ++j) m(Eigen::Index(i), Eigen::Index(j)) -= p.x.values()[i];
  }
  // Stage B
  for (std::size_t j = 0; j < n_free; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n_points; ++i) s += m(Eigen::Index(i), Eigen::Index(j));
    s /= static_cast<double>(n_points);
    for (std::size_t i = 0; i < n_points; ++i) m(Eigen::Index(i), Eigen::Index(j)) -= s;
  }
  // Stage C: covariance between every pair of partials.
  Matrix c(static_cast<Eigen::Index>(n_points), static_cast<Eigen::Index>(n_points));
  for (std::size_t i = 0; i < n_points; ++i)
    for (std::size_t j = 0; j < n_points; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < n_free; ++q)
        s += m(Eigen::Index(i), Eigen::Index(q)) * m(Eigen::Index(j), Eigen::Index(q));
      c(Eigen::Index(i), Eigen::Index(j)) = s / static_cast<double>(n_free);
    }
  auto lead = param_detail::leading_pairs(c);
  p.total_energy = lead.trace / static_cast<double>(n_points);
  p.degenerate =
      param_detail::degenerate_energy(p.total_energy, sumsq / static_cast<double>(t.size()));
  if (p.degenerate) {
    lead.values = {0.0, 0.0};
    lead.vectors.setZero();
  }
  p.eigenvalues = {lead.values[0] / double(n_points), lead.values[1] / double(n_points)};
  p.rotational_indeterminacy = param_detail::rotationally_indeterminate(p.eigenvalues);

  p.y = DenseTensor(p.grid_shape);
  p.z = DenseTensor(p.grid_shape);
  Matrix basis_fn = Matrix::Zero(2, Eigen::Index(n_free));
  for (Eigen::Index col = 0; col < 2; ++col) {
    if (lead.values[std::size_t(col)] <= 0.0) continue;
    Vector score = lead.vectors.col(col) * std::sqrt(lead.values[std::size_t(col)]);
    const double sign = param_detail::canonical_sign(score);
    auto& dst = col == 0 ? p.y : p.z;
    for (std::size_t i = 0; i < n_points; ++i) dst.values()[i] = score[Eigen::Index(i)];
    basis_fn.row(col) =
        sign * lead.vectors.col(col).transpose() * m / std::sqrt(lead.values[std::size_t(col)]);
  }

  p.slice_norms.resize(n_points);
  p.residual.resize(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    Eigen::RowVectorXd row = m.row(Eigen::Index(i));
    p.slice_norms[i] = row.norm() / std::sqrt(static_cast<double>(n_free));
    Eigen::RowVectorXd err = row - p.y.values()[i] * basis_fn.row(0) - p.z.values()[i] * basis_fn.row(1);
    p.residual[i] = err.norm() / std::sqrt(static_cast<double>(n_free));
  }
  return p;
}

inline PrincipalParam dense_principal_param(const DenseTensor& t,
                                            std::initializer_list<std::size_t> targets) {
  return dense_principal_param(t, std::span<const std::size_t>(targets.begin(), targets.size()));
}

/// Expands the point at the given target multi-index back into a partial over
/// the free axes: cross-mean + X + Y*v1 + Z*v2.
inline TTTensor reconstruct(const PrincipalParam& p, std::span<const std::size_t> point) {
  if (!p.basis) throw InvalidArgument("reconstruct: parameterization carries no basis");
  const auto& b = *p.basis;
  const std::size_t lin = p.x.linear_index(point);
  const Shape free_shape = b.cross_mean.shape();
  TTTensor out = tt::axpy(p.x.values()[lin], tt::constant(free_shape, 1.0), b.cross_mean);
  if (!p.degenerate) {
    for (Eigen::Index c = 0; c < 2; ++c) {
      const double coef = (c == 0 ? p.y : p.z).values()[lin];
      if (coef == 0.0 || b.directions.col(c).isZero()) continue;
      std::vector<TTCore> cores = b.free_cores;
      Eigen::RowVectorXd w = b.directions.col(c).transpose() * b.scale;
      RowMatrix first = w * cores[0].right_unfolding();
      cores[0] = TTCore::from_right_unfolding(first, cores[0].size, cores[0].right);
      out = tt::axpy(coef, TTTensor(std::move(cores)), out);
    }
  }
  return tt::round(out, 1e-14);
}

inline TTTensor reconstruct(const PrincipalParam& p, std::initializer_list<std::size_t> point) {
  return reconstruct(p, std::span<const std::size_t>(point.begin(), point.size()));
}

struct LocalFields {
  std::vector<double> residual;
  /// Per target axis, per point, d(X, Y, Z)/dx in normalized [0, 1] units.
  std::vector<std::vector<std::array<double, 3>>> derivatives;
  /// Norm of the mixed second derivative; only for two targets.
  std::optional<std::vector<double>> mixed_norm;
};

namespace param_detail {

/// First derivative along one axis of a row-major grid. Central differences
/// inside, second-order one-sided stencils at the ends (first order when the
/// axis has only two bins).
inline std::vector<double> differentiate(const std::vector<double>& f, const Shape& shape,
                                         std::size_t axis) {
  const std::size_t len = shape[axis];
  const double h = 1.0 / static_cast<double>(len);
  std::size_t stride = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) stride *= shape[a];
  std::vector<double> d(f.size(), 0.0);
  for (std::size_t lin = 0; lin < f.size(); ++lin) {
    const std::size_t i = (lin / stride) % len;
    const std::size_t base = lin - i * stride;
    auto at = [&](std::size_t j) { return f[base + j * stride]; };
    if (len == 2) {
      d[lin] = (at(1) - at(0)) / h;
    } else if (i == 0) {
      d[lin] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    } else if (i + 1 == len) {
      d[lin] = (3.0 * at(len - 1) - 4.0 * at(len - 2) + at(len - 3)) / (2.0 * h);
    } else {
      d[lin] = (at(i + 1) - at(i - 1)) / (2.0 * h);
    }
  }
  return d;
}

}  // namespace param_detail

inline LocalFields local_fields(const TTTensor& t, const PrincipalParam& p) {
  for (std::size_t a = 0; a < p.targets.size(); ++a)
    if (p.targets[a] >= t.ndim() || t.core(p.targets[a]).size != p.grid_shape[a])
      throw InvalidArgument("local_fields: parameterization does not match the tensor");
  LocalFields lf;
  lf.residual = p.residual;
  const std::array<const DenseTensor*, 3> coords{&p.x, &p.y, &p.z};
  const std::size_t k = p.targets.size();
  std::vector<std::array<std::vector<double>, 3>> first(k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t c = 0; c < 3; ++c)
      first[a][c] = param_detail::differentiate(coords[c]->values(), p.grid_shape, a);
    std::vector<std::array<double, 3>> field(p.points());
    for (std::size_t i = 0; i < p.points(); ++i)
      field[i] = {first[a][0][i], first[a][1][i], first[a][2][i]};
    lf.derivatives.push_back(std::move(field));
  }
  if (k == 2) {
    std::vector<double> mixed(p.points(), 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
      const auto dd = param_detail::differentiate(first[0][c], p.grid_shape, 1);
      for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += dd[i] * dd[i];
    }
    for (auto& v : mixed) v = std::sqrt(v);
    lf.mixed_norm = std::move(mixed);
  }
  return lf;
}

using Polyline = std::vector<std::array<double, 3>>;

struct TrajectoryBundle {
  PrincipalParam param;  ///< K = 3 parameterization over (surface..., track)
  std::vector<std::array<std::size_t, 2>> at;
  std::vector<Polyline> polylines;
};

/// Tracks surface points of the (n, m) parameterization while a third axis
/// moves: fibers along the track axis of the K = 3 parameterization.
inline TrajectoryBundle trajectory_curves(const TTTensor& t, std::array<std::size_t, 2> surface,
                                          std::size_t track,
                                          std::span<const std::array<std::size_t, 2>> at,
                                          const ParamOptions& opts = {}) {
  if (track == surface[0] || track == surface[1])
    throw InvalidArgument("trajectory_curves: track axis must differ from the surface axes");
  const std::size_t targets[] = {surface[0], surface[1], track};
  TrajectoryBundle b;
  b.param = principal_param(t, targets, opts);
  const auto& g = b.param.grid_shape;
  for (const auto& pt : at) {
    if (pt[0] >= g[0] || pt[1] >= g[1])
      throw InvalidArgument("trajectory_curves: surface point out of range");
    Polyline line(g[2]);
    for (std::size_t j = 0; j < g[2]; ++j) {
      const std::size_t lin = (pt[0] * g[1] + pt[1]) * g[2] + j;
      line[j] = {b.param.x.values()[lin], b.param.y.values()[lin], b.param.z.values()[lin]};
    }
    b.at.push_back(pt);
    b.polylines.push_back(std::move(line));
  }
  return b;
}

}  // namespace ppx
