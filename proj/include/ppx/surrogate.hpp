#pragma once

// Surrogate construction from black-box grid models: exhaustive evaluation
// followed by TT-SVD, or alternating cross approximation with maxvol-selected
// interpolation sets.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ppx/axis.hpp"
#include "ppx/dense_tensor.hpp"
#include "ppx/error.hpp"
#include "ppx/tt_tensor.hpp"

namespace ppx {

/// A model sampled on a tensor grid. `evaluate` maps one input vector (one
/// value per axis) to `outputs` values. Models backed by a stored grid also
/// provide `lookup`, which takes bin indices directly.
struct GridModel {
  using Evaluate = std::function<void(std::span<const double>, std::span<double>)>;
  using Lookup = std::function<void(std::span<const std::size_t>, std::span<double>)>;

  std::string name;
  std::vector<AxisGrid> axes;
  std::size_t outputs = 1;
  Evaluate evaluate;
  Lookup lookup;

  void validate() const {
    if (axes.empty()) throw InvalidArgument("model '" + name + "' has no axes");
    for (const auto& a : axes) a.validate();
    if (outputs < 1) throw InvalidArgument("model '" + name + "' has no outputs");
    if (!evaluate && !lookup) throw InvalidArgument("model '" + name + "' cannot be evaluated");
  }

  /// Shape of the surrogate tensor: one axis per input plus a trailing output
  /// axis when outputs > 1.
  Shape tensor_shape() const {
    Shape s;
    for (const auto& a : axes) s.push_back(a.bins);
    if (outputs > 1) s.push_back(outputs);
    return s;
  }

  /// Axis descriptions of the surrogate tensor (the output axis is categorical
  /// over 0..M-1).
  std::vector<AxisGrid> tensor_axes() const {
    auto out = axes;
    if (outputs > 1)
      out.push_back({"output", 0.0, static_cast<double>(outputs - 1), outputs, AxisKind::categorical});
    return out;
  }

  void eval_bins(std::span<const std::size_t> bins, std::span<double> out) const {
    if (lookup) {
      lookup(bins, out);
      return;
    }
    std::vector<double> x(axes.size());
    for (std::size_t k = 0; k < axes.size(); ++k) x[k] = axes[k].value(bins[k]);
    evaluate(x, out);
  }
};

struct BuildReport {
  std::string method;
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::size_t samples_taken = 0;
  double validation_error = 0.0;
  std::size_t validation_size = 0;
  std::vector<std::size_t> final_ranks;
  double wall_time = 0.0;
  std::size_t sweeps = 0;
  bool converged = true;
  std::string warning;
};

inline nlohmann::json to_json(const BuildReport& r) {
  nlohmann::json j{{"method", r.method},
                   {"eps", r.eps},
                   {"seed", r.seed},
                   {"samples_taken", r.samples_taken},
                   {"validation_error", r.validation_error},
                   {"validation_size", r.validation_size},
                   {"final_ranks", r.final_ranks},
                   {"wall_time", r.wall_time},
                   {"sweeps", r.sweeps},
                   {"converged", r.converged}};
  if (!r.warning.empty()) j["warning"] = r.warning;
  return j;
}

inline BuildReport build_report_from_json(const nlohmann::json& j) {
  BuildReport r;
  r.method = j.value("method", "");
  r.eps = j.value("eps", 0.0);
  r.seed = j.value("seed", std::uint64_t{0});
  r.samples_taken = j.value("samples_taken", std::size_t{0});
  r.validation_error = j.value("validation_error", 0.0);
  r.validation_size = j.value("validation_size", std::size_t{0});
  r.final_ranks = j.value("final_ranks", std::vector<std::size_t>{});
  r.wall_time = j.value("wall_time", 0.0);
  r.sweeps = j.value("sweeps", std::size_t{0});
  r.converged = j.value("converged", true);
  r.warning = j.value("warning", "");
  return r;
}

struct BuildResult {
  TTTensor tensor;
  BuildReport report;
};

/// Worker count for internal parallel loops: hardware concurrency, capped by
/// the PPX_THREADS environment variable when set.
inline std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PPX_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) n = std::min(n, static_cast<std::size_t>(v));
  }
  return n;
}

/// Runs fn(i) for i in [0, n) on up to worker_count() threads.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(1, n / 64));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      try {
        for (std::size_t i; (i = next.fetch_add(256)) < n;)
          for (std::size_t j = i; j < std::min(n, i + 256); ++j) fn(j);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace surrogate_detail {

inline constexpr std::size_t kValidationSize = 1000;

/// Evaluates tensor entries (multi-indices over the tensor axes, packed row
/// after row) and counts distinct model calls.
class Sampler {
 public:
  explicit Sampler(const GridModel& m) : model_(m), n_in_(m.axes.size()), shape_(m.tensor_shape()) {}

  std::size_t ndim() const { return shape_.size(); }
  const Shape& shape() const { return shape_; }
  std::size_t samples() const { return samples_; }

  std::vector<double> operator()(const std::vector<std::size_t>& packed) {
    const std::size_t d = ndim();
    const std::size_t count = packed.size() / d;
    std::vector<double> values(count);
    if (model_.outputs == 1) {
      parallel_for(count, [&](std::size_t i) {
        double v = 0.0;
        model_.eval_bins(std::span<const std::size_t>(packed.data() + i * d, n_in_), {&v, 1});
        values[i] = v;
      });
      samples_ += count;
    } else {
      // Entries sharing an input point differ only in the output index.
      std::map<std::vector<std::size_t>, std::size_t> slot;
      std::vector<std::size_t> owner(count);
      for (std::size_t i = 0; i < count; ++i) {
        std::vector<std::size_t> key(packed.begin() + std::ptrdiff_t(i * d),
                                     packed.begin() + std::ptrdiff_t(i * d + n_in_));
        owner[i] = slot.emplace(std::move(key), slot.size()).first->second;
      }
      std::vector<const std::vector<std::size_t>*> keys(slot.size());
      for (const auto& [k, s] : slot) keys[s] = &k;
      std::vector<double> out(slot.size() * model_.outputs);
      parallel_for(keys.size(), [&](std::size_t s) {
        model_.eval_bins(*keys[s], std::span<double>(out.data() + s * model_.outputs, model_.outputs));
      });
      for (std::size_t i = 0; i < count; ++i) values[i] = out[owner[i] * model_.outputs + packed[i * d + n_in_]];
      samples_ += keys.size();
    }
    for (double v : values)
      if (!std::isfinite(v)) throw InvalidArgument("model '" + model_.name + "' returned a non-finite value");
    return values;
  }

 private:
  const GridModel& model_;
  std::size_t n_in_;
  Shape shape_;
  std::size_t samples_ = 0;
};

inline std::vector<std::size_t> random_indices(const Shape& shape, std::size_t count,
                                               std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  out.reserve(count * shape.size());
  for (std::size_t i = 0; i < count; ++i)
    for (auto n : shape) out.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  return out;
}

inline double validation_error(const TTTensor& t, const std::vector<std::size_t>& packed,
                               const std::vector<double>& truth) {
  const std::size_t d = t.ndim();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double p = tt::eval(t, std::span<const std::size_t>(packed.data() + i * d, d));
    num += (p - truth[i]) * (p - truth[i]);
    den += truth[i] * truth[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace surrogate_detail

/// Evaluates every grid cell (trailing output axis for M > 1). Guarded.
inline DenseTensor evaluate_grid(const GridModel& m) {
  m.validate();
  const Shape shape = m.tensor_shape();
  DenseTensor grid(shape);  // enforces the dense guard
  const Shape in_shape(shape.begin(), shape.begin() + std::ptrdiff_t(m.axes.size()));
  const auto points = static_cast<std::size_t>(shape_numel(in_shape));
  DenseTensor index_space(in_shape);
  parallel_for(points, [&](std::size_t p) {
    const auto idx = index_space.multi_index(p);
    m.eval_bins(idx, std::span<double>(grid.values().data() + p * m.outputs, m.outputs));
  });
  if (!grid.all_finite()) throw InvalidArgument("model '" + m.name + "' returned a non-finite value");
  return grid;
}

/// Full-grid build. Compression uses min(eps, 1e-10); grids made only of
/// categorical axes are kept exact.
inline BuildResult build_full(const GridModel& m, double eps, std::uint64_t seed = 0) {
  tt::detail::check_eps(eps, "build_full");
  m.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Shape shape = m.tensor_shape();
  if (shape_numel(shape) > static_cast<double>(kDenseGuard))
    throw GuardExceeded("full build of '" + m.name + "' (use cross approximation)", shape_numel(shape),
                        static_cast<double>(kDenseGuard));
  const DenseTensor grid = evaluate_grid(m);
  const bool categorical = std::all_of(m.axes.begin(), m.axes.end(),
                                       [](const AxisGrid& a) { return a.kind == AxisKind::categorical; });
  BuildResult r;
  r.tensor = tt::from_dense(grid, categorical ? 1e-15 : std::min(eps, 1e-10));

  std::mt19937_64 rng(seed);
  const auto packed = surrogate_detail::random_indices(shape, surrogate_detail::kValidationSize, rng);
  std::vector<double> truth(surrogate_detail::kValidationSize);
  for (std::size_t i = 0; i < truth.size(); ++i)
    truth[i] = grid(std::span<const std::size_t>(packed.data() + i * shape.size(), shape.size()));

  auto& rep = r.report;
  rep.method = "full";
  rep.eps = eps;
  rep.seed = seed;
  rep.samples_taken = grid.size() / m.outputs;
  rep.validation_size = truth.size();
  rep.validation_error = surrogate_detail::validation_error(r.tensor, packed, truth);
  rep.final_ranks = r.tensor.ranks();
  rep.converged = rep.validation_error <= eps;
  if (!rep.converged) rep.warning = "validation error above tolerance";
  rep.wall_time = surrogate_detail::seconds_since(t0);
  return r;
}

struct CrossOptions {
  std::size_t rank_cap = 200;
  std::size_t sweep_cap = 50;
  /// Extra random fibers per bond and half-sweep; bounds rank growth.
  std::size_t kick = 2;
  std::size_t initial_rank = 1;
  /// Singular value cut relative to eps.
  double svd_factor = 1e-2;
  /// Called after every half-sweep with (sweep, validation error, max rank, samples).
  std::function<void(std::size_t, double, std::size_t, std::size_t)> progress;
};

/// Row indices of a tall matrix (n x r, full column rank) spanning a
/// submatrix of approximately maximal volume.
inline std::vector<Eigen::Index> maxvol(const Matrix& u, double tol = 1.05, int max_iter = 200) {
  const Eigen::Index n = u.rows(), r = u.cols();
  if (r > n) throw InvalidArgument("maxvol: matrix must be tall");
  Eigen::ColPivHouseholderQR<Matrix> qr(u.transpose());
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(r));
  for (Eigen::Index j = 0; j < r; ++j) rows[std::size_t(j)] = qr.colsPermutation().indices()[j];
  for (int it = 0; it < max_iter; ++it) {
    Matrix sub(r, r);
    for (Eigen::Index j = 0; j < r; ++j) sub.row(j) = u.row(rows[std::size_t(j)]);
    const Matrix b = sub.transpose().partialPivLu().solve(u.transpose()).transpose();
    Eigen::Index i = 0, j = 0;
    const double m = b.cwiseAbs().maxCoeff(&i, &j);
    if (m <= tol) break;
    rows[std::size_t(j)] = i;
  }
  return rows;
}

/// Alternating one-site cross approximation. Each half-sweep refits every
/// bond from fibers through the current interpolation sets plus a few random
/// ones, then checks the relative error on a fixed random validation set.
inline BuildResult build_cross(const GridModel& m, double eps, std::uint64_t seed,
                               const CrossOptions& opts = {}) {
  using surrogate_detail::Sampler;
  tt::detail::check_eps(eps, "build_cross");
  m.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Sampler sample(m);
  const Shape shape = sample.shape();
  const std::size_t n = shape.size();
  std::mt19937_64 rng(seed);

  const auto val_idx = surrogate_detail::random_indices(shape, surrogate_detail::kValidationSize, rng);
  const auto val_truth = sample(val_idx);

  BuildResult r;
  auto& rep = r.report;
  rep.method = "cross";
  rep.eps = eps;
  rep.seed = seed;
  rep.validation_size = val_truth.size();

  if (n == 1) {
    std::vector<std::size_t> all(shape[0]);
    for (std::size_t i = 0; i < shape[0]; ++i) all[i] = i;
    TTCore c(1, shape[0], 1);
    c.data = sample(all);
    r.tensor = TTTensor({c});
    rep.sweeps = 1;
  } else {
    using Multi = std::vector<std::size_t>;
    // left[k]: prefixes over axes [0, k); right[k]: suffixes over axes [k, n).
    std::vector<std::vector<Multi>> left(n + 1), right(n + 1);
    left[0] = {Multi{}};
    right[n] = {Multi{}};
    auto random_suffix = [&](std::size_t from) {
      Multi s;
      for (std::size_t k = from; k < n; ++k)
        s.push_back(std::uniform_int_distribution<std::size_t>(0, shape[k] - 1)(rng));
      return s;
    };
    auto random_prefix = [&](std::size_t to) {
      Multi s;
      for (std::size_t k = 0; k < to; ++k)
        s.push_back(std::uniform_int_distribution<std::size_t>(0, shape[k] - 1)(rng));
      return s;
    };
    for (std::size_t k = n - 1; k >= 1; --k)
      for (std::size_t q = 0; q < opts.initial_rank; ++q) right[k].push_back(random_suffix(k));

    std::vector<TTCore> cores(n);
    auto truncated_rank = [&](const Vector& sv, std::size_t cap) {
      const std::size_t rk = tt::detail::truncation_rank(sv, opts.svd_factor * eps * sv.norm());
      return std::min({rk, cap, opts.rank_cap});
    };
    auto fiber_values = [&](const std::vector<Multi>& ls, std::size_t k, const std::vector<Multi>& rs) {
      // Row-major over (left, i_k, right).
      std::vector<std::size_t> packed;
      packed.reserve(ls.size() * shape[k] * rs.size() * n);
      for (const auto& l : ls)
        for (std::size_t i = 0; i < shape[k]; ++i)
          for (const auto& rr : rs) {
            packed.insert(packed.end(), l.begin(), l.end());
            packed.push_back(i);
            packed.insert(packed.end(), rr.begin(), rr.end());
          }
      return sample(packed);
    };

    double err = 0.0;
    bool done = false;
    for (std::size_t sweep = 0; sweep < opts.sweep_cap && !done; ++sweep) {
      rep.sweeps = sweep + 1;
      for (int dir = 0; dir < 2 && !done; ++dir) {
        if (dir == 0) {
          for (std::size_t k = 0; k + 1 < n; ++k) {
            auto cols = right[k + 1];
            for (std::size_t q = 0; q < opts.kick; ++q) cols.push_back(random_suffix(k + 1));
            const auto vals = fiber_values(left[k], k, cols);
            const Eigen::Index rows_n = Eigen::Index(left[k].size() * shape[k]);
            const Matrix a = Eigen::Map<const RowMatrix>(vals.data(), rows_n, Eigen::Index(cols.size()));
            const auto dec = tt::detail::svd(a);
            const auto rk = truncated_rank(dec.s, std::size_t(std::min(a.rows(), a.cols())));
            const Matrix u = dec.u.leftCols(Eigen::Index(rk));
            const auto piv = maxvol(u);
            Matrix sub(static_cast<Eigen::Index>(rk), static_cast<Eigen::Index>(rk));
            for (std::size_t j = 0; j < rk; ++j) sub.row(Eigen::Index(j)) = u.row(piv[j]);
            const RowMatrix core = sub.transpose().partialPivLu().solve(u.transpose()).transpose();
            cores[k] = TTCore::from_left_unfolding(core, left[k].size(), shape[k]);
            left[k + 1].clear();
            for (auto p : piv) {
              Multi pre = left[k][std::size_t(p) / shape[k]];
              pre.push_back(std::size_t(p) % shape[k]);
              left[k + 1].push_back(std::move(pre));
            }
          }
          const auto vals = fiber_values(left[n - 1], n - 1, right[n]);
          cores[n - 1] = TTCore(left[n - 1].size(), shape[n - 1], 1);
          cores[n - 1].data = vals;
        } else {
          for (std::size_t k = n - 1; k >= 1; --k) {
            auto rows = left[k];
            for (std::size_t q = 0; q < opts.kick; ++q) rows.push_back(random_prefix(k));
            const auto vals = fiber_values(rows, k, right[k + 1]);
            const Eigen::Index cols_n = Eigen::Index(shape[k] * right[k + 1].size());
            const Matrix a = Eigen::Map<const RowMatrix>(vals.data(), Eigen::Index(rows.size()), cols_n);
            const auto dec = tt::detail::svd(a);
            const auto rk = truncated_rank(dec.s, std::size_t(std::min(a.rows(), a.cols())));
            const Matrix v = dec.v.leftCols(Eigen::Index(rk));
            const auto piv = maxvol(v);
            Matrix sub(static_cast<Eigen::Index>(rk), static_cast<Eigen::Index>(rk));
            for (std::size_t j = 0; j < rk; ++j) sub.row(Eigen::Index(j)) = v.row(piv[j]);
            const RowMatrix core = sub.transpose().partialPivLu().solve(v.transpose());
            cores[k] = TTCore::from_right_unfolding(core, shape[k], right[k + 1].size());
            const std::size_t rn = right[k + 1].size();
            right[k].clear();
            for (auto p : piv) {
              Multi suf{std::size_t(p) / rn};
              const auto& tail = right[k + 1][std::size_t(p) % rn];
              suf.insert(suf.end(), tail.begin(), tail.end());
              right[k].push_back(std::move(suf));
            }
          }
          const auto vals = fiber_values(left[0], 0, right[1]);
          cores[0] = TTCore(1, shape[0], right[1].size());
          cores[0].data = vals;
        }
        r.tensor = TTTensor(cores);
        err = surrogate_detail::validation_error(r.tensor, val_idx, val_truth);
        done = err <= eps;
        if (opts.progress) opts.progress(sweep + 1, err, r.tensor.max_rank(), sample.samples());
      }
    }
    rep.converged = done;
    if (!done) {
      const bool capped = r.tensor.max_rank() >= opts.rank_cap;
      rep.warning = capped ? "rank cap reached without convergence"
                           : "sweep cap reached without convergence";
    }
    // Drop redundant rank; the validation error below refers to the result.
    r.tensor = tt::round(r.tensor, opts.svd_factor * eps);
  }

  rep.samples_taken = sample.samples();
  rep.validation_error = surrogate_detail::validation_error(r.tensor, val_idx, val_truth);
  rep.final_ranks = r.tensor.ranks();
  if (rep.converged && rep.validation_error > eps) {
    rep.converged = false;
    rep.warning = "validation error above tolerance after rounding";
  }
  rep.wall_time = surrogate_detail::seconds_since(t0);
  return r;
}

}  // namespace ppx
