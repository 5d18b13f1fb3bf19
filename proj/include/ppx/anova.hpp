#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppx/error.hpp"
#include "ppx/tt_tensor.hpp"

namespace ppx {

/// Conditioning of a model on one axis: the axis is pinned to a bin index.
struct AxisFix {
  std::size_t axis = 0;
  std::size_t index = 0;
};

namespace anova {

/// Relative variance floor below which a model counts as constant.
inline constexpr double kDegenerateVariance = 1e-24;

namespace detail {

inline std::vector<std::size_t> sorted_axis_set(const TTTensor& t,
                                                std::span<const std::size_t> axes,
                                                const char* op, bool allow_all = false) {
  if (axes.empty()) throw InvalidArgument(std::string(op) + ": axis set is empty");
  std::vector<std::size_t> s(axes.begin(), axes.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end())
    throw InvalidArgument(std::string(op) + ": repeated axis");
  if (s.back() >= t.ndim())
    throw InvalidArgument(std::string(op) + ": axis " + std::to_string(s.back()) +
                          " out of range");
  if (!allow_all && s.size() == t.ndim())
    throw InvalidArgument(std::string(op) + ": axis set must leave at least one free axis");
  return s;
}

inline std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> sorted) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < n; ++k)
    if (!std::binary_search(sorted.begin(), sorted.end(), k)) out.push_back(k);
  return out;
}

/// Re-inserts averaged axes (ascending positions) as constant axes.
inline TTTensor broadcast_back(TTTensor t, std::span<const std::size_t> positions,
                               const Shape& full_shape) {
  for (auto p : positions) t = tt::broadcast(t, p, full_shape[p]);
  return t;
}

}  // namespace detail

/// Population variance of all entries under the uniform grid measure.
inline double variance(const TTTensor& t) {
  if (t.is_scalar()) return 0.0;
  const double m = tt::mean(t);
  const double nrm = tt::norm(tt::axpy(-m, tt::constant(t.shape(), 1.0), t));
  return nrm * nrm / t.numel();
}

/// Mean of each partial over its free axes; result spans the target axes in
/// ascending order.
inline TTTensor within_mean(const TTTensor& t, std::span<const std::size_t> targets) {
  const auto tg = detail::sorted_axis_set(t, targets, "within_mean");
  return tt::mean_axes(t, detail::complement(t.ndim(), tg));
}

/// t minus its within-mean, rounded at 1e-12.
inline TTTensor corrected(const TTTensor& t, std::span<const std::size_t> targets) {
  const auto tg = detail::sorted_axis_set(t, targets, "corrected");
  const auto free = detail::complement(t.ndim(), tg);
  auto w = detail::broadcast_back(tt::mean_axes(t, free), free, t.shape());
  return tt::round(tt::axpy(-1.0, w, t), 1e-12);
}

/// Average of a corrected tensor over the target axes; spans the free axes.
inline TTTensor cross_mean(const TTTensor& t_corrected, std::span<const std::size_t> targets) {
  const auto tg = detail::sorted_axis_set(t_corrected, targets, "cross_mean");
  return tt::mean_axes(t_corrected, tg);
}

inline TTTensor within_mean(const TTTensor& t, std::initializer_list<std::size_t> targets) {
  return within_mean(t, std::span<const std::size_t>(targets.begin(), targets.size()));
}
inline TTTensor corrected(const TTTensor& t, std::initializer_list<std::size_t> targets) {
  return corrected(t, std::span<const std::size_t>(targets.begin(), targets.size()));
}
inline TTTensor cross_mean(const TTTensor& t, std::initializer_list<std::size_t> targets) {
  return cross_mean(t, std::span<const std::size_t>(targets.begin(), targets.size()));
}

struct SobolIndex {
  double value = 0.0;
  bool degenerate = false;
  operator double() const noexcept { return value; }
};

/// Shared denominator for the index functions.
struct ModelVariance {
  double variance = 0.0;
  bool degenerate = false;

  explicit ModelVariance(const TTTensor& t) {
    variance = anova::variance(t);
    const double m = t.is_scalar() ? t.scalar_value() : tt::mean(t);
    degenerate = !(variance > kDegenerateVariance * (m * m + variance));
  }
};

/// Var[E[f | x_vars]] / Var[f].
inline SobolIndex sobol_closed(const TTTensor& t, std::span<const std::size_t> vars,
                               const ModelVariance& mv) {
  detail::sorted_axis_set(t, vars, "sobol_closed");
  if (mv.degenerate) return {0.0, true};
  return {variance(within_mean(t, vars)) / mv.variance, false};
}

inline SobolIndex sobol_closed(const TTTensor& t, std::span<const std::size_t> vars) {
  return sobol_closed(t, vars, ModelVariance(t));
}

inline SobolIndex sobol_first(const TTTensor& t, std::size_t n) {
  const std::size_t v[] = {n};
  return sobol_closed(t, v);
}

/// E[Var[f | x_~vars]] / Var[f]: the share of variance involving any of vars.
inline SobolIndex sobol_total(const TTTensor& t, std::span<const std::size_t> vars,
                              const ModelVariance& mv) {
  const auto s = detail::sorted_axis_set(t, vars, "sobol_total", true);
  if (mv.degenerate) return {0.0, true};
  auto centered = tt::axpy(-1.0, detail::broadcast_back(tt::mean_axes(t, s), s, t.shape()), t);
  const double nrm = tt::norm(centered);
  return {nrm * nrm / t.numel() / mv.variance, false};
}

inline SobolIndex sobol_total(const TTTensor& t, std::size_t n) {
  const std::size_t v[] = {n};
  return sobol_total(t, v, ModelVariance(t));
}

struct SecondOrder {
  std::size_t first = 0;   ///< original axis id
  std::size_t second = 0;  ///< original axis id
  double raw = 0.0;        ///< closed{n,m} - S_n - S_m
  /// Display value: truncation noise down to -1e-9 is clamped to zero.
  double value() const noexcept { return raw < 0.0 && raw >= -1e-9 ? 0.0 : raw; }
};

/// All first, total and second-order indices of a (possibly conditioned) model.
struct SobolGraph {
  std::vector<std::size_t> axes;  ///< original axis ids still free
  std::vector<std::string> names;
  std::vector<double> first;
  std::vector<double> total;
  std::vector<SecondOrder> second;
  double variance = 0.0;
  double mean = 0.0;
  bool degenerate = false;
  std::vector<AxisFix> conditioned_on;
};

/// Applies fixes (each axis at most once) and returns the reduced tensor plus
/// the original ids of the axes that remain.
inline std::pair<TTTensor, std::vector<std::size_t>> apply_fixes(const TTTensor& t,
                                                                 std::vector<AxisFix> fixes) {
  std::sort(fixes.begin(), fixes.end(),
            [](const AxisFix& a, const AxisFix& b) { return a.axis > b.axis; });
  for (std::size_t i = 1; i < fixes.size(); ++i)
    if (fixes[i].axis == fixes[i - 1].axis)
      throw InvalidArgument("axis " + std::to_string(fixes[i].axis) + " fixed twice");
  std::vector<std::size_t> remaining(t.ndim());
  std::iota(remaining.begin(), remaining.end(), 0);
  TTTensor r = t;
  for (const auto& f : fixes) {
    if (f.axis >= t.ndim()) throw InvalidArgument("fix on axis " + std::to_string(f.axis) + " out of range");
    r = tt::fix_axis(r, f.axis, f.index);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(f.axis));
  }
  return {std::move(r), std::move(remaining)};
}

inline SobolGraph sobol_graph(const TTTensor& t, const std::vector<AxisFix>& fixes,
                              const std::vector<std::string>& names = {}) {
  auto [reduced, remaining] = apply_fixes(t, fixes);
  if (remaining.size() < 2)
    throw InvalidArgument("sobol_graph: at least two free axes must remain after fixing");
  SobolGraph g;
  g.axes = remaining;
  g.conditioned_on = fixes;
  for (auto a : remaining)
    g.names.push_back(a < names.size() ? names[a] : "x" + std::to_string(a + 1));
  const ModelVariance mv(reduced);
  g.variance = mv.variance;
  g.mean = tt::mean(reduced);
  g.degenerate = mv.degenerate;
  const std::size_t n = remaining.size();
  g.first.assign(n, 0.0);
  g.total.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t v[] = {k};
    g.first[k] = sobol_closed(reduced, v, mv);
    g.total[k] = sobol_total(reduced, v, mv);
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      SecondOrder s{remaining[a], remaining[b], 0.0};
      if (!mv.degenerate && n > 2) {
        const std::size_t v[] = {a, b};
        s.raw = sobol_closed(reduced, v, mv) - g.first[a] - g.first[b];
      } else if (!mv.degenerate) {
        s.raw = 1.0 - g.first[a] - g.first[b];
      }
      g.second.push_back(s);
    }
  return g;
}

inline nlohmann::json to_json(const SobolGraph& g) {
  nlohmann::json j;
  j["variance"] = g.variance;
  j["mean"] = g.mean;
  j["degenerate"] = g.degenerate;
  j["axes"] = g.axes;
  j["names"] = g.names;
  j["first"] = g.first;
  j["total"] = g.total;
  auto second = nlohmann::json::array();
  for (const auto& s : g.second) second.push_back({s.first, s.second, s.value()});
  j["second"] = second;
  auto cond = nlohmann::json::array();
  for (const auto& f : g.conditioned_on) cond.push_back({{"axis", f.axis}, {"bin", f.index}});
  j["conditioned_on"] = cond;
  return j;
}

}  // namespace anova
}  // namespace ppx
