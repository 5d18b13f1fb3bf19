#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ppx/error.hpp"

namespace ppx {

enum class AxisKind { continuous, categorical };

inline const char* to_string(AxisKind kind) {
  return kind == AxisKind::continuous ? "continuous" : "categorical";
}

inline AxisKind axis_kind_from_string(const std::string& s) {
  if (s == "continuous") return AxisKind::continuous;
  if (s == "categorical") return AxisKind::categorical;
  throw FormatError("unknown axis kind '" + s + "'");
}

/// One discretized input variable. Continuous axes map bin i to the midpoint of
/// the i-th cell of [lo, hi]; categorical axes spread their bins evenly over
/// [lo, hi] including both ends (a binary axis on [0, 1] yields values 0 and 1).
struct AxisGrid {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  std::size_t bins = 2;
  AxisKind kind = AxisKind::continuous;

  void validate() const {
    if (bins < 2) throw InvalidArgument("axis '" + name + "' needs at least 2 bins");
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw InvalidArgument("axis '" + name + "' has non-finite bounds");
    if (kind == AxisKind::continuous && !(lo < hi))
      throw InvalidArgument("axis '" + name + "' requires lo < hi");
    if (kind == AxisKind::categorical && hi < lo)
      throw InvalidArgument("axis '" + name + "' requires lo <= hi");
  }

  double value(std::size_t bin) const {
    if (kind == AxisKind::categorical)
      return lo + static_cast<double>(bin) * (hi - lo) / static_cast<double>(bins - 1);
    return lo + (static_cast<double>(bin) + 0.5) * (hi - lo) / static_cast<double>(bins);
  }

  std::vector<double> values() const {
    std::vector<double> v(bins);
    for (std::size_t i = 0; i < bins; ++i) v[i] = value(i);
    return v;
  }

  /// Nearest bin to a real value. Categorical axes only accept values that hit a
  /// category (within 1e-9 of the axis span), anything else is rejected.
  std::size_t snap(double x) const {
    if (!std::isfinite(x)) throw InvalidArgument("non-finite value for axis '" + name + "'");
    std::size_t best = 0;
    double best_dist = std::abs(value(0) - x);
    for (std::size_t i = 1; i < bins; ++i) {
      const double d = std::abs(value(i) - x);
      if (d < best_dist) {
        best = i;
        best_dist = d;
      }
    }
    if (kind == AxisKind::categorical) {
      const double scale = std::max(1.0, std::abs(hi - lo));
      if (best_dist > 1e-9 * scale)
        throw InvalidArgument("value " + std::to_string(x) + " is not a category of axis '" +
                              name + "'");
    }
    return best;
  }
};

}  // namespace ppx
