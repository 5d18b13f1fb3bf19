#pragma once

// Built-in benchmark models and the stored-grid import/export surface.

#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppx/axis.hpp"
#include "ppx/dense_tensor.hpp"
#include "ppx/error.hpp"
#include "ppx/io.hpp"
#include "ppx/surrogate.hpp"

namespace ppx::models {

inline constexpr double kPi = std::numbers::pi;

struct Overrides {
  std::optional<std::size_t> bins;        ///< applied to every continuous axis
  std::map<std::string, double> params;   ///< model-specific constants
};

struct CatalogEntry {
  std::string name;
  std::size_t dimension = 0;
  std::size_t default_bins = 0;
  std::string description;
  std::string citation;
  std::function<GridModel(const Overrides&)> make;
};

namespace detail {

inline double param(const Overrides& o, const std::string& key, double fallback) {
  auto it = o.params.find(key);
  return it == o.params.end() ? fallback : it->second;
}

inline void check_params(const Overrides& o, std::initializer_list<const char*> known,
                         const std::string& model) {
  for (const auto& [k, v] : o.params) {
    bool ok = false;
    for (const char* n : known) ok |= k == n;
    if (!ok) throw InvalidArgument("model '" + model + "' has no parameter '" + k + "'");
    if (!std::isfinite(v)) throw InvalidArgument("parameter '" + k + "' must be finite");
  }
}

inline std::size_t bins_or(const Overrides& o, std::size_t fallback) {
  const std::size_t b = o.bins.value_or(fallback);
  if (b < 2) throw InvalidArgument("bins must be at least 2");
  return b;
}

inline AxisGrid cont(std::string name, double lo, double hi, std::size_t bins) {
  return {std::move(name), lo, hi, bins, AxisKind::continuous};
}

}  // namespace detail

/// Nassau County board of supervisors, 1964: six districts, weighted votes,
/// simple majority. Axis k is 1 when district k joins the coalition.
inline constexpr std::array<double, 6> kNassauWeights{31, 31, 28, 21, 2, 2};
inline constexpr double kNassauQuota = 58;

inline GridModel nassau(const Overrides& o = {}) {
  detail::check_params(o, {"quota"}, "nassau");
  if (o.bins && *o.bins != 2) throw InvalidArgument("nassau axes are binary");
  const double quota = detail::param(o, "quota", kNassauQuota);
  GridModel m;
  m.name = "nassau";
  for (const char* n : {"hempstead_1", "hempstead_2", "north_hempstead", "oyster_bay", "glen_cove",
                        "long_beach"})
    m.axes.push_back({n, 0.0, 1.0, 2, AxisKind::categorical});
  m.evaluate = [quota](std::span<const double> x, std::span<double> out) {
    double w = 0.0;
    for (std::size_t k = 0; k < 6; ++k) w += kNassauWeights[k] * x[k];
    out[0] = w >= quota ? 1.0 : 0.0;
  };
  return m;
}

/// sin x1 + a sin^2 x2 + b x3^4 sin x1 on [-pi, pi]^3.
inline GridModel ishigami(const Overrides& o = {}) {
  detail::check_params(o, {"a", "b"}, "ishigami");
  const double a = detail::param(o, "a", 7.0), b = detail::param(o, "b", 0.1);
  const std::size_t bins = detail::bins_or(o, 64);
  GridModel m;
  m.name = "ishigami";
  for (const char* n : {"x1", "x2", "x3"}) m.axes.push_back(detail::cont(n, -kPi, kPi, bins));
  m.evaluate = [a, b](std::span<const double> x, std::span<double> out) {
    const double s1 = std::sin(x[0]), s2 = std::sin(x[1]);
    out[0] = s1 + a * s2 * s2 + b * std::pow(x[2], 4) * s1;
  };
  return m;
}

inline constexpr std::array<double, 8> kGFunctionCoefficients{0, 1, 4.5, 9, 99, 99, 99, 99};

/// Sobol g-function prod (|4 x_k - 2| + a_k) / (1 + a_k) on [0, 1]^8.
inline GridModel gfunction(const Overrides& o = {}) {
  detail::check_params(o, {}, "gfunction");
  const std::size_t bins = detail::bins_or(o, 32);
  GridModel m;
  m.name = "gfunction";
  for (std::size_t k = 0; k < 8; ++k) m.axes.push_back(detail::cont("x" + std::to_string(k + 1), 0, 1, bins));
  m.evaluate = [](std::span<const double> x, std::span<double> out) {
    double p = 1.0;
    for (std::size_t k = 0; k < 8; ++k) {
      const double a = kGFunctionCoefficients[k];
      p *= (std::abs(4.0 * x[k] - 2.0) + a) / (1.0 + a);
    }
    out[0] = p;
  };
  return m;
}

/// End-point distance of a planar four-segment arm. Angles are relative to the
/// previous segment, so the first one rotates the whole arm.
inline GridModel robotarm(const Overrides& o = {}) {
  detail::check_params(o, {}, "robotarm");
  const std::size_t bins = detail::bins_or(o, 64);
  GridModel m;
  m.name = "robotarm";
  for (const char* n : {"phi1", "phi2", "phi3", "phi4"})
    m.axes.push_back(detail::cont(n, 0.0, 2.0 * kPi, bins));
  for (const char* n : {"L1", "L2", "L3", "L4"}) m.axes.push_back(detail::cont(n, 0.0, 1.0, bins));
  m.evaluate = [](std::span<const double> x, std::span<double> out) {
    double u = 0.0, v = 0.0, angle = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      angle += x[i];
      u += x[4 + i] * std::cos(angle);
      v += x[4 + i] * std::sin(angle);
    }
    out[0] = std::sqrt(u * u + v * v);
  };
  return m;
}

/// Two-degree-of-freedom primary/secondary oscillator under white noise.
/// Output is the reliability margin Fs - 3 ks sqrt(E[x_s^2]) of the secondary
/// spring. Each input varies over mean * [1 - sqrt(3) cov, 1 + sqrt(3) cov].
inline GridModel oscillator(const Overrides& o = {}) {
  detail::check_params(o, {}, "oscillator");
  const std::size_t bins = detail::bins_or(o, 16);
  struct Input {
    const char* name;
    double mean, cov;
  };
  constexpr Input inputs[] = {{"mp", 1.5, 0.1},       {"ms", 0.01, 0.1},  {"kp", 1.0, 0.2},
                              {"ks", 0.01, 0.2},      {"zeta_p", 0.05, 0.4}, {"zeta_s", 0.02, 0.5},
                              {"S0", 100.0, 0.1},     {"Fs", 15.0, 0.1}};
  GridModel m;
  m.name = "oscillator";
  for (const auto& in : inputs) {
    const double h = std::sqrt(3.0) * in.cov * in.mean;
    m.axes.push_back(detail::cont(in.name, in.mean - h, in.mean + h, bins));
  }
  m.evaluate = [](std::span<const double> x, std::span<double> out) {
    const double mp = x[0], ms = x[1], kp = x[2], ks = x[3], zp = x[4], zs = x[5], s0 = x[6], fs = x[7];
    const double wp = std::sqrt(kp / mp), ws = std::sqrt(ks / ms), gamma = ms / mp;
    const double wa = 0.5 * (wp + ws), za = 0.5 * (zp + zs), theta = (wp - ws) / wa;
    const double ex2 = kPi * s0 / (4.0 * zs * ws * ws * ws) * za * zs /
                       (zp * zs * (4.0 * za * za + theta * theta) + gamma * za * za) *
                       (zp * wp * wp * wp + zs * ws * ws * ws) * wp / (4.0 * za * wa * wa * wa * wa);
    out[0] = fs - 3.0 * ks * std::sqrt(ex2);
  };
  return m;
}

/// Small additive demo: x1 + 2 x2^2 + sin(pi x3) + x4 / 2 on [0, 1]^4.
inline GridModel additive(const Overrides& o = {}) {
  detail::check_params(o, {}, "additive");
  const std::size_t bins = detail::bins_or(o, 32);
  GridModel m;
  m.name = "additive";
  for (const char* n : {"x1", "x2", "x3", "x4"}) m.axes.push_back(detail::cont(n, 0.0, 1.0, bins));
  m.evaluate = [](std::span<const double> x, std::span<double> out) {
    out[0] = x[0] + 2.0 * x[1] * x[1] + std::sin(kPi * x[2]) + 0.5 * x[3];
  };
  return m;
}

inline const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries{
      {"nassau", 6, 2, "weighted voting game, 1 when a coalition reaches the quota",
       "Banzhaf, Weighted voting doesn't work (1965)", nassau},
      {"ishigami", 3, 64, "sin x1 + a sin^2 x2 + b x3^4 sin x1", "Ishigami and Homma (1990)", ishigami},
      {"gfunction", 8, 32, "Sobol g-function, a = (0, 1, 4.5, 9, 99, 99, 99, 99)", "Saltelli and Sobol (1995)",
       gfunction},
      {"robotarm", 8, 64, "distance reached by a four-segment planar arm", "An and Owen (2001)", robotarm},
      {"oscillator", 8, 16, "peak-force margin of a damped two-mass oscillator",
       "Dubourg, Sudret and Deheeger (2013)", oscillator},
      {"additive", 4, 32, "additive demo x1 + 2 x2^2 + sin(pi x3) + x4/2", "", additive}};
  return entries;
}

inline GridModel instantiate(const std::string& name, const Overrides& o = {}) {
  for (const auto& e : catalog())
    if (e.name == name) return e.make(o);
  std::string names;
  for (const auto& e : catalog()) names += (names.empty() ? "" : ", ") + e.name;
  throw InvalidArgument("unknown model '" + name + "' (available: " + names + ")");
}

/// Writes the full evaluated grid: JSON manifest plus `<path>.bin` payload,
/// row-major with a trailing output axis when outputs > 1.
inline void export_grid(const GridModel& m, const std::filesystem::path& path) {
  const DenseTensor grid = evaluate_grid(m);
  nlohmann::json j;
  j["name"] = m.name;
  j["axes"] = axes_to_json(m.axes);
  j["outputs"] = m.outputs;
  j["dtype"] = "f64le";
  j["binary"] = io::write_payload(path, grid.values());
  io::write_file(path, j.dump(2) + "\n");
}

/// Lookup-table model over a stored grid. Off-grid inputs are snapped to the
/// nearest bin.
inline GridModel import_grid(const std::filesystem::path& path) {
  const auto j = io::read_json(path);
  if (!j.is_object() || !j.contains("axes")) throw FormatError("grid manifest needs an 'axes' array");
  if (j.value("dtype", "f64le") != "f64le")
    throw FormatError("unsupported dtype '" + j["dtype"].get<std::string>() + "'");
  GridModel m;
  m.name = j.value("name", path.stem().string());
  m.axes = axes_from_json(j["axes"]);
  m.outputs = j.value("outputs", std::size_t{1});
  if (m.outputs < 1) throw FormatError("outputs must be at least 1");
  if (!j.contains("binary")) throw FormatError("grid manifest needs a 'binary' descriptor");
  auto values = io::read_payload(path, j["binary"]);
  const Shape shape = m.tensor_shape();
  if (static_cast<double>(values.size()) != shape_numel(shape))
    throw FormatError("grid payload has " + std::to_string(values.size()) + " values, axes need " +
                      shape_string(shape));
  auto data = std::make_shared<const DenseTensor>(shape, std::move(values));
  if (!data->all_finite()) throw FormatError("grid payload has non-finite values");
  const std::size_t outputs = m.outputs;
  m.lookup = [data, outputs](std::span<const std::size_t> bins, std::span<double> out) {
    std::size_t lin = 0;
    for (std::size_t k = 0; k < bins.size(); ++k) lin = lin * data->shape()[k] + bins[k];
    for (std::size_t c = 0; c < outputs; ++c) out[c] = data->values()[lin * outputs + c];
  };
  auto axes = m.axes;
  auto lookup = m.lookup;
  m.evaluate = [axes, lookup](std::span<const double> x, std::span<double> out) {
    std::vector<std::size_t> bins(axes.size());
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const auto& a = axes[k];
      if (a.kind == AxisKind::categorical) {
        bins[k] = a.snap(x[k]);
      } else {
        const double t = (x[k] - a.lo) / (a.hi - a.lo) * static_cast<double>(a.bins);
        bins[k] = static_cast<std::size_t>(std::clamp(std::floor(t), 0.0, double(a.bins - 1)));
      }
    }
    lookup(bins, out);
  };
  return m;
}

}  // namespace ppx::models
