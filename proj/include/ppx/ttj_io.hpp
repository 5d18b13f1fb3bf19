#pragma once

// "ttj" files: a JSON manifest describing the axes and ranks of a TT surrogate,
// plus a sidecar with every core as little-endian float64, row-major (a, i, b),
// cores concatenated in axis order.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppx/axis.hpp"
#include "ppx/error.hpp"
#include "ppx/io.hpp"
#include "ppx/surrogate.hpp"
#include "ppx/tt_tensor.hpp"

namespace ppx {

inline constexpr int kTtjFormatVersion = 1;

/// A TT surrogate with the grid it lives on.
struct Surrogate {
  TTTensor tensor;
  std::vector<AxisGrid> axes;             ///< one per tensor axis
  std::optional<std::size_t> output_axis;  ///< stacked outputs, if any
  std::string model;
  std::optional<BuildReport> report;

  void validate() const {
    if (tensor.is_scalar()) throw InvalidArgument("surrogate tensor has no axes");
    if (axes.size() != tensor.ndim())
      throw InvalidArgument("surrogate has " + std::to_string(axes.size()) + " axes but a " +
                            std::to_string(tensor.ndim()) + "-way tensor");
    for (std::size_t k = 0; k < axes.size(); ++k) {
      axes[k].validate();
      if (axes[k].bins != tensor.core(k).size)
        throw InvalidArgument("axis '" + axes[k].name + "' has " + std::to_string(axes[k].bins) +
                              " bins, tensor has " + std::to_string(tensor.core(k).size));
    }
    if (output_axis && *output_axis >= axes.size()) throw InvalidArgument("output axis out of range");
  }

  /// Index of the axis with this name.
  std::optional<std::size_t> find_axis(const std::string& name) const {
    for (std::size_t k = 0; k < axes.size(); ++k)
      if (axes[k].name == name) return k;
    return std::nullopt;
  }
};

inline Surrogate make_surrogate(const GridModel& m, BuildResult built) {
  Surrogate s;
  s.tensor = std::move(built.tensor);
  s.axes = m.tensor_axes();
  if (m.outputs > 1) s.output_axis = m.axes.size();
  s.model = m.name;
  s.report = std::move(built.report);
  s.validate();
  return s;
}

inline void write_ttj(const Surrogate& s, const std::filesystem::path& path) {
  s.validate();
  std::vector<double> all;
  for (const auto& c : s.tensor.cores()) all.insert(all.end(), c.data.begin(), c.data.end());
  nlohmann::json j;
  j["format_version"] = kTtjFormatVersion;
  j["axes"] = axes_to_json(s.axes);
  j["ranks"] = s.tensor.ranks();
  if (s.output_axis) j["output_axis"] = *s.output_axis;
  j["model"] = s.model;
  if (s.report) j["report"] = to_json(*s.report);
  j["binary"] = io::write_payload(path, all);
  io::write_file(path, j.dump(2) + "\n");
}

inline Surrogate read_ttj(const std::filesystem::path& path) {
  const auto j = io::read_json(path);
  if (!j.is_object()) throw FormatError("ttj manifest must be a JSON object");
  if (j.value("format_version", 0) != kTtjFormatVersion)
    throw FormatError("unsupported ttj format_version");
  Surrogate s;
  s.axes = axes_from_json(j.at("axes"));
  const auto ranks = j.at("ranks").get<std::vector<std::size_t>>();
  if (ranks.size() != s.axes.size() + 1 || ranks.front() != 1 || ranks.back() != 1)
    throw FormatError("ttj ranks do not match the axes");
  if (j.contains("output_axis")) s.output_axis = j["output_axis"].get<std::size_t>();
  s.model = j.value("model", "");
  if (j.contains("report")) s.report = build_report_from_json(j["report"]);
  const auto values = io::read_payload(path, j.at("binary"));

  std::size_t expected = 0;
  for (std::size_t k = 0; k < s.axes.size(); ++k) expected += ranks[k] * s.axes[k].bins * ranks[k + 1];
  if (values.size() != expected)
    throw FormatError("ttj payload has " + std::to_string(values.size()) + " values, ranks need " +
                      std::to_string(expected));
  std::vector<TTCore> cores;
  std::size_t off = 0;
  for (std::size_t k = 0; k < s.axes.size(); ++k) {
    TTCore c(ranks[k], s.axes[k].bins, ranks[k + 1]);
    std::copy(values.begin() + std::ptrdiff_t(off), values.begin() + std::ptrdiff_t(off + c.data.size()),
              c.data.begin());
    off += c.data.size();
    cores.push_back(std::move(c));
  }
  try {
    s.tensor = TTTensor(std::move(cores));
    s.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid ttj content: ") + e.what());
  }
  return s;
}

}  // namespace ppx
