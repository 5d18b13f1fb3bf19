#pragma once

// Curve and surface exports of a parameterization.

#include <charconv>
#include <ostream>
#include <string>

#include "ppx/axis.hpp"
#include "ppx/error.hpp"
#include "ppx/principal_param.hpp"

namespace ppx::exporting {

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// One row per bin: target value, X, Y, Z.
inline void write_curve_csv(std::ostream& os, const AxisGrid& axis, const PrincipalParam& p) {
  if (p.grid_shape.size() != 1) throw InvalidArgument("CSV export needs a single target");
  os << axis.name << ",X,Y,Z\n";
  for (std::size_t i = 0; i < p.points(); ++i)
    os << format_double(axis.value(i)) << ',' << format_double(p.x.values()[i]) << ','
       << format_double(p.y.values()[i]) << ',' << format_double(p.z.values()[i]) << '\n';
}

/// Wavefront quad mesh of a two-target surface. Vertex (i, j) is written at
/// position i * J + j; cells alternate between two materials so isolines of
/// both variables show as a checkerboard.
inline void write_surface_obj(std::ostream& os, const PrincipalParam& p, const std::string& mtl_file = {}) {
  if (p.grid_shape.size() != 2) throw InvalidArgument("OBJ export needs two targets");
  const std::size_t ni = p.grid_shape[0], nj = p.grid_shape[1];
  if (!mtl_file.empty()) os << "mtllib " << mtl_file << '\n';
  for (std::size_t v = 0; v < p.points(); ++v)
    os << "v " << format_double(p.x.values()[v]) << ' ' << format_double(p.y.values()[v]) << ' '
       << format_double(p.z.values()[v]) << '\n';
  for (int parity = 0; parity < 2; ++parity) {
    os << "g checker_" << (parity == 0 ? 'a' : 'b') << "\nusemtl checker_" << (parity == 0 ? 'a' : 'b')
       << '\n';
    for (std::size_t i = 0; i + 1 < ni; ++i)
      for (std::size_t j = 0; j + 1 < nj; ++j) {
        if (int((i + j) % 2) != parity) continue;
        const std::size_t a = i * nj + j + 1;
        os << "f " << a << ' ' << a + nj << ' ' << a + nj + 1 << ' ' << a + 1 << '\n';
      }
  }
}

inline void write_checker_mtl(std::ostream& os) {
  os << "newmtl checker_a\nKd 0.85 0.85 0.85\n\nnewmtl checker_b\nKd 0.35 0.35 0.35\n";
}

}  // namespace ppx::exporting
