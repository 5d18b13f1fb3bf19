#pragma once

// Binary payloads and metadata shared by the ttj and dense-grid formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppx/axis.hpp"
#include "ppx/error.hpp"

namespace ppx::io {

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Little-endian float64 encoding.
inline std::string encode_f64le(const std::vector<double>& v) {
  std::string out(v.size() * 8, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v[i]);
    for (int b = 0; b < 8; ++b) out[i * 8 + std::size_t(b)] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

inline std::vector<double> decode_f64le(const std::string& bytes) {
  if (bytes.size() % 8 != 0) throw FormatError("binary payload length is not a multiple of 8");
  std::vector<double> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= std::uint64_t(static_cast<unsigned char>(bytes[i * 8 + std::size_t(b)])) << (8 * b);
    v[i] = std::bit_cast<double>(bits);
  }
  return v;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + p.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + p.string() + "'");
  out.write(content.data(), std::streamsize(content.size()));
  if (!out) throw FormatError("write to '" + p.string() + "' failed");
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

/// Binary section descriptor {file, bytes, fnv1a64} for a payload written next
/// to the manifest.
inline nlohmann::json write_payload(const std::filesystem::path& manifest,
                                    const std::vector<double>& values) {
  const std::string bytes = encode_f64le(values);
  std::filesystem::path bin = manifest;
  bin += ".bin";
  write_file(bin, bytes);
  return {{"file", bin.filename().string()},
          {"bytes", bytes.size()},
          {"fnv1a64", hex64(fnv1a64(bytes.data(), bytes.size()))}};
}

inline std::vector<double> read_payload(const std::filesystem::path& manifest, const nlohmann::json& desc) {
  if (!desc.is_object() || !desc.contains("file") || !desc.contains("bytes") || !desc.contains("fnv1a64"))
    throw FormatError("binary descriptor needs file, bytes and fnv1a64");
  const auto bin = manifest.parent_path() / desc["file"].get<std::string>();
  const std::string bytes = read_file(bin);
  if (bytes.size() != desc["bytes"].get<std::size_t>())
    throw FormatError("'" + bin.string() + "' has " + std::to_string(bytes.size()) + " bytes, manifest says " +
                      std::to_string(desc["bytes"].get<std::size_t>()));
  if (hex64(fnv1a64(bytes.data(), bytes.size())) != desc["fnv1a64"].get<std::string>())
    throw FormatError("checksum mismatch for '" + bin.string() + "'");
  return decode_f64le(bytes);
}

}  // namespace ppx::io

namespace ppx {

inline nlohmann::json to_json(const AxisGrid& a) {
  return {{"name", a.name}, {"lo", a.lo}, {"hi", a.hi}, {"bins", a.bins}, {"kind", to_string(a.kind)}};
}

inline AxisGrid axis_from_json(const nlohmann::json& j) {
  try {
    AxisGrid a;
    a.name = j.at("name").get<std::string>();
    a.lo = j.at("lo").get<double>();
    a.hi = j.at("hi").get<double>();
    a.bins = j.at("bins").get<std::size_t>();
    a.kind = axis_kind_from_string(j.value("kind", "continuous"));
    a.validate();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad axis entry: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
}

inline nlohmann::json axes_to_json(const std::vector<AxisGrid>& axes) {
  auto j = nlohmann::json::array();
  for (const auto& a : axes) j.push_back(to_json(a));
  return j;
}

inline std::vector<AxisGrid> axes_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw FormatError("axes must be a non-empty array");
  std::vector<AxisGrid> out;
  for (const auto& a : j) out.push_back(axis_from_json(a));
  return out;
}

}  // namespace ppx
