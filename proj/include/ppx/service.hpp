#pragma once

// Query handling shared by the HTTP server and the command line: parsing,
// payload construction and a small LRU response cache.

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <list>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ppx/anova.hpp"
#include "ppx/principal_param.hpp"
#include "ppx/ttj_io.hpp"

namespace ppx::service {

/// Query parameters; repeated keys are allowed.
using Params = std::multimap<std::string, std::string>;

/// A rejected query, rendered as {error, detail} with an HTTP status.
class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, const std::string& detail)
      : Error(detail), status_(status), code_(std::move(code)) {}
  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

 private:
  int status_;
  std::string code_;
};

inline ServiceError bad_request(const std::string& detail) { return {400, "bad_request", detail}; }
inline ServiceError unprocessable(const std::string& detail) { return {422, "unprocessable", detail}; }

struct Response {
  int status = 200;
  std::string body;
};

inline std::string error_body(const std::string& code, const std::string& detail) {
  return nlohmann::json{{"error", code}, {"detail", detail}}.dump();
}

/// A fix after snapping the requested value to a bin.
struct ResolvedFix {
  std::size_t axis = 0;
  std::size_t bin = 0;
  double value = 0.0;  ///< grid value of the chosen bin
};

struct ParamQuery {
  std::vector<std::size_t> targets;  ///< original axis ids
  std::vector<ResolvedFix> fixes;    ///< sorted by axis
  std::set<std::string> fields;
};

struct SobolQuery {
  int order = 2;
  std::vector<ResolvedFix> fixes;
};

struct TrajectoryQuery {
  std::array<std::size_t, 2> surface{};
  std::size_t track = 0;
  std::vector<std::array<std::size_t, 2>> at;
  std::vector<ResolvedFix> fixes;
};

struct ParamComputation {
  PrincipalParam param;
  std::optional<LocalFields> fields;
  nlohmann::json payload;
};

/// Bounded map from canonical query keys to rendered bodies. Entries are never
/// modified after insertion; a second insert of the same key replaces it.
class LruCache {
 public:
  explicit LruCache(std::size_t capacity = 64) : capacity_(capacity) {}

  std::optional<std::string> get(const std::string& key) {
    std::lock_guard lock(mu_);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  void put(const std::string& key, std::string value) {
    if (capacity_ == 0) return;
    std::lock_guard lock(mu_);
    if (auto it = index_.find(key); it != index_.end()) {
      it->second->second = std::move(value);
      order_.splice(order_.begin(), order_, it->second);
      return;
    }
    order_.emplace_front(key, std::move(value));
    index_[key] = order_.begin();
    if (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return order_.size();
  }

  std::size_t capacity() const noexcept { return capacity_; }

 private:
  using Entry = std::pair<std::string, std::string>;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> order_;
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

inline double parse_real(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty()) throw bad_request("empty value for " + what);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
    throw bad_request("'" + t + "' is not a finite number (" + what + ")");
  return v;
}

inline std::size_t parse_index(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos || t.size() > 9)
    throw bad_request("'" + t + "' is not a bin index (" + what + ")");
  return std::stoul(t);
}

inline std::vector<std::string> all_values(const Params& q, const std::string& key) {
  std::vector<std::string> out;
  auto [b, e] = q.equal_range(key);
  for (auto it = b; it != e; ++it) out.push_back(it->second);
  return out;
}

inline std::optional<std::string> single_value(const Params& q, const std::string& key) {
  const auto v = all_values(q, key);
  if (v.empty()) return std::nullopt;
  if (v.size() > 1) throw bad_request("parameter '" + key + "' given more than once");
  return v.front();
}

inline std::string fixes_key(const std::vector<ResolvedFix>& fixes) {
  std::string k;
  for (const auto& f : fixes) k += std::to_string(f.axis) + ":" + std::to_string(f.bin) + ",";
  return k;
}

}  // namespace detail

/// One loaded surrogate plus its response cache. Everything except the cache
/// is immutable after construction, so handlers may run concurrently.
class Session {
 public:
  explicit Session(Surrogate s, std::size_t cache_capacity = 64)
      : s_(std::move(s)), cache_(cache_capacity) {
    s_.validate();
    const anova::ModelVariance mv(s_.tensor);
    mean_ = tt::mean(s_.tensor);
    variance_ = mv.variance;
    degenerate_ = mv.degenerate;
  }

  const Surrogate& surrogate() const noexcept { return s_; }
  LruCache& cache() noexcept { return cache_; }

  std::size_t axis_by_name(const std::string& raw) const {
    const std::string name = detail::trim(raw);
    if (name.empty()) throw bad_request("empty axis name");
    if (auto k = s_.find_axis(name)) return *k;
    std::string known;
    for (const auto& a : s_.axes) known += (known.empty() ? "" : ", ") + a.name;
    throw bad_request("unknown axis '" + name + "' (axes: " + known + ")");
  }

  /// "name:value" or "name=value"; the value snaps to the nearest bin.
  ResolvedFix resolve_fix(const std::string& spec) const {
    const auto pos = spec.find_first_of(":=");
    if (pos == std::string::npos) throw bad_request("fix '" + spec + "' must look like name=value or name:value");
    const std::size_t axis = axis_by_name(spec.substr(0, pos));
    const auto& g = s_.axes[axis];
    const double v = detail::parse_real(spec.substr(pos + 1), "fix on '" + g.name + "'");
    try {
      const std::size_t bin = g.snap(v);
      return {axis, bin, g.value(bin)};
    } catch (const InvalidArgument& e) {
      throw bad_request(e.what());
    }
  }

  /// Every "fix" parameter, each possibly a comma separated list.
  std::vector<ResolvedFix> parse_fixes(const Params& q) const {
    std::vector<ResolvedFix> out;
    for (const auto& v : detail::all_values(q, "fix"))
      for (const auto& item : detail::split(v, ',')) {
        if (detail::trim(item).empty()) throw bad_request("empty fix in '" + v + "'");
        out.push_back(resolve_fix(item));
      }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.axis < b.axis; });
    for (std::size_t i = 1; i < out.size(); ++i)
      if (out[i].axis == out[i - 1].axis)
        throw bad_request("axis '" + s_.axes[out[i].axis].name + "' fixed more than once");
    return out;
  }

  std::vector<std::size_t> parse_vars(const Params& q, const std::string& key = "vars") const {
    const auto v = detail::single_value(q, key);
    if (!v || detail::trim(*v).empty()) throw bad_request("missing '" + key + "'");
    std::vector<std::size_t> out;
    for (const auto& name : detail::split(*v, ',')) {
      const std::size_t k = axis_by_name(name);
      if (std::find(out.begin(), out.end(), k) != out.end())
        throw bad_request("axis '" + s_.axes[k].name + "' listed twice");
      out.push_back(k);
    }
    return out;
  }

  SobolQuery parse_sobol(const Params& q) const {
    SobolQuery sq;
    if (auto o = detail::single_value(q, "order")) {
      const std::string t = detail::trim(*o);
      if (t != "1" && t != "2") throw bad_request("order must be 1 or 2");
      sq.order = t == "1" ? 1 : 2;
    }
    sq.fixes = parse_fixes(q);
    if (s_.axes.size() - sq.fixes.size() < 2)
      throw unprocessable("at least two axes must stay free, " +
                          std::to_string(s_.axes.size() - sq.fixes.size()) + " left");
    return sq;
  }

  ParamQuery parse_param(const Params& q) const {
    ParamQuery pq;
    pq.targets = parse_vars(q);
    pq.fixes = parse_fixes(q);
    if (auto f = detail::single_value(q, "fields"))
      for (const auto& raw : detail::split(*f, ',')) {
        const std::string name = detail::trim(raw);
        if (name != "residual" && name != "mixed" && name != "derivs")
          throw bad_request("unknown field '" + name + "' (residual, mixed, derivs)");
        pq.fields.insert(name);
      }
    check_targets(pq.targets, pq.fixes);
    return pq;
  }

  TrajectoryQuery parse_trajectory(const Params& q) const {
    TrajectoryQuery tq;
    const auto vars = parse_vars(q);
    if (vars.size() != 2) throw bad_request("trajectory needs exactly two vars");
    tq.surface = {vars[0], vars[1]};
    const auto track = detail::single_value(q, "track");
    if (!track) throw bad_request("missing 'track'");
    tq.track = axis_by_name(*track);
    if (tq.track == vars[0] || tq.track == vars[1]) throw bad_request("track must differ from vars");
    tq.fixes = parse_fixes(q);
    check_targets({vars[0], vars[1], tq.track}, tq.fixes);

    const auto at = detail::single_value(q, "at");
    if (!at || detail::trim(*at).empty()) throw bad_request("missing 'at'");
    for (const auto& pt : detail::split(*at, ';')) {
      const auto ij = detail::split(pt, ',');
      if (ij.size() != 2) throw bad_request("point '" + pt + "' must be i,j");
      const std::array<std::size_t, 2> p{detail::parse_index(ij[0], "at"), detail::parse_index(ij[1], "at")};
      if (p[0] >= s_.axes[vars[0]].bins || p[1] >= s_.axes[vars[1]].bins)
        throw bad_request("point '" + pt + "' outside the surface grid");
      tq.at.push_back(p);
    }
    return tq;
  }

  nlohmann::json fixes_json(const std::vector<ResolvedFix>& fixes) const {
    auto j = nlohmann::json::array();
    for (const auto& f : fixes)
      j.push_back({{"axis", f.axis}, {"name", s_.axes[f.axis].name}, {"bin", f.bin}, {"value", f.value}});
    return j;
  }

  nlohmann::json model_payload() const {
    nlohmann::json j;
    j["model"] = s_.model;
    auto axes = nlohmann::json::array();
    for (std::size_t k = 0; k < s_.axes.size(); ++k) {
      auto a = to_json(s_.axes[k]);
      a["index"] = k;
      axes.push_back(a);
    }
    j["axes"] = axes;
    j["ranks"] = s_.tensor.ranks();
    j["outputs"] = s_.output_axis ? s_.axes[*s_.output_axis].bins : std::size_t(1);
    j["output_axis"] = s_.output_axis ? nlohmann::json(*s_.output_axis) : nlohmann::json(nullptr);
    j["mean"] = mean_;
    j["variance"] = variance_;
    j["degenerate"] = degenerate_;
    j["report"] = s_.report ? to_json(*s_.report) : nlohmann::json(nullptr);
    return j;
  }

  nlohmann::json sobol_payload(const SobolQuery& q) const {
    std::vector<std::string> names;
    for (const auto& a : s_.axes) names.push_back(a.name);
    const auto g = anova::sobol_graph(s_.tensor, to_axis_fixes(q.fixes), names);
    auto j = to_json(g);
    if (q.order == 1) j.erase("second");
    j["order"] = q.order;
    j["fixes"] = fixes_json(q.fixes);
    return j;
  }

  ParamComputation compute_param(const ParamQuery& q) const {
    auto [reduced, remaining] = anova::apply_fixes(s_.tensor, to_axis_fixes(q.fixes));
    std::vector<std::size_t> local;
    for (auto a : q.targets) local.push_back(position_in(remaining, a));

    ParamComputation c;
    c.param = principal_param(reduced, local);
    const auto& p = c.param;
    nlohmann::json& j = c.payload;
    j["targets"] = names_of(q.targets);
    j["axes"] = q.targets;
    j["grid_shape"] = p.grid_shape;
    auto grid = nlohmann::json::array();
    for (auto a : q.targets) grid.push_back(s_.axes[a].values());
    j["grid"] = grid;
    j["x"] = p.x.values();
    j["y"] = p.y.values();
    j["z"] = p.z.values();
    j["eigenvalues"] = p.eigenvalues;
    j["total_energy"] = p.total_energy;
    j["global_mean"] = p.global_mean;
    j["slice_norms"] = p.slice_norms;
    j["degenerate"] = p.degenerate;
    j["rotational_indeterminacy"] = p.rotational_indeterminacy;
    j["fixes"] = fixes_json(q.fixes);

    auto fields = nlohmann::json::object();
    if (q.fields.count("mixed") || q.fields.count("derivs")) {
      c.fields = local_fields(reduced, p);
      if (q.fields.count("mixed") && c.fields->mixed_norm) fields["mixed"] = *c.fields->mixed_norm;
      if (q.fields.count("derivs")) {
        auto d = nlohmann::json::array();
        for (const auto& per_axis : c.fields->derivatives) d.push_back(per_axis);
        fields["derivs"] = d;
      }
    }
    if (q.fields.count("residual")) fields["residual"] = p.residual;
    j["fields"] = fields;
    return c;
  }

  nlohmann::json trajectory_payload(const TrajectoryQuery& q) const {
    auto [reduced, remaining] = anova::apply_fixes(s_.tensor, to_axis_fixes(q.fixes));
    const auto b = trajectory_curves(
        reduced, {position_in(remaining, q.surface[0]), position_in(remaining, q.surface[1])},
        position_in(remaining, q.track), q.at);
    nlohmann::json j;
    j["surface"] = names_of({q.surface[0], q.surface[1]});
    j["track"] = s_.axes[q.track].name;
    j["axes"] = {q.surface[0], q.surface[1], q.track};
    j["at"] = b.at;
    j["polylines"] = b.polylines;
    j["track_values"] = s_.axes[q.track].values();
    j["eigenvalues"] = b.param.eigenvalues;
    j["degenerate"] = b.param.degenerate;
    j["rotational_indeterminacy"] = b.param.rotational_indeterminacy;
    j["fixes"] = fixes_json(q.fixes);
    return j;
  }

  Response health() const { return {200, nlohmann::json{{"status", "ok"}, {"model", s_.model}}.dump()}; }

  Response model() const { return {200, model_payload().dump()}; }

  Response sobol(const Params& q) {
    return guarded([&] {
      const auto sq = parse_sobol(q);
      return cached("sobol|" + std::to_string(sq.order) + "|" + detail::fixes_key(sq.fixes),
                    [&] { return sobol_payload(sq).dump(); });
    });
  }

  Response param(const Params& q) {
    return guarded([&] {
      const auto pq = parse_param(q);
      std::string key = "param|";
      for (auto t : pq.targets) key += std::to_string(t) + ",";
      key += "|" + detail::fixes_key(pq.fixes) + "|";
      for (const auto& f : pq.fields) key += f + ",";
      return cached(key, [&] { return compute_param(pq).payload.dump(); });
    });
  }

  Response trajectory(const Params& q) {
    return guarded([&] {
      const auto tq = parse_trajectory(q);
      std::string key = "trajectory|" + std::to_string(tq.surface[0]) + "," + std::to_string(tq.surface[1]) +
                        "," + std::to_string(tq.track) + "|" + detail::fixes_key(tq.fixes) + "|";
      for (const auto& p : tq.at) key += std::to_string(p[0]) + "," + std::to_string(p[1]) + ";";
      return cached(key, [&] { return trajectory_payload(tq).dump(); });
    });
  }

  /// Routes a GET path to its handler.
  Response dispatch(const std::string& path, const Params& q) {
    if (path == "/api/health") return health();
    if (path == "/api/model") return model();
    if (path == "/api/sobol") return sobol(q);
    if (path == "/api/param") return param(q);
    if (path == "/api/trajectory") return trajectory(q);
    return {404, error_body("not_found", "no endpoint '" + path + "'")};
  }

 private:
  void check_targets(const std::vector<std::size_t>& targets, const std::vector<ResolvedFix>& fixes) const {
    if (targets.size() > 3)
      throw unprocessable("at most three target variables, got " + std::to_string(targets.size()));
    for (const auto& f : fixes)
      if (std::find(targets.begin(), targets.end(), f.axis) != targets.end())
        throw unprocessable("axis '" + s_.axes[f.axis].name + "' is both a target and fixed");
  }

  static std::vector<AxisFix> to_axis_fixes(const std::vector<ResolvedFix>& fixes) {
    std::vector<AxisFix> out;
    for (const auto& f : fixes) out.push_back({f.axis, f.bin});
    return out;
  }

  static std::size_t position_in(const std::vector<std::size_t>& remaining, std::size_t axis) {
    return std::size_t(std::find(remaining.begin(), remaining.end(), axis) - remaining.begin());
  }

  std::vector<std::string> names_of(const std::vector<std::size_t>& ids) const {
    std::vector<std::string> out;
    for (auto a : ids) out.push_back(s_.axes[a].name);
    return out;
  }

  template <class F>
  Response cached(const std::string& key, F compute) {
    if (auto hit = cache_.get(key)) return {200, std::move(*hit)};
    std::string body = compute();
    cache_.put(key, body);
    return {200, std::move(body)};
  }

  template <class F>
  static Response guarded(F f) {
    try {
      return f();
    } catch (const ServiceError& e) {
      return {e.status(), error_body(e.code(), e.what())};
    } catch (const GuardExceeded& e) {
      return {422, error_body("unprocessable", e.what())};
    } catch (const InvalidArgument& e) {
      return {422, error_body("unprocessable", e.what())};
    } catch (const std::exception& e) {
      return {500, error_body("internal", e.what())};
    }
  }

  Surrogate s_;
  LruCache cache_;
  double mean_ = 0.0;
  double variance_ = 0.0;
  bool degenerate_ = false;
};

}  // namespace ppx::service
