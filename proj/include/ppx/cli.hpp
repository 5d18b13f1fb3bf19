#pragma once

// The ppx command line. run() parses argv and dispatches; it never calls exit().

#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ppx/export.hpp"
#include "ppx/models.hpp"
#include "ppx/server.hpp"
#include "ppx/service.hpp"
#include "ppx/surrogate.hpp"
#include "ppx/ttj_io.hpp"

namespace ppx::cli {

/// sysexits-style codes.
enum Exit : int {
  kOk = 0,
  kNotConverged = 2,
  kUsage = 64,
  kData = 65,
  kNoInput = 66,
  kUnavailable = 69,
  kSoftware = 70,
};

/// Grids up to this many entries are built exhaustively under --method auto.
inline constexpr double kAutoFullLimit = 262144;

struct Config {
  std::string model;
  std::string import_path;
  std::optional<std::size_t> bins;
  std::vector<std::string> params;
  double eps = 1e-4;
  std::uint64_t seed = 0;
  std::string method = "auto";
  std::size_t rank_cap = 200;
  std::size_t sweep_cap = 50;
  std::string out;

  std::string file;
  int order = 2;
  std::vector<std::string> fixes;
  std::string format = "json";
  std::string vars;
  std::string fields;
  std::string track;
  std::vector<std::string> at;

  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t cache = 64;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class NoInput : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline models::Overrides overrides(const Config& c) {
  models::Overrides o;
  o.bins = c.bins;
  for (const auto& p : c.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects key=value, got '" + p + "'");
    char* end = nullptr;
    const std::string v = p.substr(eq + 1);
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) throw UsageError("--param value '" + v + "' is not a number");
    o.params[p.substr(0, eq)] = x;
  }
  return o;
}

inline void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw NoInput("no such file '" + path + "'");
}

inline Surrogate load(const std::string& path) {
  require_file(path);
  return read_ttj(path);
}

inline service::Params query(const Config& c) {
  service::Params q;
  if (!c.vars.empty()) q.emplace("vars", c.vars);
  for (const auto& f : c.fixes) q.emplace("fix", f);
  if (!c.fields.empty()) q.emplace("fields", c.fields);
  if (!c.track.empty()) q.emplace("track", c.track);
  if (!c.at.empty()) {
    std::string joined;
    for (const auto& a : c.at) joined += (joined.empty() ? "" : ";") + a;
    q.emplace("at", joined);
  }
  q.emplace("order", std::to_string(c.order));
  return q;
}

inline std::filesystem::path report_path(const std::filesystem::path& out) {
  auto p = out;
  p.replace_extension(".report.json");
  return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) { io::write_file(p, s); }

}  // namespace detail

inline int cmd_build(const Config& c, std::ostream& out) {
  GridModel m;
  if (!c.import_path.empty()) {
    detail::require_file(c.import_path);
    m = models::import_grid(c.import_path);
  } else {
    m = models::instantiate(c.model, detail::overrides(c));
  }
  m.validate();
  std::string method = c.method;
  if (method == "auto") method = shape_numel(m.tensor_shape()) <= kAutoFullLimit ? "full" : "cross";

  BuildResult built;
  if (method == "full") {
    built = build_full(m, c.eps, c.seed);
  } else {
    CrossOptions opts;
    opts.rank_cap = c.rank_cap;
    opts.sweep_cap = c.sweep_cap;
    built = build_cross(m, c.eps, c.seed, opts);
  }
  const BuildReport report = built.report;
  const auto s = make_surrogate(m, std::move(built));
  write_ttj(s, c.out);
  detail::write_text(detail::report_path(c.out), to_json(report).dump(2) + "\n");

  out << m.name << ": " << report.method << " build, validation error "
      << exporting::format_double(report.validation_error) << ", " << report.samples_taken << " samples, ranks [";
  for (std::size_t k = 0; k < report.final_ranks.size(); ++k) out << (k ? "," : "") << report.final_ranks[k];
  out << "], " << report.wall_time << " s\n";
  if (!report.warning.empty()) out << "warning: " << report.warning << "\n";
  return report.converged && report.validation_error <= c.eps ? kOk : kNotConverged;
}

inline int cmd_sobol(const Config& c, std::ostream& out) {
  service::Session session(detail::load(c.file), 0);
  const auto q = session.parse_sobol(detail::query(c));
  const auto j = session.sobol_payload(q);
  if (c.format == "json") {
    out << j.dump() << "\n";
    return kOk;
  }
  using exporting::format_double;
  for (const auto& f : q.fixes)
    out << "# fix\t" << session.surrogate().axes[f.axis].name << "\tbin " << f.bin << "\t"
        << format_double(f.value) << "\n";
  out << "axis\tS\tST\n";
  const auto names = j["names"].get<std::vector<std::string>>();
  for (std::size_t k = 0; k < names.size(); ++k)
    out << names[k] << "\t" << format_double(j["first"][k].get<double>()) << "\t"
        << format_double(j["total"][k].get<double>()) << "\n";
  if (c.order == 2)
    for (const auto& s : j["second"]) {
      const auto a = s[0].get<std::size_t>(), b = s[1].get<std::size_t>();
      out << session.surrogate().axes[a].name << "," << session.surrogate().axes[b].name << "\t"
          << format_double(s[2].get<double>()) << "\t\n";
    }
  out << "degenerate\t" << (j["degenerate"].get<bool>() ? "true" : "false") << "\t\n";
  return kOk;
}

inline int cmd_param(const Config& c, std::ostream& out) {
  service::Session session(detail::load(c.file), 0);
  Config cc = c;
  if (!c.out.empty() && cc.fields.empty()) cc.fields = "residual,mixed,derivs";
  const auto q = session.parse_param(detail::query(cc));
  const auto r = session.compute_param(q);
  if (c.out.empty()) {
    out << r.payload.dump() << "\n";
    return kOk;
  }
  const std::filesystem::path base = c.out;
  auto with = [&](const char* ext) {
    auto p = base;
    p += ext;
    return p;
  };
  std::vector<std::filesystem::path> written;
  const std::size_t k = q.targets.size();
  if (k == 1) {
    std::ostringstream csv;
    exporting::write_curve_csv(csv, session.surrogate().axes[q.targets[0]], r.param);
    detail::write_text(with(".csv"), csv.str());
    written.push_back(with(".csv"));
  } else if (k == 2) {
    std::ostringstream obj, mtl;
    exporting::write_surface_obj(obj, r.param, with(".mtl").filename().string());
    exporting::write_checker_mtl(mtl);
    detail::write_text(with(".obj"), obj.str());
    detail::write_text(with(".mtl"), mtl.str());
    written.push_back(with(".obj"));
    written.push_back(with(".mtl"));
  }
  detail::write_text(with(".json"), r.payload.dump() + "\n");
  written.push_back(with(".json"));
  for (const auto& p : written) out << "wrote " << p.string() << "\n";
  return kOk;
}

inline int cmd_trajectory(const Config& c, std::ostream& out) {
  service::Session session(detail::load(c.file), 0);
  const auto q = session.parse_trajectory(detail::query(c));
  out << session.trajectory_payload(q).dump() << "\n";
  return kOk;
}

inline int cmd_export_grid(const Config& c, std::ostream& out) {
  const auto m = models::instantiate(c.model, detail::overrides(c));
  models::export_grid(m, c.out);
  out << "wrote " << c.out << " (" << shape_numel(m.tensor_shape()) << " values)\n";
  return kOk;
}

/// Serves until SIGINT or SIGTERM. The signals are blocked before any server
/// thread starts and collected here with sigwait.
inline int cmd_serve(const Config& c, std::ostream& out, std::ostream& err) {
  service::Session session(detail::load(c.file), c.cache);
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGUSR1);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  service::HttpServer server(session);
  const int port = server.bind(c.host, c.port);
  if (port < 0) {
    err << "ppx serve: cannot bind " << c.host << ":" << c.port << "\n";
    return kUnavailable;
  }
  out << "serving " << session.surrogate().model << " on http://" << c.host << ":" << port << std::endl;

  bool failed = false;
  std::thread worker([&] {
    failed = !server.run();
    kill(getpid(), SIGUSR1);
  });
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  worker.join();
  if (sig == SIGUSR1 && failed) {
    err << "ppx serve: listener stopped unexpectedly\n";
    return kSoftware;
  }
  return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"ppx: tensor-train surrogates and principal parameterizations"};
  app.require_subcommand(1);
  Config c;

  auto add_fix = [&](CLI::App* sub) {
    sub->add_option("--fix", c.fixes, "condition an axis, name=value (snaps to the nearest bin)");
  };

  auto* build = app.add_subcommand("build", "build a surrogate from a model or an imported grid");
  auto* src = build->add_option_group("source");
  src->add_option("--model", c.model, "built-in model name");
  src->add_option("--import", c.import_path, "dense grid manifest");
  src->require_option(1);
  build->add_option("--bins", c.bins, "bins per continuous axis");
  build->add_option("--param", c.params, "model constant, key=value");
  build->add_option("--eps", c.eps, "relative tolerance")->check(CLI::PositiveNumber);
  build->add_option("--seed", c.seed, "seed for sampling and validation");
  build->add_option("--method", c.method, "auto | full | cross")
      ->check(CLI::IsMember({"auto", "full", "cross"}));
  build->add_option("--rank-cap", c.rank_cap, "largest TT rank for cross")->check(CLI::PositiveNumber);
  build->add_option("--sweep-cap", c.sweep_cap, "most sweeps for cross")->check(CLI::PositiveNumber);
  build->add_option("--out", c.out, "output .ttj path")->required();

  auto* sobol = app.add_subcommand("sobol", "first, total and second-order Sobol indices");
  sobol->add_option("file", c.file, "surrogate .ttj")->required();
  sobol->add_option("--order", c.order, "1 or 2")->check(CLI::IsMember({1, 2}));
  sobol->add_option("--format", c.format, "json | tsv")->check(CLI::IsMember({"json", "tsv"}));
  add_fix(sobol);

  auto* param = app.add_subcommand("param", "principal parameterization of 1 to 3 variables");
  param->add_option("file", c.file, "surrogate .ttj")->required();
  param->add_option("--vars,--targets", c.vars, "comma separated target axes")->required();
  param->add_option("--fields", c.fields, "residual,mixed,derivs");
  param->add_option("--out", c.out, "base path for CSV/OBJ/JSON exports (JSON to stdout if omitted)");
  add_fix(param);

  auto* traj = app.add_subcommand("trajectory", "track surface points while a third axis moves");
  traj->add_option("file", c.file, "surrogate .ttj")->required();
  traj->add_option("--vars", c.vars, "two surface axes, a,b")->required();
  traj->add_option("--track", c.track, "moving axis")->required();
  traj->add_option("--at", c.at, "surface bin pair i,j (repeatable, or i,j;k,l)")->required();
  add_fix(traj);

  auto* serve = app.add_subcommand("serve", "JSON API over a surrogate");
  serve->add_option("file", c.file, "surrogate .ttj")->required();
  serve->add_option("--port", c.port, "TCP port, 0 picks one")->check(CLI::Range(0, 65535));
  serve->add_option("--host", c.host, "bind address");
  serve->add_option("--cache", c.cache, "response cache entries");

  auto* grid = app.add_subcommand("export-grid", "write a model's full grid for import");
  grid->add_option("--model", c.model, "built-in model name")->required();
  grid->add_option("--bins", c.bins, "bins per continuous axis");
  grid->add_option("--param", c.params, "model constant, key=value");
  grid->add_option("--out", c.out, "output manifest path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*build) return cmd_build(c, out);
    if (*sobol) return cmd_sobol(c, out);
    if (*param) return cmd_param(c, out);
    if (*traj) return cmd_trajectory(c, out);
    if (*serve) return cmd_serve(c, out, err);
    if (*grid) return cmd_export_grid(c, out);
  } catch (const UsageError& e) {
    err << "ppx: " << e.what() << "\n";
    return kUsage;
  } catch (const service::ServiceError& e) {
    err << "ppx: " << e.what() << "\n";
    return kUsage;
  } catch (const NoInput& e) {
    err << "ppx: " << e.what() << "\n";
    return kNoInput;
  } catch (const FormatError& e) {
    err << "ppx: " << e.what() << "\n";
    return kData;
  } catch (const InvalidArgument& e) {
    err << "ppx: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "ppx: " << e.what() << "\n";
    return kSoftware;
  }
  return kUsage;
}

}  // namespace ppx::cli
