#pragma once

// HTTP front end over a Session.

#include <memory>
#include <string>

#include <httplib.h>

#include "ppx/service.hpp"

namespace ppx::service {

class HttpServer {
 public:
  explicit HttpServer(Session& session) : session_(session) {
    // The library default is SO_REUSEPORT, which lets a second server share a
    // busy port instead of failing to bind.
    srv_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    srv_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
    srv_.Get(R"(/api/[a-z]+)", [this](const httplib::Request& req, httplib::Response& res) {
      Params q(req.params.begin(), req.params.end());
      const auto r = session_.dispatch(req.path, q);
      res.status = r.status;
      res.set_content(r.body, "application/json");
    });
    srv_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    srv_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      res.set_content(error_body(res.status == 404 ? "not_found" : "http_error",
                                 "request for '" + req.path + "' failed with status " + std::to_string(res.status)),
                      "application/json");
    });
  }

  /// Binds host:port; port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port) {
    if (port == 0) return srv_.bind_to_any_port(host);
    return srv_.bind_to_port(host, port) ? port : -1;
  }

  /// Serves until stop() is called.
  bool run() { return srv_.listen_after_bind(); }

  void stop() { srv_.stop(); }
  void wait_until_ready() const { srv_.wait_until_ready(); }

 private:
  Session& session_;
  httplib::Server srv_;
};

}  // namespace ppx::service
