#pragma once

#include <httplib.h>

#include <functional>
#include <string>

#include "svp/io.hpp"
#include "svp/rollout.hpp"

namespace svp {

/// Routes the session API onto an httplib server. `static_dir` is mounted at
/// "/" when non-empty.
inline void install_rollout_routes(httplib::Server& server, SessionStore& store, const std::string& static_dir = {}) {
  const auto respond = [](httplib::Response& res, const std::function<Json()>& body, int ok_status = 200) {
    try {
      res.status = ok_status;
      res.set_content(body().dump(), "application/json");
    } catch (const ServiceError& e) {
      res.status = e.status();
      res.set_content(Json{{"error", e.what()}, {"status", e.status()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(Json{{"error", e.what()}, {"status", 500}}.dump(), "application/json");
    }
  };
  const auto parse_body = [](const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
      return Json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ServiceError(400, std::string("request body is not valid JSON: ") + e.what());
    }
  };

  server.Get("/envs", [=](const httplib::Request&, httplib::Response& res) {
    respond(res, [] { return environment_catalog(); });
  });
  server.Post("/sessions", [=, &store](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.create(parse_body(req)); }, 201);
  });
  server.Get(R"(/sessions/([^/]+))", [=, &store](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.describe(req.matches[1]); });
  });
  server.Post(R"(/sessions/([^/]+)/act)", [=, &store](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.act(req.matches[1], parse_body(req)); });
  });
  server.Post(R"(/sessions/([^/]+)/reset)", [=, &store](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.reset(req.matches[1]); });
  });
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir)) {
    throw InvalidArgument("static directory '" + static_dir + "' does not exist");
  }
}

}  // namespace svp
