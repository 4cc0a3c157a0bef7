#pragma once

#include <memory>
#include <string>

#include "jointrait_service/model_store.hpp"

namespace jointrait::service {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Transport-free router:
///   GET  /models               manifests
///   GET  /models/{id}          spec, priors, config and diagnostics
///   POST /models/{id}/predict  risk curve and trajectory bands
/// 404 unknown route or model, 405 wrong method, 400 unparsable JSON,
/// 422 invalid body (with field errors), 503 while the store is loading.
class Service {
 public:
  explicit Service(const ModelStore& store) : store_(store) {}
  Response handle(const std::string& method, const std::string& path, const std::string& body) const;

 private:
  const ModelStore& store_;
};

struct ServeOptions {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;  // mounted at / when set
};

/// HTTP transport over Service. Port 0 binds an ephemeral port.
class HttpServer {
 public:
  /// Throws ConfigError when the UI directory cannot be mounted.
  HttpServer(const Service& service, const ServeOptions& options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Returns the bound port; throws ConfigError on failure.
  int bind();
  /// Blocks until stop().
  void listen();
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace jointrait::service
