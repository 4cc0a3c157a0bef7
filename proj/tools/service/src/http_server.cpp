// Eigen before httplib: <resolv.h> defines a `_res` macro that breaks Eigen.
#include "jointrait_service/service.hpp"

#include <jointrait/error.hpp>

#include <httplib.h>

namespace jointrait::service {

struct HttpServer::Impl {
  Impl(const Service& s, const ServeOptions& o) : service(s), options(o) {}
  const Service& service;
  ServeOptions options;
  httplib::Server server;
};

HttpServer::HttpServer(const Service& service, const ServeOptions& options)
    : impl_(std::make_unique<Impl>(service, options)) {
  auto& svr = impl_->server;
  if (!options.ui_dir.empty() && !svr.set_mount_point("/", options.ui_dir))
    throw ConfigError("cannot mount UI directory '" + options.ui_dir + "'");
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  svr.Get(R"(/models(/.*)?)", forward);
  svr.Post(R"(/models(/.*)?)", forward);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto& svr = impl_->server;
  const auto& o = impl_->options;
  const int port = o.port == 0 ? svr.bind_to_any_port(o.bind) : (svr.bind_to_port(o.bind, o.port) ? o.port : -1);
  if (port < 0) throw ConfigError("cannot bind " + o.bind + ":" + std::to_string(o.port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace jointrait::service
