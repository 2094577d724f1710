#include <httplib.h>

#include "footgan/ratings.hpp"

namespace footgan {

struct ResultsServer::Impl {
  httplib::Server server;
};

namespace {
void allow_cors(httplib::Response& res) {
  res.set_header("Access-Control-Allow-Origin", "*");
  res.set_header("Access-Control-Allow-Methods", "POST, OPTIONS");
  res.set_header("Access-Control-Allow-Headers", "Content-Type");
}
}  // namespace

ResultsServer::ResultsServer(ResultsCollector& collector, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>()) {
  impl_->server.Post("/results", [&collector](const httplib::Request& req, httplib::Response& res) {
    const auto outcome = collector.submit(req.body);
    res.status = outcome.status;
    allow_cors(res);
    res.set_content(outcome.body.dump(), "application/json");
  });
  impl_->server.Options("/results", [](const httplib::Request&, httplib::Response& res) {
    allow_cors(res);
    res.status = 204;
  });
  if (static_dir) impl_->server.set_mount_point("/", static_dir->string());
}

ResultsServer::~ResultsServer() { stop(); }

int ResultsServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void ResultsServer::listen() { impl_->server.listen_after_bind(); }

void ResultsServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace footgan
