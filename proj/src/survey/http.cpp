#include <thread>

#include <httplib.h>

#include "dtnarrate/survey.hpp"

namespace dtnarrate::survey {

namespace {

constexpr const char* kJson = "application/json";

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

template <typename F>
void guarded(httplib::Response& res, F&& handler) {
  try {
    handler();
  } catch (const ServiceError& e) {
    send(res, http_status(e.code()), e.to_json());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, "validation_failed", std::string("malformed JSON: ") + e.what());
  } catch (const ValidationError& e) {
    send_error(res, 400, "validation_failed", e.what());
  } catch (const IoError& e) {
    send_error(res, 503, "persistence_unavailable", e.what());
  }
}

}  // namespace

struct HttpServer::Impl {
  SurveyService& service;
  HttpOptions options;
  httplib::Server server;
  std::thread thread;

  Impl(SurveyService& s, HttpOptions o) : service(s), options(std::move(o)) { routes(); }

  void routes() {
    server.Post("/api/sessions", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send(res, 201, SurveyService::session_json(service.create_session())); });
    });

    server.Get(R"(/api/sessions/([A-Za-z0-9_-]+)/pages/(\d+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const std::string& digits = req.matches[2];
                   if (digits.size() > 6) throw ServiceError(ErrorCode::kOutOfRange, "page out of range");
                   send(res, 200, service.get_page(req.matches[1], std::stoul(digits)));
                 });
               });

    server.Post(R"(/api/sessions/([A-Za-z0-9_-]+)/submit)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] { send(res, 200, service.submit(req.matches[1], Json::parse(req.body))); });
                });

    server.Get("/api/export", [this](const httplib::Request& req, httplib::Response& res) {
      if (options.operator_token.empty()) {
        send_error(res, 403, "forbidden", "export is disabled: no operator token configured");
        return;
      }
      if (req.get_header_value("X-Operator-Token") != options.operator_token) {
        send_error(res, 401, "unauthorized", "missing or wrong X-Operator-Token header");
        return;
      }
      guarded(res, [&] {
        res.status = 200;
        res.set_content(export_to_json_text(service.export_responses()), kJson);
      });
    });

    if (!options.static_dir.empty()) server.set_mount_point("/", options.static_dir);

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, "not_found", "no such endpoint");
    });
  }
};

HttpServer::HttpServer(SurveyService& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpServer::start_background(const std::string& host) {
  const int port = impl_->server.bind_to_any_port(host);
  if (port < 0) throw IoError("cannot bind an HTTP port on " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace dtnarrate::survey
