#include "flin/service.hpp"

#include <chrono>

#include <httplib.h>

#include "flin/error.hpp"
#include "flin/log.hpp"

namespace flin {

namespace {

HttpReply error_reply(int status, const std::string& message) {
  return {status, nlohmann::ordered_json{{"error", message}}.dump()};
}

}  // namespace

nlohmann::ordered_json parse_response(const ParseResult& result) {
  nlohmann::ordered_json j = to_json(result);
  j["version"] = kApiVersion;
  return j;
}

ParseServer::ParseServer() : http_(std::make_unique<httplib::Server>()) {
  http_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    const HttpReply r = handle_health();
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  http_->Post("/v1/parse", [this](const httplib::Request& req, httplib::Response& res) {
    const HttpReply r = handle_parse(req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
}

ParseServer::~ParseServer() { stop(); }

void ParseServer::load(std::shared_ptr<const ModelBundle> bundle, SiteSchema schema) {
  auto next = std::make_shared<const State>(State{std::move(bundle), std::move(schema)});
  std::atomic_store(&state_, std::move(next));
}

std::shared_ptr<const ParseServer::State> ParseServer::state() const { return std::atomic_load(&state_); }

bool ParseServer::loaded() const { return state() != nullptr; }

HttpReply ParseServer::handle_health() const { return {200, R"({"status":"ok"})"}; }

HttpReply ParseServer::handle_parse(std::string_view body) const {
  const auto started = std::chrono::steady_clock::now();
  requests_.fetch_add(1, std::memory_order_relaxed);
  const auto st = state();
  if (!st) return error_reply(503, "models are not loaded yet");

  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    return error_reply(400, std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object() || !req.contains("command") || !req["command"].is_string() || !req.contains("page_id") ||
      !req["page_id"].is_string()) {
    return error_reply(400, "request must be an object with string fields \"command\" and \"page_id\"");
  }
  const auto command = req["command"].get<std::string>();
  const auto page_id = req["page_id"].get<std::string>();
  if (st->schema.find_page(page_id) == nullptr) return error_reply(404, "unknown page \"" + page_id + "\"");
  if (command.find_first_not_of(" \t\r\n") == std::string::npos) return error_reply(400, "empty command");

  try {
    nlohmann::ordered_json out = parse_response(st->bundle->parse(st->schema, page_id, command));
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - started;
    out["latency_ms"] = elapsed.count();
    return {200, out.dump()};
  } catch (const NotFoundError& e) {
    return error_reply(404, e.what());
  } catch (const ValidationError& e) {
    return error_reply(400, e.what());
  } catch (const std::exception& e) {
    log().error("parse failed: {}", e.what());
    return error_reply(500, "internal error");
  }
}

int ParseServer::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  return http_->bind_to_port(host, port) ? port : -1;
}

bool ParseServer::listen() { return http_->listen_after_bind(); }

void ParseServer::stop() {
  if (http_ && http_->is_running()) http_->stop();
}

bool ParseServer::running() const { return http_->is_running(); }

}  // namespace flin
