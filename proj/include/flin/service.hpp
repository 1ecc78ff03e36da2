#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "flin/schema.hpp"
#include "flin/training_orchestrator.hpp"

namespace httplib {
class Server;
}

namespace flin {

inline constexpr std::string_view kApiVersion = "1";

/// Prediction JSON plus the API version. The CLI prints exactly this object;
/// the HTTP endpoint appends latency_ms.
nlohmann::ordered_json parse_response(const ParseResult& result);

struct HttpReply {
  int status = 200;
  std::string body;
};

/// JSON-over-HTTP parse endpoint. Requests before load() get 503. Models are
/// shared read-only between request threads.
class ParseServer {
 public:
  ParseServer();
  ~ParseServer();
  ParseServer(const ParseServer&) = delete;
  ParseServer& operator=(const ParseServer&) = delete;

  void load(std::shared_ptr<const ModelBundle> bundle, SiteSchema schema);
  bool loaded() const;

  /// Request handling without the socket layer.
  HttpReply handle_parse(std::string_view body) const;
  HttpReply handle_health() const;

  /// Binds to `port` (0 = any free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen();
  void stop();
  bool running() const;

  std::uint64_t requests_served() const { return requests_.load(); }

 private:
  struct State {
    std::shared_ptr<const ModelBundle> bundle;
    SiteSchema schema;
  };
  std::shared_ptr<const State> state() const;

  std::shared_ptr<const State> state_;
  std::unique_ptr<httplib::Server> http_;
  mutable std::atomic<std::uint64_t> requests_{0};
};

}  // namespace flin
