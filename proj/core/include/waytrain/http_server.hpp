#pragma once

#include <memory>
#include <string>

#include "waytrain/error.hpp"
#include "waytrain/service.hpp"

namespace waytrain {

/// JSON-over-HTTP front end for Service. Error responses carry
/// `{"error": <code>, "message": <text>}`.
class HttpServer {
public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and returns the port (an ephemeral one when port is 0). Marks the
  /// feed endpoint available. Throws Input when binding fails.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocks the calling thread.
  void serve();
  void stop();
  /// Blocks until serve() accepts connections.
  void wait_until_ready() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);

}  // namespace waytrain
