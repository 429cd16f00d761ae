#pragma once

#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "semspace/semspace.h"

namespace httplib {
class Server;
}

namespace semspace_tools {

/// Artifact locations an engine is (re)opened from.
struct EngineSource {
  std::string corpus;
  std::string text_model;
  std::string visual_model;
  std::string index;
  ss_aggregation aggregation = SS_AGG_MEAN;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string ui_dir;
  std::size_t default_k = 10;
  std::size_t max_k = 1000;
};

/// Failure carrying the C API status of the underlying call.
class StatusError : public std::runtime_error {
 public:
  StatusError(ss_status status, const std::string& message)
      : std::runtime_error(message), status_(status) {}
  ss_status status() const { return status_; }

 private:
  ss_status status_;
};

using EngineHandle = std::shared_ptr<const ss_engine>;

EngineHandle open_engine(const EngineSource& source);

/// JSON HTTP front end over an engine. Queries run against a snapshot of
/// the current engine; /api/reload swaps in a freshly opened one.
class QueryServer {
 public:
  QueryServer(EngineSource source, ServerOptions options);
  ~QueryServer();
  QueryServer(const QueryServer&) = delete;
  QueryServer& operator=(const QueryServer&) = delete;

  /// Opens the engine and binds the port. Throws StatusError.
  void bind();
  int port() const { return bound_port_; }

  void listen();  // blocks until stop()
  void start();   // listen() on a background thread
  void stop();

 private:
  EngineHandle snapshot() const;
  void routes();

  EngineSource source_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::mutex engine_mutex_;
  EngineHandle engine_;
  int bound_port_ = -1;
  std::thread thread_;
};

/// HTTP status for a C API failure status.
int http_status(ss_status status);

}  // namespace semspace_tools
