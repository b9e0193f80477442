#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hitl/session.hpp"

namespace hitl {

// Newline-delimited JSON over TCP; one object per line in each direction.
// See docs/messages.md for the schema.
inline constexpr int kSchemaVersion = 1;

/// Per-connection protocol state.
struct Connection {
  bool greeted = false;
};

/// Message dispatch over one shared Session. Pipeline work is serialized by
/// an internal mutex; replies carry copies, never references into the
/// session.
class SessionService {
 public:
  explicit SessionService(Session session) : session_(std::move(session)) {}

  /// Handles one request line and returns the reply object. Never throws;
  /// malformed input yields an error reply and leaves the session intact.
  nlohmann::json handle(Connection& conn, const std::string& line);

  /// Copy of the current graph, taken under the lock.
  FactorGraph graph() const;

 private:
  nlohmann::json dispatch(Connection& conn, const nlohmann::json& msg);

  mutable std::mutex mutex_;
  Session session_;
};

nlohmann::json error_reply(const std::string& kind, const std::string& message);

/// Blocking TCP server, one thread per connection.
class Server {
 public:
  explicit Server(SessionService& service) : service_(service) {}
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and listens. Port 0 picks a free port; see port(). Throws
  /// InvalidArgument when the address cannot be bound.
  void listen(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }

  /// Accepts connections until stop().
  void run();
  void stop();

 private:
  void serve_connection(int fd);

  SessionService& service_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex clients_mutex_;
  std::vector<int> client_fds_;
  std::vector<std::thread> workers_;
};

/// Splits "host:port". Throws InvalidArgument.
std::pair<std::string, std::uint16_t> parse_bind_address(const std::string& address);

}  // namespace hitl
