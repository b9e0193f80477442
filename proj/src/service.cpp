#include "hitl/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cerrno>
#include <cstring>

namespace hitl {

nlohmann::json error_reply(const std::string& kind, const std::string& message) {
  return {{"type", "error"}, {"kind", kind}, {"message", message}};
}

namespace {

nlohmann::json update_reply(const MapUpdate& u) { return {{"type", "map_update"}, {"update", to_json(u)}}; }

}  // namespace

FactorGraph SessionService::graph() const {
  std::lock_guard lock(mutex_);
  return session_.graph();
}

nlohmann::json SessionService::handle(Connection& conn, const std::string& line) {
  nlohmann::json msg = nlohmann::json::parse(line, nullptr, false);
  if (msg.is_discarded()) return error_reply("MalformedMessage", "not valid JSON");
  if (!msg.is_object()) return error_reply("MalformedMessage", "message must be a JSON object");
  nlohmann::json reply;
  try {
    reply = dispatch(conn, msg);
  } catch (const Error& e) {
    reply = error_reply(std::string(to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    reply = error_reply("MalformedMessage", e.what());
  }
  if (msg.contains("id")) reply["id"] = msg["id"];
  return reply;
}

nlohmann::json SessionService::dispatch(Connection& conn, const nlohmann::json& msg) {
  if (!msg.contains("type") || !msg["type"].is_string()) return error_reply("MalformedMessage", "missing 'type'");
  const std::string type = msg["type"].get<std::string>();

  if (type == "hello") {
    if (!msg.contains("schema") || !msg["schema"].is_number_integer()) {
      return error_reply("MalformedMessage", "hello needs an integer 'schema'");
    }
    if (msg["schema"].get<int>() != kSchemaVersion) {
      return error_reply("VersionMismatch", "server speaks schema " + std::to_string(kSchemaVersion));
    }
    conn.greeted = true;
    std::lock_guard lock(mutex_);
    auto reply = update_reply(session_.snapshot());
    reply["schema"] = kSchemaVersion;
    return reply;
  }
  if (!conn.greeted) return error_reply("ProtocolError", "send hello first");

  if (type == "submit_correction") {
    if (!msg.contains("correction")) return error_reply("MalformedMessage", "missing 'correction'");
    RawCorrection raw;
    try {
      raw = raw_correction_from_json(msg["correction"]);
    } catch (const Error& e) {
      return error_reply("MalformedMessage", e.what());
    }
    std::lock_guard lock(mutex_);
    const MapUpdate u = session_.submit_correction(raw);
    if (u.error) {
      auto reply = error_reply(u.error_kind ? std::string(to_string(*u.error_kind)) : "InvalidArgument", *u.error);
      reply["iteration"] = u.iteration;
      return reply;
    }
    return update_reply(u);
  }
  if (type == "request_snapshot") {
    std::lock_guard lock(mutex_);
    return update_reply(session_.snapshot());
  }
  if (type == "undo_last") {
    std::lock_guard lock(mutex_);
    if (!session_.undo_last()) return error_reply("NothingToUndo", "no accepted correction to undo");
    return {{"type", "ack"}, {"request", "undo_last"}, {"iteration", session_.iteration()}};
  }
  return error_reply("MalformedMessage", "unknown type '" + type + "'");
}

std::pair<std::string, std::uint16_t> parse_bind_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorKind::InvalidArgument, "bind address must be host:port, got '" + address + "'");
  }
  unsigned port = 0;
  const char* first = address.data() + colon + 1;
  const char* last = address.data() + address.size();
  const auto [end, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || end != last || first == last || port > 65535) {
    throw Error(ErrorKind::InvalidArgument, "bad port in '" + address + "'");
  }
  return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
}

Server::~Server() {
  stop();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
}

void Server::listen(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host == "localhost" ? "127.0.0.1" : host;
  if (inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorKind::InvalidArgument, "not an IPv4 address: " + host);
  }
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorKind::InvalidArgument, std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorKind::InvalidArgument, "cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

void Server::run() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) break;
      if (errno == EINTR) continue;
      break;
    }
    std::lock_guard lock(clients_mutex_);
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
  }
  std::lock_guard lock(clients_mutex_);
  for (const int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
}

void Server::serve_connection(int fd) {
  Connection conn;
  std::string buffer;
  char chunk[4096];
  auto send_all = [fd](const std::string& s) {
    std::size_t sent = 0;
    while (sent < s.size()) {
      const ssize_t n = ::send(fd, s.data() + sent, s.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return false;
      sent += static_cast<std::size_t>(n);
    }
    return true;
  };
  bool open = true;
  while (open) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (auto nl = buffer.find('\n'); nl != std::string::npos; nl = buffer.find('\n', start)) {
      std::string line = buffer.substr(start, nl - start);
      start = nl + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (!send_all(service_.handle(conn, line).dump() + "\n")) {
        open = false;
        break;
      }
    }
    buffer.erase(0, start);
  }
  std::lock_guard lock(clients_mutex_);
  std::erase(client_fds_, fd);
  ::close(fd);
}

}  // namespace hitl
