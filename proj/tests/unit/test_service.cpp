#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "hitl/errors.hpp"
#include "hitl/service.hpp"
#include "scenes.hpp"

using namespace hitl;
using hitl::testing::slipped_wall;
using hitl::testing::wall_stroke;
using nlohmann::json;

namespace {

const std::string kHello = R"({"type": "hello", "schema": 1})";

std::string submit(const RawCorrection& raw, int id = 0) {
  return json{{"type", "submit_correction"}, {"id", id}, {"correction", to_json(raw)}}.dump();
}

// Line-oriented client for the TCP test.
class Client {
 public:
  explicit Client(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  }
  ~Client() { ::close(fd_); }

  void send(const std::string& s) { REQUIRE(::send(fd_, s.data(), s.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(s.size())); }

  json receive() {
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        const std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return json::parse(line);
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      REQUIRE(n > 0);
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  json call(const std::string& line) {
    send(line + "\n");
    return receive();
  }

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace

TEST_CASE("SessionService: hello first, then requests") {
  SessionService service{Session(slipped_wall())};
  Connection conn;

  const json early = service.handle(conn, R"({"type": "request_snapshot", "id": 4})");
  CHECK(early["type"] == "error");
  CHECK(early["kind"] == "ProtocolError");
  CHECK(early["id"] == 4);

  const json wrong = service.handle(conn, R"({"type": "hello", "schema": 2})");
  CHECK(wrong["kind"] == "VersionMismatch");
  CHECK_FALSE(conn.greeted);

  const json hello = service.handle(conn, kHello);
  CHECK(hello["type"] == "map_update");
  CHECK(hello["schema"] == kSchemaVersion);
  CHECK(hello["update"]["iteration"] == 0);
  CHECK(conn.greeted);

  const json snap = service.handle(conn, R"({"type": "request_snapshot", "id": "abc"})");
  CHECK(snap["type"] == "map_update");
  CHECK(snap["id"] == "abc");
  CHECK(snap["update"] == hello["update"]);

  // A second connection has to greet on its own.
  Connection other;
  CHECK(service.handle(other, R"({"type": "undo_last"})")["kind"] == "ProtocolError");
}

TEST_CASE("SessionService: malformed input never touches the session") {
  SessionService service{Session(slipped_wall())};
  Connection conn;
  service.handle(conn, kHello);
  const FactorGraph before = service.graph();
  for (const char* bad : {"{", "[1, 2]", "42", R"({"id": 1})", R"({"type": 7})", R"({"type": "dance"})",
                          R"({"type": "submit_correction"})", R"({"type": "submit_correction", "correction": {}})",
                          R"({"type": "submit_correction", "correction": {"mode": "sideways"}})",
                          R"({"type": "hello"})"}) {
    CAPTURE(bad);
    const json r = service.handle(conn, bad);
    CHECK(r["type"] == "error");
    CHECK(r["kind"] == "MalformedMessage");
    CHECK(r["message"].is_string());
  }
  CHECK(service.graph() == before);
}

TEST_CASE("SessionService: submit, reject and undo") {
  const FactorGraph g = slipped_wall();
  SessionService service{Session(g)};
  Connection conn;
  service.handle(conn, kHello);

  CHECK(service.handle(conn, R"({"type": "undo_last", "id": 1})")["kind"] == "NothingToUndo");

  const json ok = service.handle(conn, submit(wall_stroke(g), 2));
  REQUIRE(ok["type"] == "map_update");
  CHECK(ok["id"] == 2);
  CHECK(ok["update"]["iteration"] == 1);
  CHECK(ok["update"]["factors"].size() == 1);
  CHECK(service.graph().human_factors.size() == 1);

  const FactorGraph after = service.graph();
  const json rejected = service.handle(conn, submit({{{20, 20}, {22, 20}}, {{30, 30}, {32, 30}}, CorrectionMode::Parallelism}, 3));
  CHECK(rejected["type"] == "error");
  CHECK(rejected["kind"] == "InsufficientSelection");
  CHECK(rejected["id"] == 3);
  CHECK(service.graph() == after);

  const json undo = service.handle(conn, R"({"type": "undo_last", "id": 5})");
  CHECK(undo["type"] == "ack");
  CHECK(undo["iteration"] == 0);
  CHECK(undo["id"] == 5);
  CHECK(service.graph() == g);
}

TEST_CASE("parse_bind_address") {
  CHECK(parse_bind_address("127.0.0.1:8765") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 8765});
  CHECK(parse_bind_address("localhost:0").second == 0);
  for (const char* bad : {"127.0.0.1", "host:", ":80", "h:99999", "h:12x"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_bind_address(bad), Error);
  }
}

TEST_CASE("Server: round trip over TCP") {
  const FactorGraph g = slipped_wall();
  SessionService service{Session(g)};
  Server server(service);
  server.listen("127.0.0.1", 0);
  REQUIRE(server.port() != 0);
  std::thread loop([&] { server.run(); });

  {
    Client a(server.port());
    Client b(server.port());
    CHECK(a.call(kHello)["type"] == "map_update");
    CHECK(b.call(R"({"type": "request_snapshot"})")["kind"] == "ProtocolError");
    CHECK(b.call(kHello)["update"]["iteration"] == 0);

    // Two requests in one write, answered in order.
    a.send(submit(wall_stroke(g), 10) + "\n" + R"({"type": "request_snapshot", "id": 11})" + "\n");
    const json first = a.receive();
    const json second = a.receive();
    CHECK(first["id"] == 10);
    CHECK(first["update"]["iteration"] == 1);
    CHECK(second["id"] == 11);
    CHECK(second["update"] == first["update"]);

    // The other client sees the same session.
    CHECK(b.call(R"({"type": "request_snapshot"})")["update"]["iteration"] == 1);
    CHECK(b.call("not json")["kind"] == "MalformedMessage");
    CHECK(b.call(R"({"type": "undo_last"})")["type"] == "ack");
  }

  server.stop();
  loop.join();
  CHECK(service.graph() == g);
  CHECK_THROWS_AS(server.listen("256.0.0.1", 0), Error);
}
