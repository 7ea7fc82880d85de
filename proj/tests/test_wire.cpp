#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <optional>
#include <string>

#include <json.hpp>

using nlohmann::json;

namespace {

// A kernel process hosting the TCP endpoint on an ephemeral port.
struct ServerProc {
    pid_t pid = -1;
    int port = 0;
    int out_fd = -1;

    ServerProc() {
        const char* bin_dir = std::getenv("CTX_BIN_DIR");
        const char* data = std::getenv("CTX_DATA_DIR");
        REQUIRE(bin_dir != nullptr);
        REQUIRE(data != nullptr);
        std::string bin = std::string(bin_dir) + "/ctxkernel";
        std::string cfg = std::string(data) + "/config.json";

        int pipefd[2];
        REQUIRE(pipe(pipefd) == 0);
        pid = fork();
        REQUIRE(pid >= 0);
        if (pid == 0) {
            dup2(pipefd[1], STDOUT_FILENO);
            close(pipefd[0]);
            close(pipefd[1]);
            execl(bin.c_str(), "ctxkernel", "serve", "--listen", "127.0.0.1:0", "--config",
                  cfg.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(pipefd[1]);
        out_fd = pipefd[0];

        // First stdout line announces the bound endpoint: "listening on 127.0.0.1:NNNN"
        std::string line;
        char c;
        while (read(out_fd, &c, 1) == 1 && c != '\n') line.push_back(c);
        auto colon = line.rfind(':');
        REQUIRE(colon != std::string::npos);
        port = std::stoi(line.substr(colon + 1));
        REQUIRE(port > 0);
    }

    int terminate() {
        if (pid < 0) return -1;
        kill(pid, SIGTERM);
        int status = 0;
        waitpid(pid, &status, 0);
        pid = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    ~ServerProc() {
        if (pid > 0) {
            kill(pid, SIGKILL);
            waitpid(pid, nullptr, 0);
        }
        if (out_fd >= 0) close(out_fd);
    }
};

struct Client {
    int fd = -1;
    std::string buf;

    explicit Client(int port) {
        fd = socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(fd >= 0);
        timeval tv{10, 0}; // a stuck test fails instead of hanging
        setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<uint16_t>(port));
        inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
        REQUIRE(connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    }

    ~Client() {
        if (fd >= 0) close(fd);
    }

    void send_raw(const std::string& s) {
        REQUIRE(send(fd, s.data(), s.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(s.size()));
    }
    void send_json(const json& j) { send_raw(j.dump() + "\n"); }

    std::optional<json> recv_frame() {
        while (true) {
            auto nl = buf.find('\n');
            if (nl != std::string::npos) {
                std::string line = buf.substr(0, nl);
                buf.erase(0, nl + 1);
                return json::parse(line);
            }
            char chunk[4096];
            ssize_t n = recv(fd, chunk, sizeof chunk, 0);
            if (n <= 0) return std::nullopt;
            buf.append(chunk, static_cast<size_t>(n));
        }
    }

    bool at_eof() {
        char c;
        return recv(fd, &c, 1, 0) == 0;
    }

    // Handshake helpers.
    json hello_service() {
        send_json({{"type", "hello"}, {"role", "service"}});
        auto r = recv_frame();
        REQUIRE(r.has_value());
        return *r;
    }
    json hello_provider(const std::string& id, const std::string& kind) {
        send_json({{"type", "hello"},
                   {"role", "provider"},
                   {"descriptor",
                    {{"provider_id", id}, {"kind", kind}, {"source", "Sensed"}, {"mode", "push"}}}});
        auto r = recv_frame();
        REQUIRE(r.has_value());
        return *r;
    }
};

} // namespace

TEST_CASE("hello declares a role; anything before it is a protocol violation") {
    ServerProc server;
    {
        Client c(server.port);
        json reply = c.hello_service();
        CHECK(reply["type"] == "hello");
        CHECK(reply["role"] == "service");
        CHECK(reply["server"] == "context-kernel");
    }
    {
        Client c(server.port);
        json reply = c.hello_provider("wire_profile", "profile");
        CHECK(reply["role"] == "provider");
    }
    {
        Client c(server.port);
        c.send_json({{"type", "query"}, {"pattern", "Role(?u, ?r)"}});
        auto err = c.recv_frame();
        REQUIRE(err.has_value());
        CHECK((*err)["type"] == "error");
        CHECK((*err)["code"] == "protocol");
        CHECK(c.at_eof()); // violation closes the session
    }
    {
        Client c(server.port);
        c.send_json({{"type", "hello"}, {"role", "superuser"}});
        auto err = c.recv_frame();
        REQUIRE(err.has_value());
        CHECK((*err)["code"] == "protocol");
        CHECK(c.at_eof());
    }
    CHECK(server.terminate() == 0);
}

TEST_CASE("providers push events; stale sequence numbers are reported, not fatal") {
    ServerProc server;
    Client p(server.port);
    p.hello_provider("wire_profile", "profile");

    p.send_json({{"type", "event"},
                 {"provider_id", "wire_profile"},
                 {"time", "2009-06-02T09:00:00Z"},
                 {"seq", 1},
                 {"payload", {{"user", "John"}, {"role", "Lecturer"}}}});
    auto r1 = p.recv_frame();
    REQUIRE(r1.has_value());
    CHECK((*r1)["type"] == "result");
    CHECK((*r1)["ok"] == true);
    CHECK((*r1)["facts"].size() == 1);

    // Sequence number 1 again: refused, but the session keeps serving.
    p.send_json({{"type", "event"},
                 {"provider_id", "wire_profile"},
                 {"time", "2009-06-02T09:01:00Z"},
                 {"seq", 1},
                 {"payload", {{"user", "Jim"}, {"role", "Student"}}}});
    auto stale = p.recv_frame();
    REQUIRE(stale.has_value());
    CHECK((*stale)["type"] == "error");
    CHECK((*stale)["code"] == "StaleEvent");

    p.send_json({{"type", "event"},
                 {"provider_id", "wire_profile"},
                 {"time", "2009-06-02T09:02:00Z"},
                 {"seq", 2},
                 {"payload", {{"user", "Jim"}, {"role", "Student"}}}});
    auto r2 = p.recv_frame();
    REQUIRE(r2.has_value());
    CHECK((*r2)["ok"] == true);

    // A reader sees exactly the two admitted events.
    Client q(server.port);
    q.hello_service();
    q.send_json({{"type", "query"}, {"pattern", "Role(?u, ?r)"}});
    auto rows = q.recv_frame();
    REQUIRE(rows.has_value());
    CHECK((*rows)["rows"].size() == 2);
    CHECK((*rows)["rows"][0]["binding"]["?u"] == "John");
    CHECK((*rows)["rows"][1]["binding"]["?u"] == "Jim");
    CHECK(server.terminate() == 0);
}

TEST_CASE("provider identity: reconnection is welcome, redefinition is not") {
    ServerProc server;
    {
        Client a(server.port);
        CHECK(a.hello_provider("wire_profile", "profile")["type"] == "hello");
    }
    {
        Client b(server.port);
        CHECK(b.hello_provider("wire_profile", "profile")["type"] == "hello"); // same descriptor
    }
    {
        Client c(server.port);
        json err = c.hello_provider("wire_profile", "weather"); // same id, different shape
        CHECK(err["type"] == "error");
        CHECK(err["code"] == "DuplicateProvider");
        // The refusal is a domain error: the connection survives and a
        // corrected hello goes through.
        CHECK(c.hello_provider("wire_weather", "weather")["type"] == "hello");
    }
    CHECK(server.terminate() == 0);
}

TEST_CASE("a session only speaks for the provider it declared") {
    ServerProc server;
    Client p(server.port);
    p.hello_provider("wire_profile", "profile");
    p.send_json({{"type", "event"},
                 {"provider_id", "someone_else"},
                 {"time", "2009-06-02T09:00:00Z"},
                 {"seq", 1},
                 {"payload", {{"user", "John"}, {"role", "Lecturer"}}}});
    auto err = p.recv_frame();
    REQUIRE(err.has_value());
    CHECK((*err)["code"] == "protocol");
    CHECK(p.at_eof());
    CHECK(server.terminate() == 0);
}

TEST_CASE("services state facts and subscribers hear the mutation") {
    ServerProc server;

    Client sub(server.port);
    sub.hello_service();
    sub.send_json({{"type", "subscribe"}, {"pattern", "Activity(?s, ?a)"}});
    auto ack = sub.recv_frame();
    REQUIRE(ack.has_value());
    CHECK((*ack)["ok"] == true);
    CHECK((*ack)["subscription"].is_number());

    Client writer(server.port);
    writer.hello_service();
    writer.send_json({{"type", "fact"},
                      {"subject", "John"},
                      {"predicate", "Activity"},
                      {"object", "Out for Conference"},
                      {"at", "2009-06-02T12:30:00Z"}});
    auto res = writer.recv_frame();
    REQUIRE(res.has_value());
    CHECK((*res)["ok"] == true);
    CHECK((*res)["fact"].is_number());

    auto note = sub.recv_frame();
    REQUIRE(note.has_value());
    CHECK((*note)["type"] == "notification");
    CHECK((*note)["kind"] == "added");
    CHECK((*note)["fact"]["subject"] == "John");
    CHECK((*note)["fact"]["predicate"] == "Activity");
    CHECK((*note)["fact"]["object"] == "OutForConference"); // free text normalized
    CHECK((*note)["fact"]["source"] == "Defined");
    CHECK((*note)["fact"]["confidence"] == 1.0);

    writer.send_json(
        {{"type", "query"}, {"pattern", "Activity(John, ?a)"}, {"at", "2009-06-02T12:30:00Z"}});
    auto rows = writer.recv_frame();
    REQUIRE(rows.has_value());
    REQUIRE((*rows)["rows"].size() == 1);
    CHECK((*rows)["rows"][0]["binding"]["?a"] == "OutForConference");

    // A pattern no fact matches answers with an empty row set, not an error.
    writer.send_json({{"type", "query"}, {"pattern", "Teaching(?u, ?c)"}});
    auto empty = writer.recv_frame();
    REQUIRE(empty.has_value());
    CHECK((*empty)["ok"] == true);
    CHECK((*empty)["rows"].empty());

    // An unparseable pattern is a domain error; the session continues.
    writer.send_json({{"type", "query"}, {"pattern", "this is not a pattern"}});
    auto bad = writer.recv_frame();
    REQUIRE(bad.has_value());
    CHECK((*bad)["type"] == "error");
    writer.send_json({{"type", "query"}, {"pattern", "Activity(John, ?a)"}});
    CHECK(writer.recv_frame().has_value());

    CHECK(server.terminate() == 0);
}

TEST_CASE("facts that fail ontology validation are refused but not fatal") {
    ServerProc server;
    Client w(server.port);
    w.hello_service();
    w.send_json({{"type", "fact"},
                 {"subject", "Nobody"},
                 {"predicate", "Activity"},
                 {"object", "Meeting"},
                 {"at", "2009-06-02T12:30:00Z"}});
    auto err = w.recv_frame();
    REQUIRE(err.has_value());
    CHECK((*err)["type"] == "error");
    CHECK((*err)["code"] == "ValidationFailed");

    w.send_json({{"type", "fact"},
                 {"subject", "John"},
                 {"predicate", "Activity"},
                 {"object", "Meeting"},
                 {"at", "2009-06-02T12:30:00Z"}});
    auto ok = w.recv_frame();
    REQUIRE(ok.has_value());
    CHECK((*ok)["ok"] == true);
    CHECK(server.terminate() == 0);
}

TEST_CASE("malformed frames and unknown types close the session") {
    ServerProc server;
    {
        Client c(server.port);
        c.send_raw("this is not json\n");
        auto err = c.recv_frame();
        REQUIRE(err.has_value());
        CHECK((*err)["code"] == "parse");
        CHECK(c.at_eof());
    }
    {
        Client c(server.port);
        c.send_raw("[1, 2, 3]\n"); // valid JSON, not a frame
        auto err = c.recv_frame();
        REQUIRE(err.has_value());
        CHECK((*err)["code"] == "parse");
        CHECK(c.at_eof());
    }
    {
        Client c(server.port);
        c.hello_service();
        c.send_json({{"type", "dance"}});
        auto err = c.recv_frame();
        REQUIRE(err.has_value());
        CHECK((*err)["code"] == "protocol");
        CHECK(c.at_eof());
    }
    {
        Client c(server.port);
        c.hello_service();
        c.send_json({{"type", "event"},
                     {"provider_id", "x"},
                     {"time", "2009-06-02T09:00:00Z"},
                     {"seq", 1}});
        auto err = c.recv_frame(); // services do not push events
        REQUIRE(err.has_value());
        CHECK((*err)["code"] == "protocol");
        CHECK(c.at_eof());
    }
    CHECK(server.terminate() == 0);
}

TEST_CASE("shutdown closes live sessions and exits cleanly") {
    ServerProc server;
    Client c(server.port);
    c.hello_service();
    CHECK(server.terminate() == 0);
    CHECK(c.at_eof());
}
