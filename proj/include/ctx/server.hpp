#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ctx/acquisition.hpp"
#include "ctx/config.hpp"
#include "ctx/reasoner.hpp"

namespace ctx {

// Newline-delimited-JSON-over-TCP endpoint hosting the full stack in one
// process. Providers push `event` messages; services issue `query`,
// `subscribe` and `fact` messages and receive `result` and `notification`
// frames. Sessions open with a `hello` declaring their role.
//
// Malformed frames and role violations earn an `error` frame and close the
// session; domain errors (stale events, validation failures) earn an `error`
// frame and the session continues. The reasoner runs after every mutation
// batch. Notifications are written synchronously in mutation order; a
// subscriber that stops draining its socket stalls the stack rather than
// losing frames.
class WireServer {
public:
    WireServer(const Config& config, Ontology ontology, RuleSet rules, MappingRuleSet mapping);
    ~WireServer();

    // Binds the configured endpoint and starts accepting. Throws IoError.
    void start();

    // Graceful shutdown: closes the listener and every session, joins all
    // threads, flushes the journal. Idempotent.
    void stop();

    const std::string& host() const { return host_; }
    int port() const { return port_; } // actual port (useful when configured as 0)

    KnowledgeBase& kb() { return kb_; }
    ReasoningEngine& engine() { return engine_; }

private:
    struct Session {
        int fd = -1;
        std::string role; // empty until hello
        std::string provider_id;
        std::vector<SubId> subscriptions;
        std::mutex write_mutex;
        std::atomic<bool> dead{false};
    };

    void accept_loop();
    void run_session(std::shared_ptr<Session> s);
    // False when the session must close (protocol violation or dead socket).
    bool handle_line(const std::shared_ptr<Session>& s, const std::string& line);
    bool send_frame(Session& s, const nlohmann::ordered_json& frame);
    void reason_after_mutation();

    Config config_;
    KnowledgeBase kb_;
    AcquisitionModule acquisition_;
    ReasoningEngine engine_;
    std::mutex engine_mutex_;

    std::string host_ = "127.0.0.1";
    int port_ = 0;
    int listen_fd_ = -1;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex sessions_mutex_;
    std::vector<std::shared_ptr<Session>> sessions_;
    std::vector<std::thread> session_threads_;
};

} // namespace ctx
