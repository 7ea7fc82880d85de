#include "ctx/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <ctime>
#include <filesystem>

#include "ctx/errors.hpp"

namespace ctx {

namespace {

constexpr size_t kMaxFrameBytes = 1 << 20;

std::pair<std::string, int> parse_listen(const std::string& endpoint) {
    auto colon = endpoint.rfind(':');
    if (colon == std::string::npos)
        throw Error(Errc::ConfigInvalid, "listen endpoint must be host:port, got '" + endpoint +
                                             "'");
    std::string host = endpoint.substr(0, colon);
    if (host.empty()) host = "127.0.0.1";
    std::string port_text = endpoint.substr(colon + 1);
    try {
        size_t used = 0;
        int port = std::stoi(port_text, &used);
        if (used != port_text.size() || port < 0 || port > 65535)
            throw std::invalid_argument(port_text);
        return {host, port};
    } catch (const std::exception&) {
        throw Error(Errc::ConfigInvalid, "listen port invalid in '" + endpoint + "'");
    }
}

nlohmann::ordered_json error_frame(const std::string& code, const std::string& detail) {
    return {{"type", "error"}, {"code", code}, {"detail", detail}};
}

} // namespace

WireServer::WireServer(const Config& config, Ontology ontology, RuleSet rules,
                       MappingRuleSet mapping)
    : config_(config),
      kb_(std::move(ontology), config.strict),
      acquisition_(kb_, std::move(mapping)),
      engine_(std::move(rules)) {
    engine_.validate_rules(kb_.ontology());
    if (!config_.journal_path.empty()) {
        // Recover state from a previous run before appending to the same file.
        if (std::filesystem::exists(config_.journal_path))
            kb_.load_journal(config_.journal_path);
        kb_.attach_journal(config_.journal_path);
    }
}

WireServer::~WireServer() { stop(); }

void WireServer::start() {
    auto [host, port] = parse_listen(config_.listen);
    host_ = host;

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(Errc::IoError, "socket: " + std::string(strerror(errno)));

    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw Error(Errc::ConfigInvalid, "listen host must be an IPv4 address, got " + host);

    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
        throw Error(Errc::IoError, "bind " + config_.listen + ": " + strerror(errno));
    if (::listen(listen_fd_, 16) < 0)
        throw Error(Errc::IoError, "listen: " + std::string(strerror(errno)));

    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    if (::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len) == 0)
        port_ = ntohs(bound.sin_port);

    accept_thread_ = std::thread([this] { accept_loop(); });
}

void WireServer::stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) {
        if (accept_thread_.joinable()) accept_thread_.join();
        return;
    }
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    {
        std::lock_guard lock(sessions_mutex_);
        for (auto& s : sessions_) {
            s->dead = true;
            if (s->fd >= 0) ::shutdown(s->fd, SHUT_RDWR);
        }
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    for (auto& t : session_threads_)
        if (t.joinable()) t.join();
    session_threads_.clear();
    sessions_.clear();
}

void WireServer::accept_loop() {
    while (!stopping_) {
        sockaddr_in peer{};
        socklen_t len = sizeof peer;
        int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
        if (fd < 0) {
            if (stopping_) break;
            continue;
        }
        auto session = std::make_shared<Session>();
        session->fd = fd;
        std::lock_guard lock(sessions_mutex_);
        if (stopping_) {
            ::close(fd);
            break;
        }
        sessions_.push_back(session);
        session_threads_.emplace_back([this, session] { run_session(session); });
    }
}

bool WireServer::send_frame(Session& s, const nlohmann::ordered_json& frame) {
    if (s.dead || s.fd < 0) return false;
    std::string line = frame.dump();
    line.push_back('\n');
    std::lock_guard lock(s.write_mutex);
    size_t sent = 0;
    while (sent < line.size()) {
        ssize_t n = ::send(s.fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) {
            s.dead = true;
            return false;
        }
        sent += static_cast<size_t>(n);
    }
    return true;
}

void WireServer::reason_after_mutation() {
    std::lock_guard lock(engine_mutex_);
    engine_.run(kb_);
}

void WireServer::run_session(std::shared_ptr<Session> s) {
    std::string buffer;
    char chunk[4096];
    bool keep = true;
    while (keep && !stopping_ && !s->dead) {
        ssize_t n = ::recv(s->fd, chunk, sizeof chunk, 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<size_t>(n));
        size_t nl;
        while (keep && (nl = buffer.find('\n')) != std::string::npos) {
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            keep = handle_line(s, line);
        }
        if (buffer.size() > kMaxFrameBytes) {
            send_frame(*s, error_frame("parse", "frame exceeds 1 MiB"));
            keep = false;
        }
    }

    for (SubId id : s->subscriptions) kb_.unsubscribe(id);
    s->subscriptions.clear();
    s->dead = true;
    if (s->fd >= 0) {
        ::close(s->fd);
        s->fd = -1;
    }
}

bool WireServer::handle_line(const std::shared_ptr<Session>& s, const std::string& line) {
    nlohmann::json msg;
    try {
        msg = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        send_frame(*s, error_frame("parse", e.what()));
        return false;
    }
    if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string()) {
        send_frame(*s, error_frame("parse", "frame needs a string 'type'"));
        return false;
    }
    const std::string type = msg.at("type").get<std::string>();

    try {
        if (type == "hello") {
            std::string role = msg.at("role").get<std::string>();
            if (role != "provider" && role != "service") {
                send_frame(*s, error_frame("protocol", "role must be provider or service"));
                return false;
            }
            if (role == "provider") {
                ProviderDescriptor d = ProviderDescriptor::from_json(msg.at("descriptor"));
                if (!d.confidence_explicit)
                    d.default_confidence = config_.confidence_for(d.default_source);
                auto existing = acquisition_.provider(d.provider_id);
                if (existing) {
                    // Reconnection with the same descriptor is welcome.
                    if (existing->to_json() != d.to_json())
                        throw Error(Errc::DuplicateProvider,
                                    "provider '" + d.provider_id +
                                        "' already registered with a different descriptor");
                } else {
                    acquisition_.register_provider(d);
                }
                s->provider_id = d.provider_id;
            }
            s->role = role;
            send_frame(*s, {{"type", "hello"}, {"server", "context-kernel"}, {"role", role}});
            return true;
        }

        if (s->role.empty()) {
            send_frame(*s, error_frame("protocol", "hello must come first"));
            return false;
        }

        if (type == "event") {
            if (s->role != "provider") {
                send_frame(*s, error_frame("protocol", "only providers push events"));
                return false;
            }
            ProviderEvent e = ProviderEvent::from_json(msg);
            if (!s->provider_id.empty() && e.provider_id != s->provider_id) {
                send_frame(*s, error_frame("protocol",
                                           "event provider_id does not match this session"));
                return false;
            }
            auto ids = acquisition_.ingest(e);
            reason_after_mutation();
            send_frame(*s, {{"type", "result"}, {"ok", true}, {"facts", ids}});
            return true;
        }

        if (type == "fact") {
            if (s->role != "service") {
                send_frame(*s, error_frame("protocol", "only services state facts"));
                return false;
            }
            Timestamp at = msg.contains("at")
                               ? parse_timestamp(msg.at("at").get<std::string>())
                               : static_cast<Timestamp>(::time(nullptr));
            FactId id = acquisition_.user_update(msg.at("subject").get<std::string>(),
                                                 msg.at("predicate").get<std::string>(),
                                                 normalize_object(msg.at("object")), at);
            reason_after_mutation();
            send_frame(*s, {{"type", "result"}, {"ok", true}, {"fact", id}});
            return true;
        }

        if (type == "query") {
            Pattern p = Pattern::parse(msg.at("pattern").get<std::string>());
            if (msg.contains("at")) p.time_at = parse_timestamp(msg.at("at").get<std::string>());
            auto rows_json = nlohmann::ordered_json::array();
            for (const QueryResult& r : kb_.query(p)) {
                nlohmann::ordered_json binding;
                for (const auto& [var, val] : r.binding) binding[var] = val.to_json();
                rows_json.push_back({{"fact", r.fact.to_json()}, {"binding", binding}});
            }
            send_frame(*s, {{"type", "result"}, {"ok", true}, {"rows", rows_json}});
            return true;
        }

        if (type == "subscribe") {
            if (s->role != "service") {
                send_frame(*s, error_frame("protocol", "only services subscribe"));
                return false;
            }
            Pattern p = Pattern::parse(msg.at("pattern").get<std::string>());
            std::weak_ptr<Session> weak = s;
            SubId id = kb_.subscribe(p, [this, weak](const Notification& n) {
                auto session = weak.lock();
                if (!session || session->dead) return false;
                nlohmann::ordered_json frame;
                frame["type"] = "notification";
                frame["kind"] = Notification::kind_name(n.kind);
                frame["seq"] = n.seq;
                frame["fact"] = n.fact.to_json();
                if (n.old) frame["old"] = n.old->to_json();
                return send_frame(*session, frame);
            });
            s->subscriptions.push_back(id);
            send_frame(*s, {{"type", "result"}, {"ok", true}, {"subscription", id}});
            return true;
        }

        send_frame(*s, error_frame("protocol", "unknown message type '" + type + "'"));
        return false;
    } catch (const Error& e) {
        // Domain failure: report and keep serving this session.
        send_frame(*s, error_frame(std::string(errc_name(e.code())), e.detail()));
        return true;
    } catch (const nlohmann::json::exception& e) {
        send_frame(*s, error_frame("parse", e.what()));
        return false;
    }
}

} // namespace ctx
