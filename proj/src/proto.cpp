#include "pufkit/proto.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>

#include "json.hpp"

#include "pufkit/errors.hpp"
#include "pufkit/puf_core.hpp"

namespace pufkit {

namespace {

using nlohmann::json;

constexpr std::size_t kMaxLineBytes = 1 << 20;

void set_socket_timeout(int fd, std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

bool send_all(int fd, std::string_view data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t n =
            ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) {
            return false;
        }
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

// One complete JSON object per line, '\n'-terminated.
bool send_message(int fd, const json& message) {
    return send_all(fd, message.dump() + '\n');
}

class LineReader {
public:
    explicit LineReader(int fd) : fd_(fd) {}

    // nullopt on EOF, timeout, socket error, or an oversized line.
    std::optional<std::string> next_line() {
        for (;;) {
            const auto pos = buffer_.find('\n');
            if (pos != std::string::npos) {
                std::string line = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                return line;
            }
            if (buffer_.size() > kMaxLineBytes) {
                return std::nullopt;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
            if (n <= 0) {
                return std::nullopt;
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int fd_;
    std::string buffer_;
};

json parse_message(const std::string& line) {
    json msg = json::parse(line, nullptr, false);
    if (msg.is_discarded() || !msg.is_object() || !msg.contains("type") ||
        !msg.at("type").is_string()) {
        return json();  // null = malformed
    }
    return msg;
}

struct FdCloser {
    int fd;
    ~FdCloser() {
        if (fd >= 0) {
            ::close(fd);
        }
    }
};

int connect_with_timeout(const std::string& host, std::uint16_t port,
                         std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &result);
    if (rc != 0) {
        throw TransportError("resolve " + host + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    std::string last_error = "no address";
    for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) {
            last_error = std::strerror(errno);
            continue;
        }
        const int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            break;  // connected immediately
        }
        if (errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
            int err = 0;
            socklen_t len = sizeof(err);
            if (ready == 1 &&
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) == 0 && err == 0) {
                break;
            }
            last_error = ready == 1 ? std::strerror(err) : "connect timeout";
        } else {
            last_error = std::strerror(errno);
        }
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(result);
    if (fd < 0) {
        throw TransportError("connect " + host + ":" + std::to_string(port) + ": " +
                             last_error);
    }
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags & ~O_NONBLOCK);
    set_socket_timeout(fd, timeout);
    return fd;
}

}  // namespace

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint) {
    const auto pos = endpoint.rfind(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 >= endpoint.size()) {
        throw ConfigError("endpoint: expected host:port");
    }
    const std::string host = endpoint.substr(0, pos);
    const std::string port_str = endpoint.substr(pos + 1);
    unsigned long port = 0;
    try {
        std::size_t used = 0;
        port = std::stoul(port_str, &used);
        if (used != port_str.size()) {
            throw std::invalid_argument("trailing characters");
        }
    } catch (const std::exception&) {
        throw ConfigError("endpoint: port must be a number");
    }
    if (port > 65535) {
        throw ConfigError("endpoint: port out of range");
    }
    return {host, static_cast<std::uint16_t>(port)};
}

VerifierServer::VerifierServer(std::filesystem::path db_path, ServerOptions options)
    : db_path_(std::move(db_path)), options_(std::move(options)) {}

VerifierServer::~VerifierServer() {
    stop();
}

void VerifierServer::start() {
    if (running_.load()) {
        return;
    }
    db_ = CrpDatabase::load(db_path_);
    if (options_.threshold_override) {
        db_->set_threshold(*options_.threshold_override);
    }

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) {
        throw TransportError(std::string("socket: ") + std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options_.port);
    if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw ConfigError("listen host: expected an IPv4 address");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 64) != 0) {
        const std::string reason = std::strerror(errno);
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw TransportError("bind/listen " + options_.host + ": " + reason);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);

    running_.store(true);
    accept_thread_ = std::thread(&VerifierServer::accept_loop, this);
}

void VerifierServer::stop() {
    const bool was_running = running_.exchange(false);
    // The accept loop polls with a short timeout and rechecks running_, so it
    // exits on its own; joining before closing the fd avoids touching a
    // recycled descriptor.
    if (accept_thread_.joinable()) {
        accept_thread_.join();
    }
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (!was_running) {
        return;
    }
    {
        std::lock_guard lock(conn_mutex_);
        for (int fd : live_fds_) {
            ::shutdown(fd, SHUT_RDWR);
        }
    }
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(conn_mutex_);
        workers.swap(workers_);
    }
    for (std::thread& t : workers) {
        if (t.joinable()) {
            t.join();
        }
    }
}

void VerifierServer::track(int fd) {
    std::lock_guard lock(conn_mutex_);
    live_fds_.push_back(fd);
}

void VerifierServer::untrack(int fd) {
    std::lock_guard lock(conn_mutex_);
    std::erase(live_fds_, fd);
}

void VerifierServer::accept_loop() {
    while (running_.load()) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, 200);
        if (!running_.load()) {
            break;
        }
        if (ready <= 0) {
            continue;
        }
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            continue;
        }
        set_socket_timeout(fd, options_.idle_timeout);
        track(fd);
        std::lock_guard lock(conn_mutex_);
        workers_.emplace_back(&VerifierServer::handle_connection, this, fd);
    }
}

void VerifierServer::handle_connection(int fd) {
    try {
        run_session(fd);
    } catch (const std::exception& e) {
        // Server-side faults (e.g. a failed database write) abort the session
        // but never the server.
        send_message(fd,
                     json{{"type", "error"}, {"code", "bad_message"}, {"detail", e.what()}});
    }
    untrack(fd);
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
}

// awaiting_request -> challenged -> done; anything out of order is bad_message
// and the connection closes.
void VerifierServer::run_session(int fd) {
    LineReader reader(fd);
    const auto send_error = [&](const std::string& code, const std::string& detail) {
        send_message(fd, json{{"type", "error"}, {"code", code}, {"detail", detail}});
    };

    std::optional<std::string> line = reader.next_line();
    if (!line) {
        return;  // idle timeout or EOF
    }
    json msg = parse_message(*line);
    if (msg.is_null() || msg.at("type") != "auth_request" || !msg.contains("id") ||
        !msg.at("id").is_string()) {
        send_error("bad_message", "expected auth_request");
        return;
    }
    const std::string entity_id = msg.at("id").get<std::string>();

    std::uint32_t record_index = 0;
    json challenge_msg;
    try {
        std::lock_guard lock(db_mutex_);
        auto [challenge, index] = db_->issue_challenge(entity_id);
        db_->save(db_path_);  // burn-on-issue is on disk before the wire
        record_index = index;
        challenge_msg = json{{"type", "challenge"},
                             {"record_index", index},
                             {"challenge", challenge}};
    } catch (const NotFoundError& e) {
        send_error("unknown_id", e.what());
        return;
    } catch (const ExhaustedError& e) {
        send_error("exhausted", e.what());
        return;
    }
    if (!send_message(fd, challenge_msg)) {
        return;
    }

    line = reader.next_line();
    if (!line) {
        return;
    }
    msg = parse_message(*line);
    if (msg.is_null() || msg.at("type") != "response" || !msg.contains("record_index") ||
        !msg.at("record_index").is_number_unsigned() ||
        msg.at("record_index").get<std::uint32_t>() != record_index ||
        !msg.contains("bits") || !msg.at("bits").is_string()) {
        send_error("bad_message", "expected response for issued record");
        return;
    }
    AuthOutcome outcome;
    try {
        const BitVec bits = BitVec::from_string(msg.at("bits").get<std::string>());
        std::lock_guard lock(db_mutex_);
        outcome = db_->verify_response(entity_id, record_index, bits);
    } catch (const Error& e) {
        send_error("bad_message", e.what());
        return;
    }
    send_message(fd, json{{"type", "result"},
                          {"accept", outcome.accept},
                          {"distance", outcome.distance},
                          {"threshold", outcome.threshold}});
}

AuthOutcome run_prover(const std::string& host, std::uint16_t port, const std::string& id,
                       const PopulationConfig& config, const PufInstance& instance,
                       const Environment& env, std::uint64_t measurement_index,
                       std::chrono::milliseconds timeout) {
    const int fd = connect_with_timeout(host, port, timeout);
    FdCloser closer{fd};
    LineReader reader(fd);

    if (!send_message(fd, json{{"type", "auth_request"}, {"id", id}})) {
        throw TransportError("send auth_request failed");
    }
    std::optional<std::string> line = reader.next_line();
    if (!line) {
        throw TransportError("no challenge from server (timeout or closed)");
    }
    json msg = parse_message(*line);
    if (msg.is_null()) {
        throw ProtocolError("server sent a malformed line");
    }
    if (msg.at("type") == "error") {
        throw RemoteError(msg.value("code", "unknown"), msg.value("detail", ""));
    }
    if (msg.at("type") != "challenge" || !msg.contains("record_index") ||
        !msg.contains("challenge")) {
        throw ProtocolError("expected challenge message");
    }
    const auto record_index = msg.at("record_index").get<std::uint32_t>();
    const Challenge challenge = challenge_from_json(msg.at("challenge"));
    const Response response = evaluate(config, instance, challenge, env, measurement_index);

    if (!send_message(fd, json{{"type", "response"},
                               {"record_index", record_index},
                               {"bits", response.bits.to_string()}})) {
        throw TransportError("send response failed");
    }
    line = reader.next_line();
    if (!line) {
        throw TransportError("no result from server (timeout or closed)");
    }
    msg = parse_message(*line);
    if (msg.is_null()) {
        throw ProtocolError("server sent a malformed line");
    }
    if (msg.at("type") == "error") {
        throw RemoteError(msg.value("code", "unknown"), msg.value("detail", ""));
    }
    if (msg.at("type") != "result") {
        throw ProtocolError("expected result message");
    }
    AuthOutcome outcome;
    outcome.accept = msg.at("accept").get<bool>();
    outcome.distance = msg.at("distance").get<std::uint32_t>();
    outcome.threshold = msg.at("threshold").get<std::uint32_t>();
    outcome.record_index = record_index;
    return outcome;
}

}  // namespace pufkit
