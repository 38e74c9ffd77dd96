#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pufkit/authn.hpp"
#include "pufkit/oscillator_model.hpp"

namespace pufkit {

struct ServerOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;  // 0 = pick an ephemeral port
    std::chrono::milliseconds idle_timeout{5000};
    std::optional<std::uint32_t> threshold_override;  // runtime policy, not persisted
};

// Runs the verifier side of the authentication exchange: one newline-delimited
// JSON message per line, one authentication per connection
// (auth_request -> challenge -> response -> result). The CRP burn is persisted
// to disk before the challenge leaves the process.
class VerifierServer {
public:
    VerifierServer(std::filesystem::path db_path, ServerOptions options);
    ~VerifierServer();

    VerifierServer(const VerifierServer&) = delete;
    VerifierServer& operator=(const VerifierServer&) = delete;

    void start();  // loads the database, binds and spawns the accept loop
    void stop();   // idempotent

    std::uint16_t port() const { return port_; }
    bool running() const { return running_.load(); }

private:
    void accept_loop();
    void handle_connection(int fd);
    void run_session(int fd);
    void track(int fd);
    void untrack(int fd);

    std::filesystem::path db_path_;
    ServerOptions options_;
    std::optional<CrpDatabase> db_;
    std::mutex db_mutex_;

    std::atomic<bool> running_{false};
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::thread accept_thread_;
    std::mutex conn_mutex_;
    std::vector<std::thread> workers_;
    std::vector<int> live_fds_;
};

// Client side: requests a challenge for `id`, answers it with one noisy
// measurement at `env`, and returns the verifier's verdict. Transport
// failures throw TransportError (distinct from a reject); server-reported
// errors throw RemoteError carrying the wire code.
AuthOutcome run_prover(const std::string& host, std::uint16_t port, const std::string& id,
                       const PopulationConfig& config, const PufInstance& instance,
                       const Environment& env, std::uint64_t measurement_index,
                       std::chrono::milliseconds timeout = std::chrono::milliseconds{5000});

// Splits "host:port"; ConfigError on malformed input.
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

}  // namespace pufkit
