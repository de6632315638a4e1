#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "popos/wire.hpp"

namespace popos::transport {

/// One-way latency plus direction-specific rate limits, modelling a
/// bandwidth-constrained verifier.
struct LinkConfig {
    uint64_t latency_us = 25'000;
    uint64_t download_bits_per_sec = 100'000'000;
    uint64_t upload_bits_per_sec = 10'000'000;
    uint64_t timeout_us = 30'000'000;  // per-message response deadline
};

/// Byte, message and simulated-clock accounting for one client run.
/// Down/up are from the verifier's perspective. Monotone non-decreasing.
struct Meter {
    uint64_t bytes_down = 0;
    uint64_t bytes_up = 0;
    uint64_t messages_down = 0;
    uint64_t messages_up = 0;
    uint64_t requests = 0;  // request/response exchanges awaited
    uint64_t clock_us = 0;  // simulated (sim) or wall (tcp) elapsed
};

/// Frames as seen from the verifier side, in driver order.
struct TranscriptEntry {
    bool outbound = false;
    Bytes frame;

    bool operator==(const TranscriptEntry&) const = default;
};
using Transcript = std::vector<TranscriptEntry>;

/// Server-side message handler. Must be safe for concurrent calls; nullopt
/// means deliberate silence (no response will ever arrive).
class Endpoint {
public:
    virtual ~Endpoint() = default;
    virtual std::optional<wire::Message> handle(const wire::Message& request) = 0;
};

/// Verifier-side view of one prover connection.
class Channel {
public:
    virtual ~Channel() = default;
    /// Sends a request and waits for the response; nullopt on timeout,
    /// disconnect or malformed reply.
    virtual std::optional<wire::Message> request(const wire::Message& msg) = 0;
    /// Fire-and-forget (verdicts).
    virtual void send_oneway(const wire::Message& msg) = 0;
};

/// Clock advance for carrying `bytes` across a link at `bits_per_sec`.
uint64_t transfer_us(uint64_t bytes, uint64_t bits_per_sec);

/// In-process link: every frame is encoded, metered, clock-advanced and
/// decoded exactly as on the TCP path.
class SimChannel : public Channel {
public:
    SimChannel(Endpoint& endpoint, const LinkConfig& link, Meter& meter,
               Transcript* transcript = nullptr);

    std::optional<wire::Message> request(const wire::Message& msg) override;
    void send_oneway(const wire::Message& msg) override;

    /// Drops every frame after the first `frames` sent ones (fault injection).
    void drop_after(uint64_t frames) { drop_after_ = frames; }

private:
    bool send_frame(const wire::Message& msg);

    Endpoint& endpoint_;
    LinkConfig link_;
    Meter& meter_;
    Transcript* transcript_;
    uint64_t frames_sent_ = 0;
    uint64_t drop_after_ = ~uint64_t{0};
};

/// Loopback TCP prover endpoint, one session thread per connection.
class TcpServer {
public:
    explicit TcpServer(std::shared_ptr<Endpoint> endpoint);
    ~TcpServer();

    /// Binds and starts accepting; port 0 picks an ephemeral port.
    /// Returns the bound port.
    uint16_t start(uint16_t port);
    void stop();

private:
    void accept_loop();
    void serve_connection(int fd);

    std::shared_ptr<Endpoint> endpoint_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex mu_;
    std::vector<int> client_fds_;
    std::vector<std::thread> client_threads_;
};

/// TCP client channel with the same framing and metering as SimChannel;
/// clock accumulates wall time per exchange.
class TcpChannel : public Channel {
public:
    TcpChannel(const std::string& host, uint16_t port, const LinkConfig& link, Meter& meter,
               Transcript* transcript = nullptr);
    ~TcpChannel();

    bool connected() const { return fd_ >= 0; }

    std::optional<wire::Message> request(const wire::Message& msg) override;
    void send_oneway(const wire::Message& msg) override;

private:
    bool write_frame(const Bytes& frame);
    std::optional<Bytes> read_frame();
    void close_now();

    int fd_ = -1;
    LinkConfig link_;
    Meter& meter_;
    Transcript* transcript_;
};

}  // namespace popos::transport
