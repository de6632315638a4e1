#include "popos/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

namespace popos::transport {

uint64_t transfer_us(uint64_t bytes, uint64_t bits_per_sec) {
    if (bits_per_sec == 0) return 0;
    const uint64_t bits = bytes * 8;
    return (bits * 1'000'000 + bits_per_sec - 1) / bits_per_sec;
}

// ---------------------------------------------------------------------------
// SimChannel
// ---------------------------------------------------------------------------

SimChannel::SimChannel(Endpoint& endpoint, const LinkConfig& link, Meter& meter,
                       Transcript* transcript)
    : endpoint_(endpoint), link_(link), meter_(meter), transcript_(transcript) {}

bool SimChannel::send_frame(const wire::Message& msg) {
    const Bytes frame = wire::frame(msg);
    meter_.bytes_up += frame.size();
    meter_.messages_up += 1;
    meter_.clock_us += link_.latency_us + transfer_us(frame.size(), link_.upload_bits_per_sec);
    if (transcript_) transcript_->push_back({true, frame});
    return frames_sent_++ < drop_after_;
}

std::optional<wire::Message> SimChannel::request(const wire::Message& msg) {
    meter_.requests += 1;
    const bool delivered = send_frame(msg);
    std::optional<wire::Message> response;
    if (delivered) response = endpoint_.handle(msg);
    if (!response) {
        meter_.clock_us += link_.timeout_us;  // waited out the deadline
        return std::nullopt;
    }
    const Bytes frame = wire::frame(*response);
    meter_.bytes_down += frame.size();
    meter_.messages_down += 1;
    meter_.clock_us += link_.latency_us + transfer_us(frame.size(), link_.download_bits_per_sec);
    if (transcript_) transcript_->push_back({false, frame});
    // Round-trip through the codec, exactly like the socket path.
    return wire::decode_frame(frame);
}

void SimChannel::send_oneway(const wire::Message& msg) {
    if (send_frame(msg)) endpoint_.handle(msg);
}

// ---------------------------------------------------------------------------
// TcpServer
// ---------------------------------------------------------------------------

namespace {

bool read_exact(int fd, uint8_t* dst, size_t n) {
    size_t got = 0;
    while (got < n) {
        const ssize_t r = ::recv(fd, dst + got, n - got, 0);
        if (r == 0) return false;
        if (r < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        got += static_cast<size_t>(r);
    }
    return true;
}

bool write_all(int fd, const uint8_t* src, size_t n) {
    size_t sent = 0;
    while (sent < n) {
        const ssize_t r = ::send(fd, src + sent, n - sent, MSG_NOSIGNAL);
        if (r < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        sent += static_cast<size_t>(r);
    }
    return true;
}

std::optional<Bytes> read_one_frame(int fd) {
    uint8_t header[wire::kFrameHeaderSize];
    if (!read_exact(fd, header, sizeof header)) return std::nullopt;
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = len << 8 | header[i];
    if (len > wire::kMaxPayloadSize) return std::nullopt;
    Bytes frame(header, header + sizeof header);
    frame.resize(wire::kFrameHeaderSize + len);
    if (len > 0 && !read_exact(fd, frame.data() + wire::kFrameHeaderSize, len))
        return std::nullopt;
    return frame;
}

}  // namespace

TcpServer::TcpServer(std::shared_ptr<Endpoint> endpoint) : endpoint_(std::move(endpoint)) {}

TcpServer::~TcpServer() { stop(); }

uint16_t TcpServer::start(uint16_t port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("TcpServer: socket failed");
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error("TcpServer: bind failed");
    }
    if (::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error("TcpServer: listen failed");
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);

    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return ntohs(addr.sin_port);
}

void TcpServer::accept_loop() {
    while (running_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) break;
            if (errno == EINTR) continue;
            break;
        }
        int yes = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
        std::lock_guard lock(mu_);
        client_fds_.push_back(fd);
        client_threads_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void TcpServer::serve_connection(int fd) {
    while (running_) {
        const auto frame = read_one_frame(fd);
        if (!frame) break;
        const auto msg = wire::decode_frame(*frame);
        if (!msg) break;  // malformed input: drop the connection
        const auto response = endpoint_->handle(*msg);
        if (!response) continue;  // deliberate silence or one-way message
        const Bytes out = wire::frame(*response);
        if (!write_all(fd, out.data(), out.size())) break;
    }
    ::shutdown(fd, SHUT_RDWR);
}

void TcpServer::stop() {
    if (!running_.exchange(false)) {
        if (accept_thread_.joinable()) accept_thread_.join();
        return;
    }
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    {
        std::lock_guard lock(mu_);
        for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mu_);
        threads.swap(client_threads_);
    }
    for (auto& t : threads)
        if (t.joinable()) t.join();
    {
        std::lock_guard lock(mu_);
        for (int fd : client_fds_) ::close(fd);
        client_fds_.clear();
    }
}

// ---------------------------------------------------------------------------
// TcpChannel
// ---------------------------------------------------------------------------

TcpChannel::TcpChannel(const std::string& host, uint16_t port, const LinkConfig& link,
                       Meter& meter, Transcript* transcript)
    : link_(link), meter_(meter), transcript_(transcript) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) return;
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1 ||
        ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        close_now();
        return;
    }
    int yes = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(link_.timeout_us / 1'000'000);
    tv.tv_usec = static_cast<suseconds_t>(link_.timeout_us % 1'000'000);
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

TcpChannel::~TcpChannel() { close_now(); }

void TcpChannel::close_now() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

bool TcpChannel::write_frame(const Bytes& frame) {
    if (fd_ < 0) return false;
    if (!write_all(fd_, frame.data(), frame.size())) {
        close_now();
        return false;
    }
    meter_.bytes_up += frame.size();
    meter_.messages_up += 1;
    if (transcript_) transcript_->push_back({true, frame});
    return true;
}

std::optional<Bytes> TcpChannel::read_frame() {
    if (fd_ < 0) return std::nullopt;
    auto frame = read_one_frame(fd_);
    if (!frame) {
        close_now();
        return std::nullopt;
    }
    meter_.bytes_down += frame->size();
    meter_.messages_down += 1;
    if (transcript_) transcript_->push_back({false, *frame});
    return frame;
}

std::optional<wire::Message> TcpChannel::request(const wire::Message& msg) {
    meter_.requests += 1;
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<wire::Message> out;
    if (write_frame(wire::frame(msg))) {
        if (const auto frame = read_frame()) out = wire::decode_frame(*frame);
    }
    const auto t1 = std::chrono::steady_clock::now();
    meter_.clock_us +=
        std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
    return out;
}

void TcpChannel::send_oneway(const wire::Message& msg) { write_frame(wire::frame(msg)); }

}  // namespace popos::transport
