#include "net/conn.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "core/clock.hpp"
#include "core/debug.hpp"

namespace cascade {

std::atomic<uint64_t> Conn::next_id_{1};

namespace {

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

bool read_exact(int fd, uint8_t* buf, size_t len) {
    size_t done = 0;
    while (done < len) {
        ssize_t n = ::recv(fd, buf + done, len - done, 0);
        if (n == 0) return false;
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        done += static_cast<size_t>(n);
    }
    return true;
}

}  // namespace

Conn::Conn(int fd, std::string peer_desc)
    : fd_(fd), peer_(std::move(peer_desc)), id_(next_id_.fetch_add(1)) {}

std::shared_ptr<Conn> Conn::adopt(int fd, std::string peer_desc) {
    set_nodelay(fd);
    return std::shared_ptr<Conn>(new Conn(fd, std::move(peer_desc)));
}

Result<std::shared_ptr<Conn>> Conn::dial(const std::string& host, uint16_t port,
                                         uint64_t timeout_ms) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) return Status::error(Code::NodeUnreachable, "socket() failed");

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        return Status::error(Code::ConfigError, "bad address " + host);
    }

    // Non-blocking connect with a deadline, then back to blocking mode.
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (rc != 0 && errno != EINPROGRESS) {
        ::close(fd);
        return Status::error(Code::NodeUnreachable,
                             host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    if (rc != 0) {
        pollfd pfd{fd, POLLOUT, 0};
        rc = ::poll(&pfd, 1, static_cast<int>(timeout_ms));
        int err = 0;
        socklen_t len = sizeof err;
        if (rc <= 0 || ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0) {
            ::close(fd);
            return Status::error(Code::NodeUnreachable,
                                 "connect to " + host + ":" + std::to_string(port) +
                                     (rc <= 0 ? " timed out" : std::string(": ") + std::strerror(err)));
        }
    }
    ::fcntl(fd, F_SETFL, flags);
    set_nodelay(fd);
    return std::shared_ptr<Conn>(new Conn(fd, host + ":" + std::to_string(port)));
}

Conn::~Conn() {
    close();
    if (reader_.joinable()) {
        if (reader_.get_id() == std::this_thread::get_id())
            reader_.detach();  // last ref dropped by the reader itself
        else
            reader_.join();
    }
    if (async_sender_.joinable()) {
        if (async_sender_.get_id() == std::this_thread::get_id())
            async_sender_.detach();
        else
            async_sender_.join();
    }
    if (fd_ >= 0) ::close(fd_);
}

void Conn::start(FrameHandler on_frame, CloseHandler on_close) {
    on_frame_ = std::move(on_frame);
    on_close_ = std::move(on_close);
    reader_ = std::thread([self = shared_from_this()] { self->reader_loop(); });
}

void Conn::reader_loop() {
    std::vector<uint8_t> body;
    for (;;) {
        uint8_t lenbuf[4];
        if (!read_exact(fd_, lenbuf, 4)) break;
        uint32_t len = static_cast<uint32_t>(lenbuf[0]) | static_cast<uint32_t>(lenbuf[1]) << 8 |
                       static_cast<uint32_t>(lenbuf[2]) << 16 |
                       static_cast<uint32_t>(lenbuf[3]) << 24;
        if (len == 0 || len > kMaxFrameBytes) {
            CASC_WARN("net", "bad frame length %u from %s", len, peer_.c_str());
            break;
        }
        body.resize(len);
        if (!read_exact(fd_, body.data(), len)) break;
        uint64_t recv_ns = mono_ns();
        uint8_t type = body[0];
        WireReader reader(body.data() + 1, len - 1);
        if (on_frame_) on_frame_(*this, type, reader, recv_ns);
    }
    alive_.store(false, std::memory_order_release);
    if (async_queue_) async_queue_->close();
    if (on_close_) on_close_(*this);
}

bool Conn::write_all(const ::iovec* iov, int iovcnt, size_t total) {
    std::lock_guard lk(write_mu_);
    if (!alive_.load(std::memory_order_acquire)) return false;

    // writev with manual advance over partial writes.
    std::vector<::iovec> vec(iov, iov + iovcnt);
    size_t done = 0;
    size_t idx = 0;
    while (done < total) {
        ssize_t n = ::writev(fd_, vec.data() + idx, static_cast<int>(vec.size() - idx));
        if (n < 0) {
            if (errno == EINTR) continue;
            alive_.store(false, std::memory_order_release);
            return false;
        }
        done += static_cast<size_t>(n);
        size_t left = static_cast<size_t>(n);
        while (left > 0 && idx < vec.size()) {
            if (left >= vec[idx].iov_len) {
                left -= vec[idx].iov_len;
                ++idx;
            } else {
                vec[idx].iov_base = static_cast<uint8_t*>(vec[idx].iov_base) + left;
                vec[idx].iov_len -= left;
                left = 0;
            }
        }
    }
    return true;
}

bool Conn::send(uint8_t type, const Bytes& head) { return send(type, head, nullptr, 0); }

bool Conn::send(uint8_t type, const Bytes& head, const uint8_t* payload, size_t payload_len) {
    uint32_t len = static_cast<uint32_t>(1 + head.size() + payload_len);
    uint8_t hdr[5] = {static_cast<uint8_t>(len), static_cast<uint8_t>(len >> 8),
                      static_cast<uint8_t>(len >> 16), static_cast<uint8_t>(len >> 24), type};
    ::iovec iov[3];
    int iovcnt = 0;
    iov[iovcnt++] = {hdr, sizeof hdr};
    if (!head.empty()) iov[iovcnt++] = {const_cast<uint8_t*>(head.data()), head.size()};
    if (payload_len > 0) iov[iovcnt++] = {const_cast<uint8_t*>(payload), payload_len};
    return write_all(iov, iovcnt, sizeof hdr + head.size() + payload_len);
}

void Conn::enable_async_send(size_t queue_capacity) {
    if (async_queue_) return;
    async_queue_ = std::make_unique<BoundedQueue<AsyncItem>>(queue_capacity);
    async_sender_ = std::thread([self = shared_from_this()] {
        while (auto item = self->async_queue_->pop()) {
            const uint8_t* data = item->payload ? item->payload->data() : nullptr;
            size_t len = item->payload ? item->payload->size() : 0;
            if (!self->send(item->type, item->head, data, len)) break;
        }
    });
}

bool Conn::try_send_async(uint8_t type, Bytes head, PayloadPtr payload) {
    if (!async_queue_ || !alive()) return false;
    return async_queue_->try_push({type, std::move(head), std::move(payload)});
}

void Conn::close() {
    bool expected = false;
    if (!closed_.compare_exchange_strong(expected, true)) return;
    alive_.store(false, std::memory_order_release);
    if (async_queue_) async_queue_->close();
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Conn::join() {
    if (reader_.joinable() && reader_.get_id() != std::this_thread::get_id()) reader_.join();
    if (async_sender_.joinable() && async_sender_.get_id() != std::this_thread::get_id())
        async_sender_.join();
}

Result<std::unique_ptr<Server>> Server::listen(const std::string& host, uint16_t port,
                                               AcceptHandler on_accept) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) return Status::error(Code::ConfigError, "socket() failed");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        return Status::error(Code::ConfigError, "bad listen address " + host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        return Status::error(Code::ConfigError, "bind " + host + ":" + std::to_string(port) +
                                                    " failed: " + std::strerror(errno));
    }
    if (::listen(fd, 128) != 0) {
        ::close(fd);
        return Status::error(Code::ConfigError, "listen failed");
    }

    sockaddr_in bound{};
    socklen_t blen = sizeof bound;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &blen);

    auto server = std::unique_ptr<Server>(new Server());
    server->listen_fd_ = fd;
    server->port_ = ntohs(bound.sin_port);
    server->on_accept_ = std::move(on_accept);
    server->accept_thread_ = std::thread([s = server.get()] {
        for (;;) {
            sockaddr_in peer{};
            socklen_t plen = sizeof peer;
            int cfd = ::accept4(s->listen_fd_, reinterpret_cast<sockaddr*>(&peer), &plen,
                                SOCK_CLOEXEC);
            if (cfd < 0) {
                if (errno == EINTR && !s->stopping_.load()) continue;
                break;
            }
            char ip[INET_ADDRSTRLEN] = {0};
            ::inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof ip);
            s->on_accept_(Conn::adopt(cfd, std::string(ip) + ":" + std::to_string(ntohs(peer.sin_port))));
        }
    });
    return server;
}

Server::~Server() { stop(); }

void Server::stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) return;
    if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
    if (accept_thread_.joinable()) accept_thread_.join();
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
}

}  // namespace cascade
