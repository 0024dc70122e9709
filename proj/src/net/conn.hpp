#pragma once

#include <sys/uio.h>

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "core/bounded_queue.hpp"
#include "core/bytes.hpp"
#include "core/status.hpp"
#include "net/frames.hpp"

namespace cascade {

// One framed TCP connection. A dedicated reader thread parses frames and
// hands them to the frame handler; writes are synchronized and blocking
// (kernel backpressure is the flow control). An optional async sender with a
// bounded queue serves the notification push path, where a slow peer must
// not block the caller.
class Conn : public std::enable_shared_from_this<Conn> {
  public:
    // recv_ns: monotonic timestamp taken right after the frame was fully read.
    using FrameHandler = std::function<void(Conn&, uint8_t type, WireReader&, uint64_t recv_ns)>;
    using CloseHandler = std::function<void(Conn&)>;

    static std::shared_ptr<Conn> adopt(int fd, std::string peer_desc);
    static Result<std::shared_ptr<Conn>> dial(const std::string& host, uint16_t port,
                                              uint64_t timeout_ms);

    ~Conn();
    Conn(const Conn&) = delete;
    Conn& operator=(const Conn&) = delete;

    // Starts the reader thread. The close handler runs exactly once, on the
    // reader thread, after the peer hangs up or close() is called.
    void start(FrameHandler on_frame, CloseHandler on_close);

    bool send(uint8_t type, const Bytes& head);
    bool send(uint8_t type, const Bytes& head, const uint8_t* payload, size_t payload_len);

    // Bounded non-blocking sends on a lazily started sender thread. Returns
    // false when the queue is full or the connection is down.
    void enable_async_send(size_t queue_capacity);
    bool try_send_async(uint8_t type, Bytes head, PayloadPtr payload);

    // Shuts the socket down; the reader thread then winds down and fires the
    // close handler. Safe to call from any thread, repeatedly.
    void close();
    bool alive() const { return alive_.load(std::memory_order_acquire); }

    // Joins the reader/sender threads. Must not be called from the reader
    // thread; owners call it (or the destructor does) after close.
    void join();

    const std::string& peer() const { return peer_; }
    uint64_t id() const { return id_; }

  private:
    Conn(int fd, std::string peer_desc);

    void reader_loop();
    bool write_all(const ::iovec* iov, int iovcnt, size_t total);

    struct AsyncItem {
        uint8_t type;
        Bytes head;
        PayloadPtr payload;
    };

    int fd_;
    std::string peer_;
    uint64_t id_;
    std::atomic<bool> alive_{true};
    std::atomic<bool> closed_{false};

    FrameHandler on_frame_;
    CloseHandler on_close_;
    std::thread reader_;

    std::mutex write_mu_;

    std::unique_ptr<BoundedQueue<AsyncItem>> async_queue_;
    std::thread async_sender_;

    static std::atomic<uint64_t> next_id_;
};

// Accept loop on one listening socket.
class Server {
  public:
    using AcceptHandler = std::function<void(std::shared_ptr<Conn>)>;

    static Result<std::unique_ptr<Server>> listen(const std::string& host, uint16_t port,
                                                  AcceptHandler on_accept);
    ~Server();

    uint16_t port() const { return port_; }
    void stop();

  private:
    Server() = default;

    int listen_fd_ = -1;
    uint16_t port_ = 0;
    std::thread accept_thread_;
    std::atomic<bool> stopping_{false};
    AcceptHandler on_accept_;
};

}  // namespace cascade
