#pragma once

#include <functional>
#include <thread>
#include <vector>

#include "core/bounded_queue.hpp"

namespace cascade {

// Fixed-size pool for request work that may block (temporal gets).
class ThreadPool {
  public:
    explicit ThreadPool(size_t threads, size_t queue_capacity = 1024) : queue_(queue_capacity) {
        for (size_t i = 0; i < threads; ++i)
            threads_.emplace_back([this] {
                while (auto task = queue_.pop()) (*task)();
            });
    }

    ~ThreadPool() { stop(); }

    bool submit(std::function<void()> task) { return queue_.push(std::move(task)); }

    void stop() {
        queue_.close();
        for (auto& t : threads_)
            if (t.joinable()) t.join();
        threads_.clear();
    }

  private:
    BoundedQueue<std::function<void()>> queue_;
    std::vector<std::thread> threads_;
};

}  // namespace cascade
