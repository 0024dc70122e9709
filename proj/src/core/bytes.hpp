#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

namespace cascade {

using Bytes = std::vector<uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(reinterpret_cast<const uint8_t*>(s.data()),
                 reinterpret_cast<const uint8_t*>(s.data()) + s.size());
}

// Counted payload buffer. Dispatch hands shared pointers to one of these to
// every matching lambda; the allocation counter backs the copy-discipline
// probes in the tests.
class PayloadBuffer {
  public:
    explicit PayloadBuffer(Bytes data) : data_(std::move(data)) { allocations_.fetch_add(1); }

    const Bytes& bytes() const { return data_; }
    const uint8_t* data() const { return data_.data(); }
    size_t size() const { return data_.size(); }

    static uint64_t total_allocations() { return allocations_.load(); }

  private:
    static inline std::atomic<uint64_t> allocations_{0};
    Bytes data_;
};

using PayloadPtr = std::shared_ptr<const PayloadBuffer>;

inline PayloadPtr make_payload(Bytes data) {
    return std::make_shared<const PayloadBuffer>(std::move(data));
}

}  // namespace cascade
