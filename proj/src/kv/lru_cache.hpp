#pragma once

#include <cstdint>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "kv/kv_shard.hpp"

namespace cascade {

// Byte-budgeted LRU over versioned objects, keyed by full key. Nodes use it
// to retain objects a computation fetched from another shard.
class LruCache {
  public:
    explicit LruCache(uint64_t capacity_bytes) : capacity_(capacity_bytes) {}

    void insert(VersionedObject obj) {
        uint64_t size = obj.payload ? obj.payload->size() : 0;
        std::lock_guard lk(mu_);
        if (size > capacity_) return;  // can never fit
        auto it = index_.find(obj.key);
        if (it != index_.end()) {
            used_ -= entry_size(*it->second);
            order_.erase(it->second);
            index_.erase(it);
        }
        while (used_ + size > capacity_ && !order_.empty()) {
            auto& victim = order_.back();
            used_ -= entry_size(victim);
            index_.erase(victim.key);
            order_.pop_back();
        }
        order_.push_front(std::move(obj));
        index_[order_.front().key] = order_.begin();
        used_ += size;
    }

    std::optional<VersionedObject> lookup(const std::string& key) {
        std::lock_guard lk(mu_);
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        order_.splice(order_.begin(), order_, it->second);  // refresh recency
        return *it->second;
    }

    uint64_t used_bytes() const {
        std::lock_guard lk(mu_);
        return used_;
    }
    size_t count() const {
        std::lock_guard lk(mu_);
        return order_.size();
    }
    uint64_t capacity_bytes() const { return capacity_; }

  private:
    static uint64_t entry_size(const VersionedObject& obj) {
        return obj.payload ? obj.payload->size() : 0;
    }

    const uint64_t capacity_;
    mutable std::mutex mu_;
    std::list<VersionedObject> order_;  // front = most recent
    std::unordered_map<std::string, std::list<VersionedObject>::iterator> index_;
    uint64_t used_ = 0;
};

}  // namespace cascade
