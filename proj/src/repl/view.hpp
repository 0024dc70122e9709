#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "service/config.hpp"

namespace cascade {

// Immutable membership snapshot. Nodes agree on shard member lists per
// view_id; fail-stop removal bumps the view.
class MembershipView {
  public:
    uint64_t view_id = 0;
    std::vector<ServiceConfig::Peer> nodes;
    // pool path -> per shard, ordered member ids (dead members removed)
    std::map<std::string, std::vector<std::vector<uint32_t>>> shards;

    static std::shared_ptr<const MembershipView> initial(const ServiceConfig& cfg) {
        auto v = std::make_shared<MembershipView>();
        v->view_id = 1;
        v->nodes = cfg.peers;
        for (const auto& pool : cfg.pools) v->shards[pool.desc.path] = pool.shards;
        return v;
    }

    const std::vector<uint32_t>* members_of(const std::string& pool, uint32_t shard) const {
        auto it = shards.find(pool);
        if (it == shards.end() || shard >= it->second.size()) return nullptr;
        return &it->second[shard];
    }

    // The shard member with the lowest id assigns the total order.
    std::optional<uint32_t> sequencer_of(const std::string& pool, uint32_t shard) const {
        const auto* members = members_of(pool, shard);
        if (members == nullptr || members->empty()) return std::nullopt;
        return *std::min_element(members->begin(), members->end());
    }

    bool has_node(uint32_t id) const {
        for (const auto& n : nodes)
            if (n.id == id) return true;
        return false;
    }

    std::shared_ptr<const MembershipView> without(uint32_t dead) const {
        auto v = std::make_shared<MembershipView>(*this);
        v->view_id = view_id + 1;
        v->nodes.erase(std::remove_if(v->nodes.begin(), v->nodes.end(),
                                      [dead](const auto& n) { return n.id == dead; }),
                       v->nodes.end());
        for (auto& [pool, shard_lists] : v->shards)
            for (auto& members : shard_lists)
                members.erase(std::remove(members.begin(), members.end(), dead), members.end());
        return v;
    }
};

// Current view, replaceable atomically.
class ViewTracker {
  public:
    explicit ViewTracker(std::shared_ptr<const MembershipView> initial)
        : view_(std::move(initial)) {}

    std::shared_ptr<const MembershipView> get() const {
        std::lock_guard lk(mu_);
        return view_;
    }

    // Removes a failed node; no-op if already gone.
    std::shared_ptr<const MembershipView> remove_node(uint32_t dead) {
        std::lock_guard lk(mu_);
        if (view_->has_node(dead)) view_ = view_->without(dead);
        return view_;
    }

  private:
    mutable std::mutex mu_;
    std::shared_ptr<const MembershipView> view_;
};

}  // namespace cascade
