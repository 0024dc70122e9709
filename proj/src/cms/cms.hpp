#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "core/keys.hpp"
#include "dfg/runtime.hpp"
#include "net/conn.hpp"

namespace cascade {

inline constexpr const char* kCmsTopicPool = "/cms/topics";
inline constexpr const char* kCmsLambdaId = "cms_notify";

// Which client connections want notifications for which topic, on this node.
// Subscriptions register on every member of the topic's home shard; only the
// designated member's lambda pushes.
class SubscriptionTable {
  public:
    void add(const std::string& topic, std::shared_ptr<Conn> conn, size_t send_queue_capacity) {
        conn->enable_async_send(send_queue_capacity);
        std::lock_guard lk(mu_);
        auto& subs = topics_[topic];
        for (const auto& existing : subs)
            if (existing->id() == conn->id()) return;
        subs.push_back(std::move(conn));
    }

    void remove_conn(uint64_t conn_id) {
        std::lock_guard lk(mu_);
        for (auto& [topic, subs] : topics_)
            std::erase_if(subs, [&](const auto& c) { return c->id() == conn_id; });
    }

    std::vector<std::shared_ptr<Conn>> subscribers(const std::string& topic) const {
        std::lock_guard lk(mu_);
        auto it = topics_.find(topic);
        return it == topics_.end() ? std::vector<std::shared_ptr<Conn>>{} : it->second;
    }

    size_t count(const std::string& topic) const {
        std::lock_guard lk(mu_);
        auto it = topics_.find(topic);
        return it == topics_.end() ? 0 : it->second.size();
    }

  private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<std::shared_ptr<Conn>>> topics_;
};

// The CMS vertex body: no computation, just a notification push (object data
// included) to every subscriber of the topic. Runs under fifo_by_key, so one
// topic is always served by one worker, in publish order.
UserLambda make_cms_notify_lambda(SubscriptionTable* table);

// "T" from "/cms/topics/T"; empty when the key is not a topic key.
std::string topic_of_key(const std::string& full_key);

// Topics are single path components.
Status validate_topic(const std::string& topic);

}  // namespace cascade
