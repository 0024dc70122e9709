#include "cms/cms.hpp"

#include "core/debug.hpp"

namespace cascade {

std::string topic_of_key(const std::string& full_key) {
    std::string prefix = std::string(kCmsTopicPool) + "/";
    if (full_key.rfind(prefix, 0) != 0) return {};
    std::string rest = full_key.substr(prefix.size());
    if (rest.empty() || rest.find('/') != std::string::npos) return {};
    return rest;
}

Status validate_topic(const std::string& topic) {
    if (topic.empty() || topic.find('/') != std::string::npos || topic == "." || topic == "..")
        return Status::error(Code::MalformedKey, "topic must be a single path component");
    return Status::success();
}

UserLambda make_cms_notify_lambda(SubscriptionTable* table) {
    return [table](LambdaContext&, const UpcallEvent& ev) {
        const auto& obj = *ev.object;
        std::string topic = topic_of_key(obj.key);
        if (topic.empty()) {
            CASC_WARN("cms", "notify lambda matched non-topic key %s", obj.key.c_str());
            return;
        }

        NotifyMsg msg;
        msg.topic = topic;
        msg.topic_seq = obj.version.per_key_version;
        msg.shard_seq = obj.version.shard_seq;
        msg.timestamp_us = obj.version.timestamp_us;
        Bytes head = encode_notify_head(msg);

        for (const auto& conn : table->subscribers(topic)) {
            // Non-blocking: a slow subscriber overflows its bounded buffer
            // and gets disconnected rather than stalling the topic.
            if (!conn->try_send_async(kNotify, head, obj.payload)) {
                CASC_WARN("cms", "dropping slow or dead subscriber %s of topic %s",
                          conn->peer().c_str(), topic.c_str());
                conn->close();
                table->remove_conn(conn->id());
            }
        }
    };
}

}  // namespace cascade
