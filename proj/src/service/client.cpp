#include "service/client.hpp"

#include <future>

#include "core/clock.hpp"
#include "core/debug.hpp"
#include "cms/cms.hpp"

namespace cascade {

Client::Client(ServiceConfig cfg, PoolRegistry registry)
    : cfg_(std::move(cfg)), registry_(std::move(registry)) {}

Result<std::unique_ptr<Client>> Client::create(ServiceConfig cfg) {
    Status st = cfg.validate();
    if (!st.ok()) return st;
    auto registry = cfg.registry();
    if (!registry.ok()) return registry.status();
    return std::unique_ptr<Client>(new Client(std::move(cfg), registry.take()));
}

Client::~Client() { close(); }

void Client::close() {
    std::map<uint32_t, std::unique_ptr<NodeConn>> conns;
    std::vector<std::shared_ptr<Conn>> zombies;
    {
        std::lock_guard lk(conns_mu_);
        if (closed_) return;
        closed_ = true;
        conns.swap(conns_);
        zombies.swap(zombies_);
    }
    for (auto& [id, nc] : conns) {
        nc->conn->close();
        nc->conn->join();
        fail_pending(*nc, Code::ConnectionClosed);
    }
    for (auto& z : zombies) z->join();
}

void Client::fail_pending(NodeConn& nc, Code code) {
    std::unordered_map<uint64_t, PendingReq> pending;
    {
        std::lock_guard lk(nc.mu);
        pending.swap(nc.pending);
    }
    for (auto& [corr, req] : pending)
        req.done(Status::error(code, "connection to node lost"), {});
}

Result<Client::NodeConn*> Client::conn_to(uint32_t node_id) {
    {
        std::lock_guard lk(conns_mu_);
        if (closed_) return Status::error(Code::ConnectionClosed, "client closed");
        auto it = conns_.find(node_id);
        if (it != conns_.end() && it->second->conn->alive()) return it->second.get();
        if (dead_nodes_.count(node_id))
            return Status::error(Code::NodeUnreachable, "node " + std::to_string(node_id) +
                                                            " marked dead");
    }

    const ServiceConfig::Peer* peer = cfg_.peer(node_id);
    if (peer == nullptr)
        return Status::error(Code::ConfigError, "unknown node " + std::to_string(node_id));
    auto dialed = Conn::dial(peer->host, peer->port, 2000);
    if (!dialed.ok()) {
        std::lock_guard lk(conns_mu_);
        dead_nodes_.insert(node_id);
        return Status::error(Code::NodeUnreachable, dialed.status().message);
    }

    auto nc = std::make_unique<NodeConn>();
    nc->conn = dialed.value();
    NodeConn* out;
    {
        std::lock_guard lk(conns_mu_);
        if (closed_) {
            dialed.value()->close();
            dialed.value()->join();
            return Status::error(Code::ConnectionClosed, "client closed");
        }
        auto& slot = conns_[node_id];
        if (slot && slot->conn->alive()) {  // lost a race; use the winner
            dialed.value()->close();
            zombies_.push_back(dialed.value());
            return slot.get();
        }
        if (slot) zombies_.push_back(slot->conn);
        slot = std::move(nc);
        out = slot.get();
    }
    out->conn->start(
        [this, node_id](Conn& c, uint8_t type, WireReader& r, uint64_t recv_ns) {
            on_frame(node_id, c, type, r, recv_ns);
        },
        [this, node_id](Conn& c) { on_close(node_id, c); });
    return out;
}

void Client::on_close(uint32_t node_id, Conn&) {
    NodeConn* nc = nullptr;
    {
        std::lock_guard lk(conns_mu_);
        if (closed_) return;
        auto it = conns_.find(node_id);
        if (it != conns_.end()) nc = it->second.get();
        dead_nodes_.insert(node_id);
    }
    if (nc) fail_pending(*nc, Code::ConnectionClosed);
}

void Client::on_frame(uint32_t node_id, Conn&, uint8_t type, WireReader& r, uint64_t) {
    if (type == kResp) {
        auto resp = decode_resp(r);
        if (!resp.ok()) {
            CASC_WARN("client", "bad RESP frame from node %u", node_id);
            return;
        }
        Bytes payload = r.tail();
        std::function<void(Result<RespMsg>, Bytes)> done;
        {
            std::lock_guard lk(conns_mu_);
            auto it = conns_.find(node_id);
            if (it == conns_.end()) return;
            std::lock_guard lk2(it->second->mu);
            auto pit = it->second->pending.find(resp->corr);
            if (pit == it->second->pending.end()) return;
            done = std::move(pit->second.done);
            it->second->pending.erase(pit);
        }
        done(resp.take(), std::move(payload));
        return;
    }
    if (type == kNotify) {
        auto notify = decode_notify(r);
        if (!notify.ok()) return;
        NotifyEvent ev;
        ev.topic = notify->topic;
        ev.seq = notify->topic_seq;
        ev.shard_seq = notify->shard_seq;
        ev.timestamp_us = notify->timestamp_us;
        ev.payload = r.tail();

        NotifyFn fn;
        {
            std::lock_guard lk(subs_mu_);
            auto it = subs_.find(ev.topic);
            if (it == subs_.end()) return;
            auto& sub = it->second;
            if (sub.seq_seen && ev.seq != sub.next_seq) {
                notify_gaps_.fetch_add(1);
                CASC_WARN("client", "notification gap on topic %s: expected %llu got %llu",
                          ev.topic.c_str(), static_cast<unsigned long long>(sub.next_seq),
                          static_cast<unsigned long long>(ev.seq));
            }
            sub.seq_seen = true;
            sub.next_seq = ev.seq + 1;
            fn = sub.fn;
        }
        if (fn) fn(ev);
        return;
    }
    CASC_WARN("client", "unexpected frame type 0x%02x from node %u", type, node_id);
}

Result<Client::Route> Client::route(const std::string& key) const {
    auto parsed = registry_.parse_key(key);
    if (!parsed.ok()) return parsed.status();
    Route r;
    r.key = parsed.take();
    r.pool = cfg_.pool(r.key.pool_path);
    if (r.pool == nullptr) return Status::error(Code::NoSuchPool, r.key.pool_path);
    r.shard = map_key_to_shard(r.key, r.pool->desc);
    r.members = &r.pool->shards[r.shard];
    if (r.members->empty())
        return Status::error(Code::ShardUnavailable, "shard has no members");
    return r;
}

Result<uint32_t> Client::pick_random_member(const Route& r) {
    std::vector<uint32_t> alive;
    {
        std::lock_guard lk(conns_mu_);
        for (uint32_t id : *r.members)
            if (dead_nodes_.count(id) == 0) alive.push_back(id);
    }
    if (alive.empty())
        return Status::error(Code::ShardUnavailable, "no live members for " + r.key.pool_path +
                                                         " shard " + std::to_string(r.shard));
    std::lock_guard lk(rng_mu_);
    return alive[rng_() % alive.size()];
}

Result<uint32_t> Client::sequencer_of_key(const std::string& key) const {
    auto r = route(key);
    if (!r.ok()) return r.status();
    return *std::min_element(r->members->begin(), r->members->end());
}

Result<uint32_t> Client::route_get(const std::string& key) {
    auto r = route(key);
    if (!r.ok()) return r.status();
    return pick_random_member(*r);
}

Client::WindowGate& Client::window_for(const std::string& pool, uint32_t shard) {
    std::lock_guard lk(windows_mu_);
    auto& gate = windows_[{pool, shard}];
    if (!gate) {
        gate = std::make_unique<WindowGate>();
        gate->available = cfg_.window == 0 ? 1 : cfg_.window;
    }
    return *gate;
}

Result<RespMsg> Client::call(uint32_t node_id, uint8_t type,
                             const std::function<Bytes(uint64_t corr)>& make_head,
                             const PayloadPtr& payload, uint64_t timeout_ms, Bytes* payload_out,
                             uint64_t* e2e_ns) {
    auto nc = conn_to(node_id);
    if (!nc.ok()) return nc.status();

    auto promise = std::make_shared<std::promise<std::pair<Result<RespMsg>, Bytes>>>();
    auto future = promise->get_future();
    uint64_t corr;
    {
        std::lock_guard lk(nc.value()->mu);
        corr = nc.value()->next_corr++;
        nc.value()->pending.emplace(corr, PendingReq{[promise](Result<RespMsg> resp, Bytes body) {
                                        promise->set_value({std::move(resp), std::move(body)});
                                    }});
    }

    uint64_t t0 = mono_ns();
    Bytes head = make_head(corr);
    bool sent = payload ? nc.value()->conn->send(type, head, payload->data(), payload->size())
                        : nc.value()->conn->send(type, head);
    if (!sent) {
        std::lock_guard lk(nc.value()->mu);
        nc.value()->pending.erase(corr);
        return Status::error(Code::ConnectionClosed, "send failed");
    }

    if (future.wait_for(std::chrono::milliseconds(timeout_ms)) != std::future_status::ready) {
        std::lock_guard lk(nc.value()->mu);
        nc.value()->pending.erase(corr);
        return Status::error(Code::Timeout, "no response within " + std::to_string(timeout_ms) + "ms");
    }
    auto [resp, body] = future.get();
    if (e2e_ns != nullptr) *e2e_ns = mono_ns() - t0;
    if (!resp.ok()) return resp.status();
    if (resp->code != static_cast<uint16_t>(Code::Ok))
        return Status::error(static_cast<Code>(resp->code), resp->message);
    if (payload_out != nullptr) *payload_out = std::move(body);
    return resp;
}

void Client::put_async(const std::string& key, PayloadPtr payload, PutKind kind,
                       PutCallback done) {
    auto r = route(key);
    if (!r.ok()) {
        done(r.status());
        return;
    }
    if (kind == PutKind::PoolDefault)
        kind = r->pool->desc.persistence == Persistence::Persistent ? PutKind::Persistent
                                                                    : PutKind::Volatile;
    if (kind == PutKind::Persistent && r->pool->desc.persistence != Persistence::Persistent) {
        done(Status::error(Code::NotPersistentPool,
                           r->key.pool_path + " cannot serve persistent puts"));
        return;
    }

    uint32_t seq_node = *std::min_element(r->members->begin(), r->members->end());
    auto nc = conn_to(seq_node);
    if (!nc.ok()) {
        done(Status::error(Code::ShardUnavailable, nc.status().message));
        return;
    }

    // Sender-side window: at most cfg_.window puts in flight per shard.
    WindowGate& gate = window_for(r->key.pool_path, r->shard);
    {
        std::unique_lock lk(gate.mu);
        gate.cv.wait(lk, [&] { return gate.available > 0; });
        --gate.available;
    }
    auto release = [&gate] {
        std::lock_guard lk(gate.mu);
        ++gate.available;
        gate.cv.notify_one();
    };

    uint64_t corr;
    uint64_t t0 = mono_ns();
    {
        std::lock_guard lk(nc.value()->mu);
        corr = nc.value()->next_corr++;
        nc.value()->pending.emplace(
            corr, PendingReq{[done = std::move(done), release, t0](Result<RespMsg> resp, Bytes) {
                release();
                if (!resp.ok()) {
                    done(resp.status());
                    return;
                }
                if (resp->code != static_cast<uint16_t>(Code::Ok)) {
                    done(Status::error(static_cast<Code>(resp->code), resp->message));
                    return;
                }
                PutResult out;
                out.version = {resp->per_key_version, resp->shard_seq, resp->timestamp_us};
                out.timing = resp->timing;
                out.e2e_ns = mono_ns() - t0;
                done(out);
            }});
    }

    PutReqMsg msg;
    msg.corr = corr;
    msg.kind = kind;
    msg.key = key;
    if (!nc.value()->conn->send(kReqPut, encode_put_req_head(msg), payload->data(),
                                payload->size())) {
        std::function<void(Result<RespMsg>, Bytes)> cb;
        {
            std::lock_guard lk(nc.value()->mu);
            auto it = nc.value()->pending.find(corr);
            if (it != nc.value()->pending.end()) {
                cb = std::move(it->second.done);
                nc.value()->pending.erase(it);
            }
        }
        if (cb) cb(Status::error(Code::ConnectionClosed, "send failed"), {});
    }
}

Result<PutResult> Client::put(const std::string& key, Bytes payload, PutKind kind) {
    auto promise = std::make_shared<std::promise<Result<PutResult>>>();
    auto future = promise->get_future();
    put_async(key, make_payload(std::move(payload)), kind,
              [promise](Result<PutResult> r) { promise->set_value(std::move(r)); });
    uint64_t timeout_ms = cfg_.commit_timeout_ms + 5000;
    if (future.wait_for(std::chrono::milliseconds(timeout_ms)) != std::future_status::ready)
        return Status::error(Code::Timeout, "put did not complete");
    return future.get();
}

Result<TrigResult> Client::trigger_put(const std::string& key, Bytes payload) {
    auto r = route(key);
    if (!r.ok()) return r.status();
    auto member = pick_random_member(*r);
    if (!member.ok()) return member.status();

    uint64_t e2e = 0;
    PayloadPtr body = make_payload(std::move(payload));
    auto resp = call(
        member.value(), kReqTrigPut,
        [&](uint64_t corr) {
            return encode_key_req_head({corr, key});
        },
        body, 10'000, nullptr, &e2e);
    if (!resp.ok()) {
        if (resp.status().is(Code::NodeUnreachable) || resp.status().is(Code::ConnectionClosed))
            return Status::error(Code::NodeUnreachable, resp.status().message);
        return resp.status();
    }
    return TrigResult{resp->timing.resident_ns, e2e};
}

void Client::trigger_put_async(const std::string& key, PayloadPtr payload, TrigCallback done) {
    auto r = route(key);
    if (!r.ok()) {
        done(r.status());
        return;
    }
    auto member = pick_random_member(*r);
    if (!member.ok()) {
        done(member.status());
        return;
    }
    auto nc = conn_to(member.value());
    if (!nc.ok()) {
        done(Status::error(Code::NodeUnreachable, nc.status().message));
        return;
    }

    uint64_t corr;
    uint64_t t0 = mono_ns();
    {
        std::lock_guard lk(nc.value()->mu);
        corr = nc.value()->next_corr++;
        nc.value()->pending.emplace(
            corr, PendingReq{[done = std::move(done), t0](Result<RespMsg> resp, Bytes) {
                if (!resp.ok()) {
                    done(resp.status());
                    return;
                }
                if (resp->code != static_cast<uint16_t>(Code::Ok)) {
                    done(Status::error(static_cast<Code>(resp->code), resp->message));
                    return;
                }
                done(TrigResult{resp->timing.resident_ns, mono_ns() - t0});
            }});
    }
    if (!nc.value()->conn->send(kReqTrigPut, encode_key_req_head({corr, key}), payload->data(),
                                payload->size())) {
        std::function<void(Result<RespMsg>, Bytes)> cb;
        {
            std::lock_guard lk(nc.value()->mu);
            auto it = nc.value()->pending.find(corr);
            if (it != nc.value()->pending.end()) {
                cb = std::move(it->second.done);
                nc.value()->pending.erase(it);
            }
        }
        if (cb) cb(Status::error(Code::NodeUnreachable, "send failed"), {});
    }
}

Result<GetResult> Client::get(const std::string& key) {
    auto r = route(key);
    if (!r.ok()) return r.status();
    auto member = pick_random_member(*r);
    if (!member.ok()) return member.status();

    gets_sent_.fetch_add(1);
    Bytes payload;
    uint64_t e2e = 0;
    auto resp = call(
        member.value(), kReqGet,
        [&](uint64_t corr) {
            return encode_key_req_head({corr, key});
        },
        nullptr, 10'000, &payload, &e2e);
    if (!resp.ok()) return resp.status();
    return GetResult{key,
                     {resp->per_key_version, resp->shard_seq, resp->timestamp_us},
                     std::move(payload),
                     resp->timing.resident_ns,
                     e2e};
}

Result<GetResult> Client::get_by_version(const std::string& key, uint64_t version) {
    auto r = route(key);
    if (!r.ok()) return r.status();
    auto member = pick_random_member(*r);
    if (!member.ok()) return member.status();

    gets_sent_.fetch_add(1);
    Bytes payload;
    uint64_t e2e = 0;
    auto resp = call(
        member.value(), kReqGetVer,
        [&](uint64_t corr) {
            return encode_key_at_req({corr, version, key});
        },
        nullptr, 10'000, &payload, &e2e);
    if (!resp.ok()) return resp.status();
    return GetResult{key,
                     {resp->per_key_version, resp->shard_seq, resp->timestamp_us},
                     std::move(payload),
                     resp->timing.resident_ns,
                     e2e};
}

Result<GetResult> Client::get_by_time(const std::string& key, uint64_t ts_us) {
    auto r = route(key);
    if (!r.ok()) return r.status();
    auto member = pick_random_member(*r);
    if (!member.ok()) return member.status();

    gets_sent_.fetch_add(1);
    Bytes payload;
    uint64_t e2e = 0;
    auto resp = call(
        member.value(), kReqGetTime,
        [&](uint64_t corr) {
            return encode_key_at_req({corr, ts_us, key});
        },
        nullptr, cfg_.get_by_time_timeout_ms + 5000, &payload, &e2e);
    if (!resp.ok()) return resp.status();
    return GetResult{key,
                     {resp->per_key_version, resp->shard_seq, resp->timestamp_us},
                     std::move(payload),
                     resp->timing.resident_ns,
                     e2e};
}

Result<PutResult> Client::publish(const std::string& topic, Bytes payload, PutKind persistence) {
    Status st = validate_topic(topic);
    if (!st.ok()) return st;
    std::string key = std::string(kCmsTopicPool) + "/" + topic;
    auto seq_node = sequencer_of_key(key);
    if (!seq_node.ok()) return seq_node.status();

    uint64_t e2e = 0;
    PayloadPtr body = make_payload(std::move(payload));
    auto resp = call(
        seq_node.value(), kReqPublish,
        [&](uint64_t corr) {
            return encode_publish_req_head({corr, persistence, topic});
        },
        body, cfg_.commit_timeout_ms + 5000, nullptr, &e2e);
    if (!resp.ok()) return resp.status();
    PutResult out;
    out.version = {resp->per_key_version, resp->shard_seq, resp->timestamp_us};
    out.timing = resp->timing;
    out.e2e_ns = e2e;
    return out;
}

Status Client::subscribe(const std::string& topic, NotifyFn fn) {
    Status st = validate_topic(topic);
    if (!st.ok()) return st;
    std::string key = std::string(kCmsTopicPool) + "/" + topic;
    auto r = route(key);
    if (!r.ok()) return r.status();

    {
        std::lock_guard lk(subs_mu_);
        subs_[topic] = Subscription{std::move(fn), false, 0};
    }

    // Register on every member; only the designated one will push, and that
    // designation can move on membership changes.
    Status last = Status::success();
    size_t reached = 0;
    for (uint32_t member : *r->members) {
        auto resp = call(
            member, kReqSubscribe,
            [&](uint64_t corr) {
                return encode_subscribe_req({corr, topic});
            },
            nullptr, 5000, nullptr, nullptr);
        if (resp.ok())
            ++reached;
        else
            last = resp.status();
    }
    if (reached == 0) {
        std::lock_guard lk(subs_mu_);
        subs_.erase(topic);
        return last.ok() ? Status::error(Code::ShardUnavailable, "no member reachable") : last;
    }
    return Status::success();
}

}  // namespace cascade
