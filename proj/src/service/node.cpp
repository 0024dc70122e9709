#include "service/node.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "core/clock.hpp"
#include "core/debug.hpp"
#include "core/hash.hpp"

namespace cascade {

namespace {

std::string sanitize_pool_path(const std::string& pool) {
    std::string out = pool;
    for (auto& c : out)
        if (c == '/') c = '_';
    return out;
}

}  // namespace

Node::Node(ServiceConfig cfg) : cfg_(std::move(cfg)) {}

Node::~Node() { stop(); }

Result<std::unique_ptr<Node>> Node::start(ServiceConfig cfg,
                                          std::shared_ptr<LambdaRegistry> user_lambdas) {
    Status st = cfg.validate();
    if (!st.ok()) return st;
    if (cfg.node_id == kNoNodeId)
        return Status::error(Code::ConfigError, "node config needs node_id");

    std::unique_ptr<Node> node(new Node(std::move(cfg)));
    st = node->boot(std::move(user_lambdas));
    if (!st.ok()) {
        node->stop();
        return st;
    }
    return node;
}

Status Node::boot(std::shared_ptr<LambdaRegistry> user_lambdas) {
    auto registry = cfg_.registry();
    if (!registry.ok()) return registry.status();
    registry_ = registry.take();

    // Lambda table: user-supplied plus builtins plus the CMS push lambda.
    lambdas_ = user_lambdas ? std::move(user_lambdas) : std::make_shared<LambdaRegistry>();
    if (lambdas_->find("noop") == nullptr) register_builtin_lambdas(*lambdas_);
    if (lambdas_->find(kCmsLambdaId) == nullptr)
        (void)lambdas_->add(kCmsLambdaId, make_cms_notify_lambda(&subs_));

    view_ = std::make_unique<ViewTracker>(MembershipView::initial(cfg_));
    fastpath_ = std::make_unique<FastPath>(
        FastPath::Options{cfg_.worker_count, cfg_.queue_capacity});
    cache_ = std::make_unique<LruCache>(cfg_.cache_bytes);
    dfg_ = std::make_unique<DfgRuntime>(*this);
    blocking_pool_ = std::make_unique<ThreadPool>(4, 1024);

    Status st = setup_replicas();
    if (!st.ok()) return st;

    st = instantiate_dfg();
    if (!st.ok()) return st;

    auto server = Server::listen(cfg_.peer(cfg_.node_id)->host, cfg_.peer(cfg_.node_id)->port,
                                 [this](std::shared_ptr<Conn> conn) { on_accept(std::move(conn)); });
    if (!server.ok()) return server.status();
    server_ = server.take();

    st = bootstrap_peers();
    if (!st.ok()) return st;

    housekeeper_ = std::thread([this] { housekeeper_loop(); });
    booted_ = true;
    CASC_INFO("node", "node %u up, view %llu", cfg_.node_id,
              static_cast<unsigned long long>(view_id()));
    return Status::success();
}

Status Node::setup_replicas() {
    for (const auto& [pool_path, shard] : cfg_.hosted_shards(cfg_.node_id)) {
        const auto* pool = cfg_.pool(pool_path);
        const auto& members = pool->shards[shard];

        std::string pool_copy = pool_path;
        uint32_t shard_copy = shard;
        ShardReplica::Hooks hooks;
        hooks.send_mcast_ack = [this, pool_copy, shard_copy](const McastAckMsg& ack) {
            auto view = view_->get();
            auto seq_node = view->sequencer_of(pool_copy, shard_copy);
            if (!seq_node) return;
            if (*seq_node == cfg_.node_id) {
                if (auto* s = sequencer(pool_copy, shard_copy)) s->on_mcast_ack(ack);
                return;
            }
            send_to_peer(*seq_node, kMcastAck, encode_mcast_ack(ack), nullptr);
        };
        hooks.send_persist_ack = [this, pool_copy, shard_copy](const PersistAckMsg& ack) {
            auto view = view_->get();
            auto seq_node = view->sequencer_of(pool_copy, shard_copy);
            if (!seq_node) return;
            if (*seq_node == cfg_.node_id) {
                if (auto* s = sequencer(pool_copy, shard_copy)) s->on_persist_ack(ack);
                return;
            }
            send_to_peer(*seq_node, kPersistAck, encode_persist_ack(ack), nullptr);
        };
        hooks.send_gap_req = [this, pool_copy, shard_copy](const GapReqMsg& req) {
            auto view = view_->get();
            auto seq_node = view->sequencer_of(pool_copy, shard_copy);
            if (!seq_node) return;
            if (*seq_node == cfg_.node_id) {
                if (auto* s = sequencer(pool_copy, shard_copy)) s->on_gap_req(req);
                return;
            }
            send_to_peer(*seq_node, kGapReq, encode_gap_req(req), nullptr);
        };
        hooks.dispatch = [this](std::shared_ptr<const DispatchObject> obj) {
            fastpath_->submit(std::move(obj));
        };

        auto replica = std::make_unique<ShardReplica>(pool_path, shard, cfg_.node_id,
                                                      pool->desc.persistence, cfg_.queue_capacity,
                                                      std::move(hooks));
        if (pool->desc.persistence == Persistence::Persistent) {
            std::filesystem::create_directories(cfg_.log_dir);
            LogOptions opts;
            opts.path = cfg_.log_dir + "/" + sanitize_pool_path(pool_path) + "_shard" +
                        std::to_string(shard) + ".log";
            opts.size_budget_bytes = cfg_.log_budget_bytes;
            Status st = replica->init_log(opts);
            if (!st.ok()) return st;
        }
        auto self_pos = std::find(members.begin(), members.end(), cfg_.node_id);
        replica->set_position(static_cast<uint32_t>(self_pos - members.begin()),
                              static_cast<uint32_t>(members.size()));
        replicas_.emplace(std::make_pair(pool_path, shard), std::move(replica));
    }

    // Sequencer role for shards where this node has the lowest id.
    for (const auto& [key, replica] : replicas_) {
        const auto& [pool_path, shard] = key;
        const auto& members = cfg_.pool(pool_path)->shards[shard];
        if (*std::min_element(members.begin(), members.end()) == cfg_.node_id)
            setup_sequencer(pool_path, shard, members);
    }
    return Status::success();
}

void Node::setup_sequencer(const std::string& pool, uint32_t shard,
                           const std::vector<uint32_t>& members) {
    auto* rep = replica(pool, shard);
    ShardSequencer::Hooks hooks;
    hooks.send_mcast = [this](uint32_t member, const Bytes& head, const PayloadPtr& payload) {
        return send_to_peer(member, kMcast, head, payload);
    };
    hooks.deliver_local = [this, pool, shard](McastMsg msg, PayloadPtr payload) {
        if (auto* r = replica(pool, shard)) r->enqueue(std::move(msg), std::move(payload));
    };
    hooks.on_frontier = [this, pool, shard](const StabilityFrontier& f) {
        on_frontier_advance(pool, shard, f);
    };

    auto seq = std::make_unique<ShardSequencer>(
        pool, shard, cfg_.node_id, members, cfg_.pool(pool)->desc.persistence, std::move(hooks),
        rep ? rep->applied_seq() : 0, rep ? rep->last_applied_ts() : 0);
    std::lock_guard lk(seq_mu_);
    sequencers_.emplace(std::make_pair(pool, shard), std::move(seq));
}

Status Node::bootstrap_peers() {
    uint64_t deadline = mono_ns() + cfg_.bootstrap_timeout_ms * 1'000'000;
    for (const auto& peer : cfg_.peers) {
        if (peer.id == cfg_.node_id) continue;
        std::shared_ptr<Conn> conn;
        while (true) {
            auto dialed = Conn::dial(peer.host, peer.port, 250);
            if (dialed.ok()) {
                conn = dialed.take();
                break;
            }
            if (mono_ns() > deadline)
                return Status::error(Code::BootstrapTimeout,
                                     "peer " + std::to_string(peer.id) + " at " + peer.address() +
                                         " unreachable");
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        uint32_t peer_id = peer.id;
        conn->start([](Conn&, uint8_t, WireReader&, uint64_t) { /* outbound: send-only */ },
                    [this, peer_id](Conn&) {
                        // A dead outbound link means we cannot reach the peer;
                        // let the next housekeeping tick declare it failed.
                        if (stopped_.load()) return;
                        std::lock_guard lk(liveness_mu_);
                        last_seen_ns_[peer_id] = 0;
                    });
        std::lock_guard lk(conns_mu_);
        peer_conns_[peer.id] = std::move(conn);
    }

    {
        std::lock_guard lk(liveness_mu_);
        for (const auto& peer : cfg_.peers)
            if (peer.id != cfg_.node_id) last_seen_ns_[peer.id] = mono_ns();
    }

    // Announce ourselves so peers can map inbound connections to node ids.
    HeartbeatMsg hb{cfg_.node_id, {}};
    Bytes head = encode_heartbeat(hb);
    for (const auto& peer : cfg_.peers)
        if (peer.id != cfg_.node_id) send_to_peer(peer.id, kHeartbeat, head, nullptr);
    return Status::success();
}

Status Node::instantiate_dfg() {
    if (cfg_.dfg_path.empty()) return Status::success();
    std::ifstream in(cfg_.dfg_path);
    if (!in) return Status::error(Code::ConfigError, "cannot read DFG file " + cfg_.dfg_path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto dfg = load_dfg(ss.str(), registry_, lambdas_->names());
    if (!dfg.ok()) return dfg.status();
    return dfg_->instantiate(dfg.take(), *lambdas_);
}

ShardReplica* Node::replica(const std::string& pool, uint32_t shard) {
    auto it = replicas_.find({pool, shard});
    return it == replicas_.end() ? nullptr : it->second.get();
}

ShardSequencer* Node::sequencer(const std::string& pool, uint32_t shard) {
    std::lock_guard lk(seq_mu_);
    auto it = sequencers_.find({pool, shard});
    return it == sequencers_.end() ? nullptr : it->second.get();
}

bool Node::send_to_peer(uint32_t peer, uint8_t type, const Bytes& head,
                        const PayloadPtr& payload) {
    std::shared_ptr<Conn> conn;
    {
        std::lock_guard lk(conns_mu_);
        auto it = peer_conns_.find(peer);
        if (it == peer_conns_.end()) return false;
        conn = it->second;
    }
    if (!conn || !conn->alive()) return false;
    return payload ? conn->send(type, head, payload->data(), payload->size())
                   : conn->send(type, head);
}

Client& Node::local_client() {
    std::lock_guard lk(client_mu_);
    if (!embedded_client_) {
        auto client = Client::create(cfg_);
        CASC_ASSERT(client.ok(), "embedded client config invalid");
        embedded_client_ = client.take();
    }
    return *embedded_client_;
}

// ---- StoreApi ----

Result<PutResult> Node::api_put(const std::string& key, PayloadPtr payload, PutKind kind) {
    auto promise = std::make_shared<std::promise<Result<PutResult>>>();
    auto future = promise->get_future();
    local_client().put_async(key, std::move(payload), kind,
                             [promise](Result<PutResult> r) { promise->set_value(std::move(r)); });
    if (future.wait_for(std::chrono::milliseconds(cfg_.commit_timeout_ms + 5000)) !=
        std::future_status::ready)
        return Status::error(Code::Timeout, "put did not complete");
    return future.get();
}

Status Node::api_trigger_put(const std::string& key, PayloadPtr payload) {
    auto parsed = registry_.parse_key(key);
    if (!parsed.ok()) return parsed.status();
    const auto* pool = cfg_.pool(parsed->pool_path);
    if (pool == nullptr) return Status::error(Code::NoSuchPool, parsed->pool_path);
    uint32_t shard = map_key_to_shard(*parsed, pool->desc);

    auto view = view_->get();
    const auto* members = view->members_of(parsed->pool_path, shard);
    if (members == nullptr || members->empty())
        return Status::error(Code::ShardUnavailable, "no members for " + parsed->pool_path);

    static thread_local std::mt19937 rng{std::random_device{}()};
    uint32_t target = (*members)[rng() % members->size()];
    if (target == cfg_.node_id) {
        submit_trigger(key, std::move(payload));
        return Status::success();
    }
    TrigMsg msg{key};
    if (!send_to_peer(target, kTrig, encode_trig_head(msg), payload))
        return Status::error(Code::NodeUnreachable, "member " + std::to_string(target) + " down");
    return Status::success();
}

void Node::submit_trigger(const std::string& key, PayloadPtr payload) {
    auto obj = std::make_shared<DispatchObject>();
    obj->key = key;
    obj->payload = std::move(payload);
    obj->is_trigger = true;
    fastpath_->submit(std::move(obj));
}

Result<GetResult> Node::api_get(const std::string& key, bool allow_cached) {
    auto loc = locate(key);
    if (loc.ok()) {
        if (auto* rep = local_replica_for(loc->first, loc->second)) {
            auto obj = rep->kv().get_current(key);
            if (!obj.ok()) return obj.status();
            return GetResult{key, obj->version, obj->payload->bytes(), 0, 0};
        }
    } else {
        return loc.status();
    }

    if (allow_cached) {
        if (auto hit = cache_->lookup(key))
            return GetResult{key, hit->version, hit->payload->bytes(), 0, 0};
    }
    auto got = local_client().get(key);
    if (got.ok() && allow_cached) {
        VersionedObject obj;
        obj.key = key;
        obj.version = got->version;
        obj.payload = make_payload(got->payload);
        obj.payload_checksum = stable_hash(got->payload.data(), got->payload.size());
        cache_->insert(std::move(obj));
    }
    return got;
}

Result<GetResult> Node::api_get_by_version(const std::string& key, uint64_t version) {
    auto loc = locate(key);
    if (!loc.ok()) return loc.status();
    if (auto* rep = local_replica_for(loc->first, loc->second)) {
        auto obj = rep->kv().get_by_version(key, version);
        if (!obj.ok()) return obj.status();
        return GetResult{key, obj->version, obj->payload->bytes(), 0, 0};
    }
    return local_client().get_by_version(key, version);
}

Result<GetResult> Node::api_get_by_time(const std::string& key, uint64_t ts_us) {
    auto loc = locate(key);
    if (!loc.ok()) return loc.status();
    if (auto* rep = local_replica_for(loc->first, loc->second)) {
        PersistentLog* log = rep->log();
        if (log == nullptr)
            return Status::error(Code::NotPersistentPool,
                                 loc->first + " does not retain history");
        if (!log->wait_frontier_ts(ts_us, cfg_.get_by_time_timeout_ms * 1000))
            return Status::error(Code::Timeout, "stability frontier did not reach t");
        auto version = log->time_to_version(key, ts_us);
        if (!version.ok()) return version.status();
        auto obj = rep->kv().get_by_version(key, version.value());
        if (!obj.ok()) return obj.status();
        return GetResult{key, obj->version, obj->payload->bytes(), 0, 0};
    }
    return local_client().get_by_time(key, ts_us);
}

Status Node::api_register(LambdaRegistration reg, LambdaFn fn) {
    return fastpath_->register_lambda(std::move(reg), std::move(fn));
}

bool Node::api_hosts_pool(const std::string& pool_path) const {
    for (const auto& [key, rep] : replicas_)
        if (key.first == pool_path) return true;
    return false;
}

Result<std::pair<std::string, uint32_t>> Node::locate(const std::string& key) const {
    auto parsed = registry_.parse_key(key);
    if (!parsed.ok()) return parsed.status();
    const auto* pool = cfg_.pool(parsed->pool_path);
    if (pool == nullptr) return Status::error(Code::NoSuchPool, parsed->pool_path);
    return std::make_pair(parsed->pool_path, map_key_to_shard(*parsed, pool->desc));
}

ShardReplica* Node::local_replica_for(const std::string& pool, uint32_t shard) {
    return replica(pool, shard);
}

// ---- frame plumbing ----

void Node::on_accept(std::shared_ptr<Conn> conn) {
    if (stopped_.load()) {
        conn->close();
        return;
    }
    {
        std::lock_guard lk(conns_mu_);
        inbound_[conn->id()] = conn;
    }
    std::weak_ptr<Conn> wp = conn;
    conn->start(
        [this, wp](Conn& c, uint8_t type, WireReader& r, uint64_t recv_ns) {
            on_frame(wp, c, type, r, recv_ns);
        },
        [this](Conn& c) {
            subs_.remove_conn(c.id());
            std::lock_guard lk(conns_mu_);
            auto it = inbound_.find(c.id());
            if (it != inbound_.end()) {
                zombies_.push_back(it->second);
                inbound_.erase(it);
            }
            auto node_it = inbound_node_.find(c.id());
            if (node_it != inbound_node_.end()) {
                uint32_t peer = node_it->second;
                inbound_node_.erase(node_it);
                if (!stopped_.load()) {
                    std::lock_guard lk2(liveness_mu_);
                    last_seen_ns_[peer] = 0;  // lost its link; fail fast
                }
            }
        });
}

void Node::on_frame(const std::weak_ptr<Conn>& wp, Conn& conn, uint8_t type, WireReader& r,
                    uint64_t recv_ns) {
    switch (type) {
    case kMcast: {
        auto msg = decode_mcast(r);
        if (!msg.ok()) return;
        auto* rep = replica(msg->pool, msg->shard);
        if (rep == nullptr) {
            CASC_WARN("node", "mcast for unhosted shard %s/%u", msg->pool.c_str(), msg->shard);
            return;
        }
        PayloadPtr payload = make_payload(r.tail());
        rep->enqueue(msg.take(), std::move(payload));
        return;
    }
    case kMcastAck: {
        auto ack = decode_mcast_ack(r);
        if (!ack.ok()) return;
        note_peer_alive(ack->member);
        if (auto* s = sequencer(ack->pool, ack->shard)) s->on_mcast_ack(*ack);
        return;
    }
    case kPersistAck: {
        auto ack = decode_persist_ack(r);
        if (!ack.ok()) return;
        note_peer_alive(ack->member);
        if (auto* s = sequencer(ack->pool, ack->shard)) s->on_persist_ack(*ack);
        return;
    }
    case kTrig: {
        auto msg = decode_trig(r);
        if (!msg.ok()) return;
        submit_trigger(msg->key, make_payload(r.tail()));
        return;
    }
    case kGapReq: {
        auto req = decode_gap_req(r);
        if (!req.ok()) return;
        note_peer_alive(req->member);
        if (auto* s = sequencer(req->pool, req->shard)) s->on_gap_req(*req);
        return;
    }
    case kHeartbeat: {
        auto hb = decode_heartbeat(r);
        if (!hb.ok()) return;
        note_peer_alive(hb->node);
        {
            std::lock_guard lk(conns_mu_);
            inbound_node_[conn.id()] = hb->node;
        }
        for (const auto& f : hb->frontiers)
            if (auto* rep = replica(f.pool, f.shard))
                if (rep->log() != nullptr) rep->log()->set_frontier(f.stable_seq, f.stable_ts);
        return;
    }
    case kReqPut: {
        auto req = decode_put_req(r);
        if (!req.ok()) return;
        handle_put_like(wp, req->corr, req->key, req->kind, make_payload(r.tail()), recv_ns);
        return;
    }
    case kReqPublish: {
        auto req = decode_publish_req(r);
        if (!req.ok()) return;
        Status st = validate_topic(req->topic);
        if (!st.ok()) {
            respond_error(wp, req->corr, st, recv_ns);
            return;
        }
        std::string key = std::string(kCmsTopicPool) + "/" + req->topic;
        PutKind kind = req->persistence == PutKind::Persistent ? PutKind::Persistent
                                                               : PutKind::Volatile;
        handle_put_like(wp, req->corr, key, kind, make_payload(r.tail()), recv_ns);
        return;
    }
    case kReqTrigPut: {
        auto req = decode_key_req(r);
        if (!req.ok()) return;
        auto parsed = registry_.parse_key(req->key);
        if (!parsed.ok()) {
            respond_error(wp, req->corr, parsed.status(), recv_ns);
            return;
        }
        submit_trigger(req->key, make_payload(r.tail()));
        RespMsg resp;
        resp.corr = req->corr;
        resp.timing.resident_ns = mono_ns() - recv_ns;
        if (auto c = wp.lock()) c->send(kResp, encode_resp_head(resp));
        return;
    }
    case kReqGet: {
        auto req = decode_key_req(r);
        if (!req.ok()) return;
        handle_get(wp, req->corr, req->key, recv_ns);
        return;
    }
    case kReqGetVer: {
        auto req = decode_key_at_req(r);
        if (!req.ok()) return;
        handle_get_ver(wp, req->corr, req->key, req->arg, recv_ns);
        return;
    }
    case kReqGetTime: {
        auto req = decode_key_at_req(r);
        if (!req.ok()) return;
        handle_get_time(wp, req->corr, req->key, req->arg, recv_ns);
        return;
    }
    case kReqSubscribe: {
        auto req = decode_subscribe_req(r);
        if (!req.ok()) return;
        Status st = validate_topic(req->topic);
        if (st.ok()) {
            if (auto c = wp.lock())
                subs_.add(req->topic, c, cfg_.queue_capacity);
            else
                return;
        }
        RespMsg resp;
        resp.corr = req->corr;
        resp.code = static_cast<uint16_t>(st.code);
        resp.message = st.message;
        resp.timing.resident_ns = mono_ns() - recv_ns;
        if (auto c = wp.lock()) c->send(kResp, encode_resp_head(resp));
        return;
    }
    default:
        CASC_WARN("node", "unknown frame type 0x%02x from %s", type, conn.peer().c_str());
    }
}

void Node::respond_error(const std::weak_ptr<Conn>& wp, uint64_t corr, const Status& st,
                         uint64_t recv_ns) {
    auto c = wp.lock();
    if (!c) return;
    RespMsg resp;
    resp.corr = corr;
    resp.code = static_cast<uint16_t>(st.code);
    resp.message = st.message;
    resp.timing.resident_ns = mono_ns() - recv_ns;
    c->send(kResp, encode_resp_head(resp));
}

void Node::respond_get(const std::weak_ptr<Conn>& wp, uint64_t corr, const VersionedObject& obj,
                       uint64_t recv_ns) {
    auto c = wp.lock();
    if (!c) return;
    RespMsg resp;
    resp.corr = corr;
    resp.per_key_version = obj.version.per_key_version;
    resp.shard_seq = obj.version.shard_seq;
    resp.timestamp_us = obj.version.timestamp_us;
    resp.timing.resident_ns = mono_ns() - recv_ns;
    c->send(kResp, encode_resp_head(resp), obj.payload->data(), obj.payload->size());
}

void Node::handle_put_like(const std::weak_ptr<Conn>& wp, uint64_t corr, const std::string& key,
                           PutKind kind, PayloadPtr payload, uint64_t recv_ns) {
    auto parsed = registry_.parse_key(key);
    if (!parsed.ok()) {
        respond_error(wp, corr, parsed.status(), recv_ns);
        return;
    }
    const auto* pool = cfg_.pool(parsed->pool_path);
    uint32_t shard = map_key_to_shard(*parsed, pool->desc);

    if (kind == PutKind::PoolDefault)
        kind = pool->desc.persistence == Persistence::Persistent ? PutKind::Persistent
                                                                 : PutKind::Volatile;
    if (kind == PutKind::Persistent && pool->desc.persistence != Persistence::Persistent) {
        respond_error(wp, corr,
                      Status::error(Code::NotPersistentPool,
                                    parsed->pool_path + " cannot serve persistent puts"),
                      recv_ns);
        return;
    }

    auto* seq = sequencer(parsed->pool_path, shard);
    if (seq == nullptr) {
        auto view = view_->get();
        auto owner = view->sequencer_of(parsed->pool_path, shard);
        if (!owner) {
            respond_error(wp, corr, Status::error(Code::ShardUnavailable, "shard has no members"),
                          recv_ns);
        } else {
            respond_error(wp, corr,
                          Status::error(Code::WrongNode,
                                        "sequencer for this shard is node " +
                                            std::to_string(*owner)),
                          recv_ns);
        }
        return;
    }

    seq->submit(key, std::move(payload), kind, recv_ns,
                [this, wp, corr, recv_ns](const Status& st, const Version& version,
                                          const PutTiming& timing) {
                    auto c = wp.lock();
                    if (!c) return;
                    RespMsg resp;
                    resp.corr = corr;
                    resp.code = static_cast<uint16_t>(st.code);
                    resp.message = st.message;
                    resp.per_key_version = version.per_key_version;
                    resp.shard_seq = version.shard_seq;
                    resp.timestamp_us = version.timestamp_us;
                    resp.timing = timing;
                    resp.timing.resident_ns = mono_ns() - recv_ns;
                    c->send(kResp, encode_resp_head(resp));
                });
}

void Node::handle_get(const std::weak_ptr<Conn>& wp, uint64_t corr, const std::string& key,
                      uint64_t recv_ns) {
    auto loc = locate(key);
    if (!loc.ok()) {
        respond_error(wp, corr, loc.status(), recv_ns);
        return;
    }
    auto* rep = local_replica_for(loc->first, loc->second);
    if (rep == nullptr) {
        respond_error(wp, corr, Status::error(Code::WrongNode, "shard not hosted here"), recv_ns);
        return;
    }
    auto obj = rep->kv().get_current(key);
    if (!obj.ok()) {
        respond_error(wp, corr, obj.status(), recv_ns);
        return;
    }
    respond_get(wp, corr, *obj, recv_ns);
}

void Node::handle_get_ver(const std::weak_ptr<Conn>& wp, uint64_t corr, const std::string& key,
                          uint64_t version, uint64_t recv_ns) {
    auto loc = locate(key);
    if (!loc.ok()) {
        respond_error(wp, corr, loc.status(), recv_ns);
        return;
    }
    auto* rep = local_replica_for(loc->first, loc->second);
    if (rep == nullptr) {
        respond_error(wp, corr, Status::error(Code::WrongNode, "shard not hosted here"), recv_ns);
        return;
    }
    auto obj = rep->kv().get_by_version(key, version);
    if (!obj.ok()) {
        respond_error(wp, corr, obj.status(), recv_ns);
        return;
    }
    respond_get(wp, corr, *obj, recv_ns);
}

void Node::handle_get_time(const std::weak_ptr<Conn>& wp, uint64_t corr, const std::string& key,
                           uint64_t ts_us, uint64_t recv_ns) {
    auto loc = locate(key);
    if (!loc.ok()) {
        respond_error(wp, corr, loc.status(), recv_ns);
        return;
    }
    auto* rep = local_replica_for(loc->first, loc->second);
    if (rep == nullptr) {
        respond_error(wp, corr, Status::error(Code::WrongNode, "shard not hosted here"), recv_ns);
        return;
    }
    if (rep->log() == nullptr) {
        respond_error(wp, corr,
                      Status::error(Code::NotPersistentPool, loc->first + " does not retain history"),
                      recv_ns);
        return;
    }

    // Temporal gets may block until the frontier catches up; keep them off
    // the connection reader thread.
    bool queued = blocking_pool_->submit([this, wp, corr, key, ts_us, recv_ns, rep] {
        PersistentLog* log = rep->log();
        if (!log->wait_frontier_ts(ts_us, cfg_.get_by_time_timeout_ms * 1000)) {
            respond_error(wp, corr,
                          Status::error(Code::Timeout, "stability frontier did not reach t"),
                          recv_ns);
            return;
        }
        auto version = log->time_to_version(key, ts_us);
        if (!version.ok()) {
            respond_error(wp, corr, version.status(), recv_ns);
            return;
        }
        auto obj = rep->kv().get_by_version(key, version.value());
        if (!obj.ok()) {
            respond_error(wp, corr, obj.status(), recv_ns);
            return;
        }
        respond_get(wp, corr, *obj, recv_ns);
    });
    if (!queued)
        respond_error(wp, corr, Status::error(Code::ShardUnavailable, "node stopping"), recv_ns);
}

// ---- housekeeping ----

void Node::note_peer_alive(uint32_t peer) {
    std::lock_guard lk(liveness_mu_);
    last_seen_ns_[peer] = mono_ns();
}

void Node::on_frontier_advance(const std::string& pool, uint32_t shard,
                               const StabilityFrontier& frontier) {
    if (auto* rep = replica(pool, shard))
        if (rep->log() != nullptr) rep->log()->set_frontier(frontier.stable_seq, frontier.stable_ts);

    // Push the news to the other members right away so their temporal gets
    // unblock without waiting for the next periodic heartbeat.
    HeartbeatMsg hb{cfg_.node_id, {{pool, shard, frontier.stable_seq, frontier.stable_ts}}};
    Bytes head = encode_heartbeat(hb);
    auto view = view_->get();
    const auto* members = view->members_of(pool, shard);
    if (members == nullptr) return;
    for (uint32_t member : *members)
        if (member != cfg_.node_id) send_to_peer(member, kHeartbeat, head, nullptr);
}

void Node::housekeeper_loop() {
    for (;;) {
        {
            std::unique_lock lk(hk_mu_);
            hk_cv_.wait_for(lk, std::chrono::milliseconds(cfg_.heartbeat_ms),
                            [&] { return hk_stop_; });
            if (hk_stop_) return;
        }

        auto view = view_->get();

        // Periodic heartbeat with current frontiers of owned shards.
        HeartbeatMsg hb{cfg_.node_id, {}};
        {
            std::lock_guard lk(seq_mu_);
            for (const auto& [key, seq] : sequencers_)
                if (seq->has_persistence()) {
                    auto f = seq->frontier();
                    hb.frontiers.push_back({key.first, key.second, f.stable_seq, f.stable_ts});
                }
        }
        Bytes head = encode_heartbeat(hb);
        for (const auto& peer : view->nodes)
            if (peer.id != cfg_.node_id) send_to_peer(peer.id, kHeartbeat, head, nullptr);

        // Refresh durable watermarks so a newly elected sequencer learns them.
        for (const auto& [key, rep] : replicas_) {
            if (rep->log() == nullptr) continue;
            auto seq_node = view->sequencer_of(key.first, key.second);
            if (!seq_node) continue;
            PersistAckMsg ack{key.first, key.second, cfg_.node_id, rep->durable_watermark()};
            if (*seq_node == cfg_.node_id) {
                if (auto* s = sequencer(key.first, key.second)) s->on_persist_ack(ack);
            } else {
                send_to_peer(*seq_node, kPersistAck, encode_persist_ack(ack), nullptr);
            }
        }

        // Failure detection: heartbeat silence or a dead link.
        std::vector<uint32_t> dead;
        {
            std::lock_guard lk(liveness_mu_);
            uint64_t now = mono_ns();
            for (const auto& peer : view->nodes) {
                if (peer.id == cfg_.node_id) continue;
                auto it = last_seen_ns_.find(peer.id);
                if (it == last_seen_ns_.end()) continue;
                if (it->second == 0 || now - it->second > cfg_.failure_timeout_ms * 1'000'000)
                    dead.push_back(peer.id);
            }
        }
        for (uint32_t id : dead) handle_node_failure(id);

        {
            std::lock_guard lk(seq_mu_);
            for (const auto& [key, seq] : sequencers_) seq->check_timeouts(cfg_.commit_timeout_ms);
        }

        {
            std::lock_guard lk(conns_mu_);
            for (auto& z : zombies_) z->join();
            zombies_.clear();
        }
    }
}

void Node::handle_node_failure(uint32_t dead) {
    auto view = view_->get();
    if (!view->has_node(dead)) return;
    CASC_WARN("node", "node %u: declaring node %u failed", cfg_.node_id, dead);
    view = view_->remove_node(dead);

    {
        std::lock_guard lk(conns_mu_);
        auto it = peer_conns_.find(dead);
        if (it != peer_conns_.end()) {
            it->second->close();
            zombies_.push_back(it->second);
            peer_conns_.erase(it);
        }
    }

    // Refresh member positions for designation.
    for (const auto& [key, rep] : replicas_) {
        const auto* members = view->members_of(key.first, key.second);
        if (members == nullptr) continue;
        auto pos = std::find(members->begin(), members->end(), cfg_.node_id);
        if (pos != members->end())
            rep->set_position(static_cast<uint32_t>(pos - members->begin()),
                              static_cast<uint32_t>(members->size()));
    }

    {
        std::lock_guard lk(seq_mu_);
        for (const auto& [key, seq] : sequencers_) seq->on_member_removed(dead);
    }

    // Take over shards whose sequencer died and now fall to us.
    for (const auto& [key, rep] : replicas_) {
        const auto* members = view->members_of(key.first, key.second);
        if (members == nullptr || members->empty()) continue;
        uint32_t new_seq = *std::min_element(members->begin(), members->end());
        if (new_seq != cfg_.node_id) continue;
        if (sequencer(key.first, key.second) != nullptr) continue;
        CASC_WARN("node", "node %u takes over as sequencer for %s/%u", cfg_.node_id,
                  key.first.c_str(), key.second);
        setup_sequencer(key.first, key.second, *members);
    }
}

// ---- shutdown ----

void Node::stop() {
    bool expected = false;
    if (!stopped_.compare_exchange_strong(expected, true)) return;

    {
        std::lock_guard lk(hk_mu_);
        hk_stop_ = true;
        hk_cv_.notify_all();
    }
    if (housekeeper_.joinable()) housekeeper_.join();

    if (server_) server_->stop();

    {
        std::lock_guard lk(seq_mu_);
        for (auto& [key, seq] : sequencers_) seq->fail_all(Code::ShardUnavailable);
    }

    for (auto& [key, rep] : replicas_)
        if (rep->log() != nullptr) rep->log()->shutdown_waiters();
    if (blocking_pool_) blocking_pool_->stop();

    {
        std::lock_guard lk(client_mu_);
        if (embedded_client_) embedded_client_->close();
    }

    std::vector<std::shared_ptr<Conn>> conns;
    {
        std::lock_guard lk(conns_mu_);
        for (auto& [id, c] : inbound_) conns.push_back(c);
        inbound_.clear();
        for (auto& [id, c] : peer_conns_) conns.push_back(c);
        peer_conns_.clear();
        conns.insert(conns.end(), zombies_.begin(), zombies_.end());
        zombies_.clear();
    }
    for (auto& c : conns) c->close();
    for (auto& c : conns) c->join();

    if (fastpath_) fastpath_->stop();
    for (auto& [key, rep] : replicas_) rep->stop();
}

void Node::crash_stop() {
    bool expected = false;
    if (!stopped_.compare_exchange_strong(expected, true)) return;

    {
        std::lock_guard lk(hk_mu_);
        hk_stop_ = true;
        hk_cv_.notify_all();
    }
    if (housekeeper_.joinable()) housekeeper_.join();
    if (server_) server_->stop();

    {
        std::lock_guard lk(seq_mu_);
        for (auto& [key, seq] : sequencers_) seq->fail_all(Code::ShardUnavailable);
    }
    for (auto& [key, rep] : replicas_)
        if (rep->log() != nullptr) rep->log()->shutdown_waiters();
    if (blocking_pool_) blocking_pool_->stop();
    {
        std::lock_guard lk(client_mu_);
        if (embedded_client_) embedded_client_->close();
    }

    std::vector<std::shared_ptr<Conn>> conns;
    {
        std::lock_guard lk(conns_mu_);
        for (auto& [id, c] : inbound_) conns.push_back(c);
        inbound_.clear();
        for (auto& [id, c] : peer_conns_) conns.push_back(c);
        peer_conns_.clear();
        conns.insert(conns.end(), zombies_.begin(), zombies_.end());
        zombies_.clear();
    }
    for (auto& c : conns) c->close();
    for (auto& c : conns) c->join();

    if (fastpath_) fastpath_->stop();
    for (auto& [key, rep] : replicas_) rep->crash_stop();
}

}  // namespace cascade
