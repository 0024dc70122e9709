#include "repl/sequencer.hpp"

#include <algorithm>

#include "core/clock.hpp"
#include "core/debug.hpp"

namespace cascade {

ShardSequencer::ShardSequencer(std::string pool, uint32_t shard, uint32_t self_id,
                               std::vector<uint32_t> members, Persistence pool_persistence,
                               Hooks hooks, uint64_t initial_seq, uint64_t initial_ts_us)
    : pool_(std::move(pool)),
      shard_(shard),
      self_(self_id),
      persistence_(pool_persistence),
      hooks_(std::move(hooks)),
      members_(std::move(members)),
      next_seq_(initial_seq),
      last_ts_us_(initial_ts_us),
      tracker_(members_) {}

void ShardSequencer::submit(const std::string& full_key, PayloadPtr payload, PutKind kind,
                            uint64_t recv_ns, PutResponder respond) {
    std::unique_lock lk(mu_);
    if (failed_ || members_.empty()) {
        lk.unlock();
        respond(Status::error(Code::ShardUnavailable, pool_ + " shard " + std::to_string(shard_)),
                {}, {});
        return;
    }

    uint64_t seq = ++next_seq_;
    uint64_t ts = std::max(epoch_us(), last_ts_us_);  // non-decreasing per shard
    last_ts_us_ = ts;
    if (persistence_ == Persistence::Persistent) tracker_.note_timestamp(seq, ts);

    McastMsg msg;
    msg.kind = kind;
    msg.pool = pool_;
    msg.shard = shard_;
    msg.seq = seq;
    msg.timestamp_us = ts;
    msg.key = full_key;
    Bytes head = encode_mcast_head(msg);

    Pending pending;
    pending.key = full_key;
    pending.kind = kind;
    pending.seq = seq;
    pending.timestamp_us = ts;
    pending.awaiting_apply.insert(members_.begin(), members_.end());
    pending.recv_ns = recv_ns;
    pending.respond = std::move(respond);
    pending_.emplace(seq, std::move(pending));
    retained_.emplace(seq, Retained{head, payload});

    for (uint32_t member : members_) {
        if (member == self_) continue;
        if (!hooks_.send_mcast(member, head, payload))
            CASC_WARN("seq", "mcast seq %llu to member %u failed; awaiting view change",
                      static_cast<unsigned long long>(seq), member);
    }
    hooks_.deliver_local(std::move(msg), std::move(payload));
}

void ShardSequencer::complete_applied(uint64_t seq, std::vector<std::function<void()>>& out) {
    auto it = pending_.find(seq);
    if (it == pending_.end()) return;
    Pending& p = it->second;
    if (!p.awaiting_apply.empty()) return;

    p.all_applied_ns = mono_ns();
    retained_.erase(seq);  // everyone has it; no retransmission possible or needed

    if (p.kind == PutKind::Persistent) {
        pending_persist_.emplace(seq, std::move(p));
        pending_.erase(it);
        // Durability may have outrun the apply acks (local sync is fast).
        complete_persisted(tracker_.frontier().stable_seq, out);
        return;
    }
    Pending done = std::move(p);
    pending_.erase(it);
    out.push_back([done = std::move(done)]() mutable {
        Version v{done.per_key_version, done.seq, done.timestamp_us};
        done.respond(Status::success(), v, timing_of(done, false));
    });
}

void ShardSequencer::complete_persisted(uint64_t stable_seq,
                                        std::vector<std::function<void()>>& out) {
    while (!pending_persist_.empty() && pending_persist_.begin()->first <= stable_seq) {
        Pending done = std::move(pending_persist_.begin()->second);
        pending_persist_.erase(pending_persist_.begin());
        out.push_back([done = std::move(done)]() mutable {
            Version v{done.per_key_version, done.seq, done.timestamp_us};
            done.respond(Status::success(), v, timing_of(done, true));
        });
    }
}

PutTiming ShardSequencer::timing_of(const Pending& p, bool persisted) {
    PutTiming t;
    uint64_t now = mono_ns();
    t.multicast_ns = (p.all_applied_ns > p.recv_ns ? p.all_applied_ns - p.recv_ns : 0);
    t.processing_ns = p.max_apply_ns;
    if (t.multicast_ns > t.processing_ns) t.multicast_ns -= t.processing_ns;
    if (persisted && now > p.all_applied_ns) t.persistence_ns = now - p.all_applied_ns;
    return t;
}

void ShardSequencer::on_mcast_ack(const McastAckMsg& ack) {
    std::vector<std::function<void()>> completions;
    {
        std::lock_guard lk(mu_);
        auto it = pending_.find(ack.seq);
        if (it == pending_.end()) return;
        Pending& p = it->second;
        p.awaiting_apply.erase(ack.member);
        p.max_apply_ns = std::max(p.max_apply_ns, ack.apply_ns);
        p.per_key_version = ack.per_key_version;
        complete_applied(ack.seq, completions);
    }
    for (auto& fn : completions) fn();
}

void ShardSequencer::on_persist_ack(const PersistAckMsg& ack) {
    std::vector<std::function<void()>> completions;
    std::optional<StabilityFrontier> advanced;
    {
        std::lock_guard lk(mu_);
        advanced = tracker_.advance(ack.member, ack.durable_seq);
        if (advanced) complete_persisted(advanced->stable_seq, completions);
    }
    for (auto& fn : completions) fn();
    if (advanced && hooks_.on_frontier) hooks_.on_frontier(*advanced);
}

void ShardSequencer::on_gap_req(const GapReqMsg& req) {
    std::vector<std::pair<Bytes, PayloadPtr>> frames;
    {
        std::lock_guard lk(mu_);
        for (uint64_t seq = req.from_seq; seq <= req.to_seq; ++seq) {
            auto it = retained_.find(seq);
            if (it == retained_.end()) {
                CASC_WARN("seq", "gap request for pruned seq %llu from member %u",
                          static_cast<unsigned long long>(seq), req.member);
                continue;
            }
            frames.emplace_back(it->second.head, it->second.payload);
        }
    }
    for (auto& [head, payload] : frames) hooks_.send_mcast(req.member, head, payload);
}

void ShardSequencer::on_member_removed(uint32_t member) {
    std::vector<std::function<void()>> completions;
    std::optional<StabilityFrontier> advanced;
    {
        std::lock_guard lk(mu_);
        members_.erase(std::remove(members_.begin(), members_.end(), member), members_.end());
        tracker_.remove_member(member);

        std::vector<uint64_t> seqs;
        for (auto& [seq, p] : pending_) {
            p.awaiting_apply.erase(member);
            if (p.awaiting_apply.empty()) seqs.push_back(seq);
        }
        for (uint64_t seq : seqs) complete_applied(seq, completions);

        // The min durable seq may have been the dead member's.
        if (!members_.empty()) {
            advanced = tracker_.remove_member(member);
            complete_persisted(tracker_.frontier().stable_seq, completions);
        } else {
            tracker_.remove_member(member);
        }
    }
    for (auto& fn : completions) fn();
    if (advanced && hooks_.on_frontier) hooks_.on_frontier(*advanced);
}

void ShardSequencer::check_timeouts(uint64_t commit_timeout_ms) {
    uint64_t now = mono_ns();
    uint64_t limit_ns = commit_timeout_ms * 1'000'000;
    std::vector<std::function<void()>> completions;
    {
        std::lock_guard lk(mu_);
        auto expire = [&](std::map<uint64_t, Pending>& map, bool persist_stage) {
            for (auto it = map.begin(); it != map.end();) {
                Pending& p = it->second;
                if (now - p.recv_ns < limit_ns) {
                    ++it;
                    continue;
                }
                std::string who;
                if (persist_stage) {
                    who = "durability lagging";
                } else {
                    for (uint32_t m : p.awaiting_apply) who += " " + std::to_string(m);
                    who = "awaiting members" + who;
                }
                Pending done = std::move(p);
                it = map.erase(it);
                retained_.erase(done.seq);
                completions.push_back([done = std::move(done), who]() mutable {
                    done.respond(Status::error(Code::CommitTimeout, who), {}, {});
                });
            }
        };
        expire(pending_, false);
        expire(pending_persist_, true);
    }
    for (auto& fn : completions) fn();
}

StabilityFrontier ShardSequencer::frontier() const {
    std::lock_guard lk(mu_);
    return tracker_.frontier();
}

void ShardSequencer::fail_all(Code code) {
    std::vector<std::function<void()>> completions;
    {
        std::lock_guard lk(mu_);
        failed_ = true;
        auto drain = [&](std::map<uint64_t, Pending>& map) {
            for (auto& [seq, p] : map) {
                Pending done = std::move(p);
                completions.push_back([done = std::move(done), code]() mutable {
                    done.respond(Status::error(code, "shard shutting down"), {}, {});
                });
            }
            map.clear();
        };
        drain(pending_);
        drain(pending_persist_);
        retained_.clear();
    }
    for (auto& fn : completions) fn();
}

}  // namespace cascade
