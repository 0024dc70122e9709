#include "repl/replica.hpp"

#include "core/clock.hpp"
#include "core/debug.hpp"

namespace cascade {

ShardReplica::ShardReplica(std::string pool, uint32_t shard, uint32_t self_id,
                           Persistence persistence, size_t queue_capacity, Hooks hooks)
    : pool_(std::move(pool)),
      shard_(shard),
      self_(self_id),
      persistence_(persistence),
      hooks_(std::move(hooks)),
      queue_(queue_capacity) {
    kv_ = std::make_unique<KvShard>(persistence_, nullptr);
    delivery_ = std::thread([this] { delivery_loop(); });
}

ShardReplica::~ShardReplica() { stop(); }

Status ShardReplica::init_log(LogOptions opts) {
    auto opened = PersistentLog::open(std::move(opts));
    if (!opened.ok()) return opened.status();
    log_ = opened.take();

    // Rebuild the kv table and continue seq numbering where the log ends.
    kv_ = std::make_unique<KvShard>(persistence_, log_.get());
    uint64_t recovered_seq = log_->durable_seq();
    auto heads = log_->take_recovered_heads();
    uint64_t last_ts = 0, best_seq = 0;
    for (const auto& h : heads)
        if (h.record.version.shard_seq >= best_seq) {
            best_seq = h.record.version.shard_seq;
            last_ts = h.record.version.timestamp_us;
        }
    kv_->install_recovered(std::move(heads));
    next_expected_ = recovered_seq + 1;
    applied_seq_.store(recovered_seq, std::memory_order_release);
    last_ts_us_.store(last_ts, std::memory_order_release);

    log_->set_durable_callback([this](uint64_t) {
        hooks_.send_persist_ack({pool_, shard_, self_, durable_watermark()});
    });
    return Status::success();
}

void ShardReplica::enqueue(McastMsg msg, PayloadPtr payload) {
    queue_.push({std::move(msg), std::move(payload)});
}

void ShardReplica::set_position(uint32_t index, uint32_t count) {
    member_index_.store(index, std::memory_order_release);
    member_count_.store(count == 0 ? 1 : count, std::memory_order_release);
}

uint64_t ShardReplica::durable_watermark() const {
    uint64_t durable = log_ ? log_->durable_seq() : 0;
    std::lock_guard lk(wm_mu_);
    while (!pending_logged_.empty() && pending_logged_.front() <= durable)
        pending_logged_.pop_front();
    return pending_logged_.empty() ? applied_seq_.load(std::memory_order_acquire)
                                   : pending_logged_.front() - 1;
}

void ShardReplica::delivery_loop() {
    while (auto item = queue_.pop()) {
        uint64_t seq = item->msg.seq;
        if (seq < next_expected_) continue;  // retransmission overlap
        if (seq > next_expected_) {
            // Gap: hold this update and ask the sequencer to refill.
            if (seq > gap_requested_hi_) {
                hooks_.send_gap_req({pool_, shard_, self_, next_expected_, seq - 1});
                gap_requested_hi_ = seq;
            }
            reorder_.emplace(seq, std::move(*item));
            continue;
        }
        apply(item->msg, item->payload);
        ++next_expected_;
        while (!reorder_.empty() && reorder_.begin()->first == next_expected_) {
            auto buffered = std::move(reorder_.begin()->second);
            reorder_.erase(reorder_.begin());
            apply(buffered.msg, buffered.payload);
            ++next_expected_;
        }
    }
}

void ShardReplica::apply(const McastMsg& msg, const PayloadPtr& payload) {
    bool logged = msg.kind == PutKind::Persistent && log_ != nullptr;
    // Register the seq before the append stages so a racing write-back sync
    // computes a watermark that still excludes it.
    if (logged) {
        std::lock_guard lk(wm_mu_);
        pending_logged_.push_back(msg.seq);
    }
    uint64_t t0 = mono_ns();
    Version version = kv_->apply_put(msg.key, payload->data(), payload->size(), msg.seq,
                                     msg.timestamp_us, logged);
    uint64_t apply_ns = mono_ns() - t0;
    if (logged && log_->last_staged_seq() < msg.seq) {
        // Append was refused (full log); drop the watermark entry.
        std::lock_guard lk(wm_mu_);
        std::erase(pending_logged_, msg.seq);
    }

    applied_seq_.store(msg.seq, std::memory_order_release);
    last_ts_us_.store(msg.timestamp_us, std::memory_order_release);
    bool ack_durable_now = false;
    if (log_ != nullptr && !logged) {
        std::lock_guard lk(wm_mu_);
        if (pending_logged_.empty())
            ack_durable_now = true;  // keeps the frontier moving on mixed workloads
    }

    auto obj = std::make_shared<DispatchObject>();
    obj->key = msg.key;
    obj->payload = payload;
    obj->version = version;
    obj->is_trigger = false;
    obj->member_index = member_index_.load(std::memory_order_acquire);
    obj->member_count = member_count_.load(std::memory_order_acquire);
    hooks_.dispatch(std::move(obj));

    hooks_.send_mcast_ack({pool_, shard_, msg.seq, self_, apply_ns, version.per_key_version});
    if (ack_durable_now) hooks_.send_persist_ack({pool_, shard_, self_, msg.seq});
}

void ShardReplica::stop() {
    bool expected = false;
    if (!stopped_.compare_exchange_strong(expected, true)) return;
    queue_.close();
    if (delivery_.joinable()) delivery_.join();
    log_.reset();  // drains and syncs
}

void ShardReplica::crash_stop() {
    bool expected = false;
    if (!stopped_.compare_exchange_strong(expected, true)) return;
    queue_.close();
    if (delivery_.joinable()) delivery_.join();
    if (log_) log_->crash_stop();
}

}  // namespace cascade
