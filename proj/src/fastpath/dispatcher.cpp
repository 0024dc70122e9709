#include "fastpath/dispatcher.hpp"

#include "core/clock.hpp"
#include "core/debug.hpp"
#include "core/hash.hpp"

namespace cascade {

FastPath::FastPath(Options opts) : opts_(opts), inbox_(opts.queue_capacity) {
    size_t n = opts.worker_count;
    if (n == 0) n = std::max<size_t>(2, std::thread::hardware_concurrency());
    for (size_t i = 0; i < n; ++i)
        queues_.push_back(std::make_unique<BoundedQueue<UpcallEvent>>(opts.queue_capacity));
    for (size_t i = 0; i < n; ++i)
        workers_.emplace_back([this, i] { worker_loop(i); });
    dispatcher_ = std::thread([this] { dispatcher_loop(); });
}

FastPath::~FastPath() { stop(); }

void FastPath::stop() {
    bool expected = false;
    if (!stopped_.compare_exchange_strong(expected, true)) return;
    inbox_.close();
    if (dispatcher_.joinable()) dispatcher_.join();
    for (auto& q : queues_) q->close();
    for (auto& w : workers_)
        if (w.joinable()) w.join();
}

Status FastPath::register_lambda(LambdaRegistration reg, LambdaFn fn) {
    auto comps = split_path(reg.prefix);
    if (!comps.ok())
        return Status::error(Code::MalformedKey, "bad prefix: " + comps.status().message);
    std::promise<Status> done;
    auto fut = done.get_future();
    auto lambda = std::make_shared<RegisteredLambda>(std::move(reg), std::move(fn));
    if (!inbox_.push(RegisterCmd{std::move(lambda), &done}))
        return Status::error(Code::Internal, "fast path stopped");
    return fut.get();
}

void FastPath::submit(std::shared_ptr<const DispatchObject> obj) {
    inbox_.push(std::move(obj));
}

std::vector<LambdaRegistration> FastPath::match(std::string_view full_key) {
    std::promise<std::vector<LambdaRegistration>> done;
    auto fut = done.get_future();
    if (!inbox_.push(MatchCmd{std::string(full_key), &done})) return {};
    return fut.get();
}

void FastPath::set_timing_probe(std::function<void(const EventTiming&)> probe) {
    std::lock_guard lk(probe_mu_);
    probe_ = std::move(probe);
}

FastPath::Stats FastPath::stats() const {
    return {objects_dispatched_.load(), events_enqueued_.load(), events_executed_.load(),
            lambda_failures_.load()};
}

void FastPath::dispatcher_loop() {
    while (auto item = inbox_.pop()) {
        if (auto* cmd = std::get_if<RegisterCmd>(&*item)) {
            Status st = trie_.insert(cmd->lambda->registration);
            if (st.ok()) {
                const auto& reg = cmd->lambda->registration;
                by_binding_.emplace(reg.lambda_id + '\0' + reg.prefix, cmd->lambda);
            }
            cmd->done->set_value(std::move(st));
            continue;
        }
        if (auto* cmd = std::get_if<MatchCmd>(&*item)) {
            std::vector<LambdaRegistration> out;
            for (const LambdaRegistration* reg : trie_.match(cmd->key)) out.push_back(*reg);
            cmd->done->set_value(std::move(out));
            continue;
        }

        auto obj = std::get<std::shared_ptr<const DispatchObject>>(std::move(*item));
        objects_dispatched_.fetch_add(1, std::memory_order_relaxed);
        uint64_t t_match = mono_ns();
        auto matches = trie_.match(obj->key);
        for (const LambdaRegistration* reg : matches) {
            auto it = by_binding_.find(reg->lambda_id + '\0' + reg->prefix);
            if (it == by_binding_.end()) continue;
            const std::shared_ptr<RegisteredLambda>& lambda = it->second;

            // Ordered deliveries reach every shard member; one of them is
            // designated to run the lambda. FIFO lambdas pin by key so the
            // per-key order survives; load-balancing ones rotate by seq.
            if (!obj->is_trigger && obj->member_count > 1) {
                uint64_t designated =
                    lambda->registration.policy == DispatchPolicy::FifoByKey
                        ? stable_hash(obj->key) % obj->member_count
                        : obj->version.shard_seq % obj->member_count;
                if (designated != obj->member_index) continue;
            }

            size_t queue_index;
            if (lambda->registration.policy == DispatchPolicy::FifoByKey) {
                queue_index = stable_hash(obj->key) % queues_.size();
            } else {
                queue_index = lambda->rr_next;
                lambda->rr_next = (lambda->rr_next + 1) % queues_.size();
            }
            uint64_t now = mono_ns();
            UpcallEvent ev{obj, lambda, now, now - t_match};
            queues_[queue_index]->push(std::move(ev));
            events_enqueued_.fetch_add(1, std::memory_order_relaxed);
        }
    }
}

void FastPath::worker_loop(size_t index) {
    auto& queue = *queues_[index];
    while (auto ev = queue.pop()) {
        uint64_t dequeue_ns = mono_ns();
        try {
            ev->lambda->fn(*ev);
        } catch (const std::exception& e) {
            lambda_failures_.fetch_add(1, std::memory_order_relaxed);
            CASC_WARN("fastpath", "lambda %s failed on %s: %s",
                      ev->lambda->registration.lambda_id.c_str(), ev->object->key.c_str(),
                      e.what());
        } catch (...) {
            lambda_failures_.fetch_add(1, std::memory_order_relaxed);
            CASC_WARN("fastpath", "lambda %s failed on %s",
                      ev->lambda->registration.lambda_id.c_str(), ev->object->key.c_str());
        }
        events_executed_.fetch_add(1, std::memory_order_relaxed);

        std::function<void(const EventTiming&)> probe;
        {
            std::lock_guard lk(probe_mu_);
            probe = probe_;
        }
        if (probe) {
            probe(EventTiming{ev->lambda->registration.lambda_id, ev->enqueue_ns, dequeue_ns,
                              mono_ns(), ev->dispatch_ns, index});
        }
    }
}

}  // namespace cascade
