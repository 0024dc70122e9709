#include "bench/bench.hpp"

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <thread>

#include "core/clock.hpp"
#include "core/debug.hpp"
#include "fastpath/dispatcher.hpp"
#include "fastpath/trie.hpp"
#include "service/node.hpp"

namespace cascade {

PercentileStats percentile_stats(std::vector<uint64_t> ns_values) {
    PercentileStats out;
    if (ns_values.empty()) return out;
    std::sort(ns_values.begin(), ns_values.end());
    auto at = [&](double q) {
        size_t idx = static_cast<size_t>(q * (ns_values.size() - 1));
        return ns_values[idx] / 1000.0;
    };
    out.p50_us = at(0.50);
    out.p90_us = at(0.90);
    out.p99_us = at(0.99);
    double sum = 0;
    for (uint64_t v : ns_values) sum += static_cast<double>(v);
    out.mean_us = sum / ns_values.size() / 1000.0;
    out.count = ns_values.size();
    return out;
}

namespace {

Bytes make_object(size_t bytes) {
    Bytes out(bytes);
    for (size_t i = 0; i < bytes; ++i) out[i] = static_cast<uint8_t>(i * 31 + 7);
    return out;
}

struct SampleSink {
    std::mutex mu;
    std::vector<PutSample> samples;

    void add(PutSample s) {
        std::lock_guard lk(mu);
        samples.push_back(s);
    }
};

// One open-loop pass at the given rate; returns achieved send rate.
double run_put_phase(Client& client, const PutBenchOptions& opts, double rate,
                     uint64_t duration_ms, SampleSink& sink, std::atomic<uint64_t>& op_ids) {
    PutKind kind = PutKind::PoolDefault;
    bool trig = false;
    if (opts.op == "trig")
        trig = true;
    else if (opts.op == "vola")
        kind = PutKind::Volatile;
    else if (opts.op == "pers")
        kind = PutKind::Persistent;

    Bytes body = make_object(opts.object_bytes);
    PayloadPtr payload = make_payload(std::move(body));

    std::atomic<uint64_t> outstanding{0};
    std::mutex done_mu;
    std::condition_variable done_cv;

    uint64_t interval_ns = static_cast<uint64_t>(1e9 / rate);
    uint64_t start = mono_ns();
    uint64_t sends = 0;
    uint64_t deadline = start + duration_ms * 1'000'000;

    while (true) {
        uint64_t scheduled = start + sends * interval_ns;
        if (scheduled >= deadline) break;
        while (mono_ns() < scheduled)
            std::this_thread::sleep_for(std::chrono::microseconds(
                std::min<uint64_t>((scheduled - mono_ns()) / 1000 + 1, 1000)));

        uint64_t op_id = op_ids.fetch_add(1);
        std::string key = opts.key_prefix + "/k" + std::to_string(op_id % opts.keys);
        uint64_t send_ns = mono_ns();
        outstanding.fetch_add(1);
        auto finish = [&, op_id, send_ns](uint16_t status, uint64_t e2e, PutTiming timing) {
            sink.add({op_id, send_ns, e2e, timing, status});
            outstanding.fetch_sub(1);
            done_cv.notify_all();
        };
        if (trig) {
            client.trigger_put_async(key, payload, [finish](Result<TrigResult> r) {
                if (r.ok())
                    finish(0, r->e2e_ns, PutTiming{r->resident_ns, 0, 0, 0});
                else
                    finish(static_cast<uint16_t>(r.code()), 0, {});
            });
        } else {
            client.put_async(key, payload, kind, [finish](Result<PutResult> r) {
                if (r.ok())
                    finish(0, r->e2e_ns, r->timing);
                else
                    finish(static_cast<uint16_t>(r.code()), 0, {});
            });
        }
        ++sends;
    }
    uint64_t send_window_ns = mono_ns() - start;

    // Drain.
    {
        std::unique_lock lk(done_mu);
        done_cv.wait_for(lk, std::chrono::seconds(30), [&] { return outstanding.load() == 0; });
    }
    return sends / (send_window_ns / 1e9);
}

}  // namespace

std::string PutBenchReport::summary_line() const {
    char buf[512];
    snprintf(buf, sizeof buf,
             "%s %zuB offered=%.0f/s sent=%.0f/s done=%.0f/s n=%llu err=%llu "
             "p50=%.0fus p90=%.0fus p99=%.0fus | submit=%.0f mcast=%.0f proc=%.0f pers=%.0f%s",
             op.c_str(), object_bytes, offered_rate, achieved_send_rate,
             achieved_completion_rate, static_cast<unsigned long long>(completed),
             static_cast<unsigned long long>(errors), e2e.p50_us, e2e.p90_us, e2e.p99_us,
             submit_mean_us, multicast_mean_us, processing_mean_us, persistence_mean_us,
             saturated ? " [SATURATED]" : "");
    return buf;
}

Result<PutBenchReport> run_put_bench(const ServiceConfig& client_cfg,
                                     const PutBenchOptions& opts) {
    if (opts.op != "trig" && opts.op != "vola" && opts.op != "pers")
        return Status::error(Code::ConfigError, "op must be trig, vola or pers");
    if (opts.rate <= 0 || opts.clients == 0)
        return Status::error(Code::ConfigError, "rate and clients must be positive");

    PutBenchReport report;
    report.op = opts.op;
    report.object_bytes = opts.object_bytes;
    report.offered_rate = opts.rate;

    std::atomic<uint64_t> op_ids{0};

    // Calibration pass at 10% rate for the saturation heuristic.
    if (opts.calibrate) {
        auto client = Client::create(client_cfg);
        if (!client.ok()) return client.status();
        SampleSink cal;
        PutBenchOptions cal_opts = opts;
        run_put_phase(*client.value(), cal_opts, std::max(opts.rate / 10.0, 1.0),
                      std::max<uint64_t>(opts.duration_ms / 5, 500), cal, op_ids);
        std::vector<uint64_t> ns;
        for (const auto& s : cal.samples)
            if (s.status == 0) ns.push_back(s.e2e_ns);
        report.calibration_p99_us = percentile_stats(std::move(ns)).p99_us;
    }

    SampleSink sink;
    uint64_t t0 = mono_ns();
    std::vector<std::thread> threads;
    std::vector<std::unique_ptr<Client>> clients;
    std::vector<double> send_rates(opts.clients, 0);
    for (uint32_t c = 0; c < opts.clients; ++c) {
        auto client = Client::create(client_cfg);
        if (!client.ok()) return client.status();
        clients.push_back(client.take());
    }
    for (uint32_t c = 0; c < opts.clients; ++c) {
        threads.emplace_back([&, c] {
            send_rates[c] = run_put_phase(*clients[c], opts, opts.rate / opts.clients,
                                          opts.duration_ms, sink, op_ids);
        });
    }
    for (auto& t : threads) t.join();
    uint64_t elapsed_ns = mono_ns() - t0;

    std::vector<uint64_t> e2e;
    double submit = 0, mcast = 0, proc = 0, pers = 0;
    for (const auto& s : sink.samples) {
        if (s.status != 0) {
            ++report.errors;
            continue;
        }
        e2e.push_back(s.e2e_ns);
        uint64_t sub = s.e2e_ns > s.timing.resident_ns ? s.e2e_ns - s.timing.resident_ns : 0;
        submit += static_cast<double>(sub);
        mcast += static_cast<double>(s.timing.multicast_ns);
        proc += static_cast<double>(s.timing.processing_ns);
        pers += static_cast<double>(s.timing.persistence_ns);
    }
    report.completed = e2e.size();
    if (report.completed > 0) {
        double n = static_cast<double>(report.completed);
        report.submit_mean_us = submit / n / 1000.0;
        report.multicast_mean_us = mcast / n / 1000.0;
        report.processing_mean_us = proc / n / 1000.0;
        report.persistence_mean_us = pers / n / 1000.0;
    }
    report.e2e = percentile_stats(std::move(e2e));
    for (double r : send_rates) report.achieved_send_rate += r;
    report.achieved_completion_rate = report.completed / (elapsed_ns / 1e9);
    report.saturated = opts.calibrate && report.calibration_p99_us > 0 &&
                       report.e2e.p99_us > 10.0 * report.calibration_p99_us;

    if (!opts.csv_path.empty()) {
        std::ofstream csv(opts.csv_path);
        if (!csv) return Status::error(Code::ConfigError, "cannot write " + opts.csv_path);
        csv << "op_id,op_type,object_bytes,send_ns,e2e_ns,resident_ns,submit_ns,multicast_ns,"
               "processing_ns,persistence_ns,status\n";
        for (const auto& s : sink.samples) {
            uint64_t sub = s.e2e_ns > s.timing.resident_ns ? s.e2e_ns - s.timing.resident_ns : 0;
            csv << s.op_id << ',' << opts.op << ',' << opts.object_bytes << ',' << s.send_ns << ','
                << s.e2e_ns << ',' << s.timing.resident_ns << ',' << sub << ','
                << s.timing.multicast_ns << ',' << s.timing.processing_ns << ','
                << s.timing.persistence_ns << ',' << s.status << '\n';
        }
    }
    return report;
}

// ---- pipeline bench ----

namespace {

uint16_t bench_free_port() {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    uint16_t port = ntohs(addr.sin_port);
    ::close(fd);
    return port;
}

struct StageTrace {
    std::vector<std::atomic<uint64_t>> send_ns;
    std::vector<std::vector<std::atomic<uint64_t>>> arrival_ns;  // [stage][id]
    std::atomic<uint64_t> completions{0};

    StageTrace(uint32_t stages, uint32_t capacity) : send_ns(capacity) {
        arrival_ns.resize(stages);
        for (auto& v : arrival_ns) {
            std::vector<std::atomic<uint64_t>> init(capacity);
            v.swap(init);
        }
    }
};

std::optional<uint64_t> object_id_of(const std::string& key) {
    auto pos = key.rfind("/obj");
    if (pos == std::string::npos) return std::nullopt;
    try {
        return std::stoull(key.substr(pos + 4));
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace

std::string PipelineBenchReport::summary_line() const {
    char buf[512];
    snprintf(buf, sizeof buf,
             "pipeline k=%u edge=%s %zuB injected=%llu completed=%llu p50=%.0fus p99=%.0fus "
             "throughput=%.0f/s",
             stages, edge.c_str(), object_bytes, static_cast<unsigned long long>(injected),
             static_cast<unsigned long long>(completed), e2e.p50_us, e2e.p99_us, throughput_ops);
    return buf;
}

Result<PipelineBenchReport> run_pipeline_bench(const PipelineBenchOptions& opts) {
    if (opts.stages < 1 || opts.stages > 16)
        return Status::error(Code::ConfigError, "stages must be in [1,16]");
    if (opts.edge != "trigger" && opts.edge != "volatile")
        return Status::error(Code::ConfigError, "edge must be trigger or volatile");

    const uint32_t k = opts.stages;
    const uint32_t n_nodes = std::max(3u, k);
    const uint32_t replication = 3;
    const uint32_t capacity =
        opts.count + static_cast<uint32_t>(opts.throughput_ms * 100) + 200'000;

    // Topology: one volatile pool per stage, three-way replicated, spread
    // round-robin over the nodes; relay lambdas hand off along the chosen
    // edge type; the final stage records completions.
    ServiceConfig base;
    for (uint32_t i = 0; i < n_nodes; ++i)
        base.peers.push_back({i, "127.0.0.1", bench_free_port()});
    for (uint32_t s = 0; s < k; ++s) {
        ServiceConfig::PoolConfig pool;
        pool.desc = {"/pipe/s" + std::to_string(s + 1), Persistence::Volatile, replication, 1,
                     ShardingPolicy::HashFullKey};
        std::vector<uint32_t> members;
        for (uint32_t r = 0; r < replication; ++r) members.push_back((s + r) % n_nodes);
        pool.shards.push_back(std::move(members));
        base.pools.push_back(std::move(pool));
    }
    base.worker_count = 2;
    base.heartbeat_ms = 200;

    auto trace = std::make_shared<StageTrace>(k, capacity);
    auto lambdas = std::make_shared<LambdaRegistry>();
    for (uint32_t s = 0; s < k; ++s) {
        bool terminal = s + 1 == k;
        uint32_t stage_idx = s;
        Status st = lambdas->add(
            "bench_stage" + std::to_string(s + 1),
            [trace, stage_idx, terminal](LambdaContext& ctx, const UpcallEvent& ev) {
                auto id = object_id_of(ev.object->key);
                if (id && *id < trace->arrival_ns[stage_idx].size())
                    trace->arrival_ns[stage_idx][*id].store(mono_ns(), std::memory_order_relaxed);
                if (terminal) {
                    trace->completions.fetch_add(1, std::memory_order_relaxed);
                    return;
                }
                auto key = ctx.pools().parse_key(ev.object->key);
                if (key.ok()) (void)ctx.emit(ev.object->payload, key->suffix);
            });
        if (!st.ok()) return st;
    }

    // DFG file for the stage bindings.
    std::string dfg_path =
        std::filesystem::temp_directory_path() /
        ("bench_dfg_" + std::to_string(::getpid()) + "_" + std::to_string(mono_ns()) + ".json");
    {
        std::ofstream out(dfg_path);
        out << "{\n  \"pools\": [";
        for (uint32_t s = 0; s < k; ++s) out << (s ? ", " : "") << "\"/pipe/s" << s + 1 << "\"";
        out << "],\n  \"vertices\": [\n";
        for (uint32_t s = 0; s < k; ++s)
            out << "    {\"id\": \"s" << s + 1 << "\", \"lambda\": \"bench_stage" << s + 1
                << "\", \"prefix\": \"/pipe/s" << s + 1 << "\"}" << (s + 1 < k ? ",\n" : "\n");
        out << "  ],\n  \"edges\": [\n";
        for (uint32_t s = 0; s + 1 < k; ++s)
            out << "    {\"from\": \"s" << s + 1 << "\", \"to\": \"/pipe/s" << s + 2
                << "\", \"put\": \"" << opts.edge << "\"}" << (s + 2 < k ? ",\n" : "\n");
        out << "  ]\n}\n";
    }
    base.dfg_path = dfg_path;

    std::vector<std::unique_ptr<Node>> nodes;
    {
        std::vector<std::future<Result<std::unique_ptr<Node>>>> futures;
        for (uint32_t i = 0; i < n_nodes; ++i) {
            ServiceConfig cfg = base;
            cfg.node_id = i;
            futures.push_back(std::async(std::launch::async,
                                         [cfg, lambdas] { return Node::start(cfg, lambdas); }));
        }
        for (auto& f : futures) {
            auto node = f.get();
            if (!node.ok()) return node.status();
            nodes.push_back(node.take());
        }
    }

    PipelineBenchReport report;
    report.stages = k;
    report.edge = opts.edge;
    report.object_bytes = opts.object_bytes;

    ServiceConfig client_cfg = base;
    client_cfg.node_id = kNoNodeId;
    auto client = Client::create(client_cfg);
    if (!client.ok()) return client.status();

    Bytes body = make_object(opts.object_bytes);
    PayloadPtr payload = make_payload(std::move(body));
    bool trigger_inject = opts.edge == "trigger";

    auto inject = [&](uint64_t id, const std::function<void(bool)>& done) {
        std::string key = "/pipe/s1/obj" + std::to_string(id);
        trace->send_ns[id].store(mono_ns(), std::memory_order_relaxed);
        if (trigger_inject) {
            client.value()->trigger_put_async(key, payload, [done](Result<TrigResult> r) {
                done(r.ok());
            });
        } else {
            client.value()->put_async(key, payload, PutKind::Volatile,
                                      [done](Result<PutResult> r) { done(r.ok()); });
        }
    };

    // Latency phase: paced injection.
    uint64_t interval_ns = static_cast<uint64_t>(1e9 / opts.rate);
    std::atomic<uint64_t> inject_errors{0};
    uint64_t start = mono_ns();
    for (uint32_t i = 0; i < opts.count; ++i) {
        uint64_t scheduled = start + i * interval_ns;
        while (mono_ns() < scheduled)
            std::this_thread::sleep_for(std::chrono::microseconds(200));
        inject(i, [&](bool ok) {
            if (!ok) inject_errors.fetch_add(1);
        });
    }
    report.injected = opts.count;

    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
    while (trace->completions.load() + inject_errors.load() < opts.count &&
           std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    report.completed = trace->completions.load();

    std::vector<uint64_t> e2e;
    std::vector<double> stage_sum(k, 0);
    std::vector<uint64_t> stage_n(k, 0);
    for (uint32_t i = 0; i < opts.count; ++i) {
        uint64_t sent = trace->send_ns[i].load(std::memory_order_relaxed);
        uint64_t done = trace->arrival_ns[k - 1][i].load(std::memory_order_relaxed);
        if (sent == 0 || done <= sent) continue;
        e2e.push_back(done - sent);
        for (uint32_t s = 0; s < k; ++s) {
            uint64_t at = trace->arrival_ns[s][i].load(std::memory_order_relaxed);
            if (at > sent) {
                stage_sum[s] += static_cast<double>(at - sent) / 1000.0;
                ++stage_n[s];
            }
        }
    }
    report.e2e = percentile_stats(e2e);
    for (uint32_t s = 0; s < k; ++s)
        report.stage_mean_us.push_back(stage_n[s] ? stage_sum[s] / stage_n[s] : 0);

    if (!opts.csv_path.empty()) {
        std::ofstream csv(opts.csv_path);
        if (!csv) return Status::error(Code::ConfigError, "cannot write " + opts.csv_path);
        csv << "op_id,stages,edge,object_bytes,send_ns,done_ns,e2e_ns\n";
        for (uint32_t i = 0; i < opts.count; ++i) {
            uint64_t sent = trace->send_ns[i].load(std::memory_order_relaxed);
            uint64_t done = trace->arrival_ns[k - 1][i].load(std::memory_order_relaxed);
            csv << i << ',' << k << ',' << opts.edge << ',' << opts.object_bytes << ',' << sent
                << ',' << done << ',' << (done > sent ? done - sent : 0) << '\n';
        }
    }

    // Throughput phase: closed-loop injection limited by a modest in-flight
    // cap; sustainable rate = sink completion rate.
    if (opts.measure_throughput) {
        std::atomic<uint64_t> in_flight{0};
        std::mutex mu;
        std::condition_variable cv;
        const uint64_t cap = 24;
        uint64_t base_completions = trace->completions.load();
        uint64_t next_id = opts.count;
        uint64_t t0 = mono_ns();
        uint64_t t_end = t0 + opts.throughput_ms * 1'000'000;
        while (mono_ns() < t_end && next_id + 1 < capacity) {
            {
                std::unique_lock lk(mu);
                cv.wait_for(lk, std::chrono::milliseconds(50),
                            [&] { return in_flight.load() < cap; });
                if (in_flight.load() >= cap) continue;
            }
            in_flight.fetch_add(1);
            inject(next_id++, [&](bool) {
                in_flight.fetch_sub(1);
                cv.notify_one();
            });
        }
        // Let the tail drain, then measure completion rate over the window.
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        uint64_t window_ns = mono_ns() - t0;
        uint64_t done = trace->completions.load() - base_completions;
        report.throughput_ops = done / (window_ns / 1e9);
    }

    client.value()->close();
    for (auto& node : nodes) node->stop();
    std::filesystem::remove(dfg_path);
    return report;
}

// ---- self-hosted put-bench cluster ----

Result<std::unique_ptr<SelfCluster>> SelfCluster::start() {
    auto cluster = std::unique_ptr<SelfCluster>(new SelfCluster());
    cluster->scratch_ = (std::filesystem::temp_directory_path() /
                         ("bench_cluster_" + std::to_string(::getpid()) + "_" +
                          std::to_string(mono_ns())))
                            .string();
    std::filesystem::create_directories(cluster->scratch_);

    ServiceConfig base;
    for (uint32_t i = 0; i < 3; ++i) base.peers.push_back({i, "127.0.0.1", bench_free_port()});
    ServiceConfig::PoolConfig pool;
    pool.desc = {"/bench/data", Persistence::Persistent, 3, 1, ShardingPolicy::HashFullKey};
    pool.shards.push_back({0, 1, 2});
    base.pools.push_back(std::move(pool));
    base.worker_count = 2;
    base.heartbeat_ms = 200;

    std::vector<std::future<Result<std::unique_ptr<Node>>>> futures;
    for (uint32_t i = 0; i < 3; ++i) {
        ServiceConfig cfg = base;
        cfg.node_id = i;
        cfg.log_dir = cluster->scratch_ + "/node" + std::to_string(i);
        futures.push_back(
            std::async(std::launch::async, [cfg] { return Node::start(cfg, nullptr); }));
    }
    for (auto& f : futures) {
        auto node = f.get();
        if (!node.ok()) return node.status();
        cluster->nodes_.push_back(node.take());
    }
    base.node_id = kNoNodeId;
    cluster->client_cfg_ = std::move(base);
    return cluster;
}

SelfCluster::~SelfCluster() {
    for (auto& n : nodes_) n->stop();
    nodes_.clear();
    std::error_code ec;
    std::filesystem::remove_all(scratch_, ec);
}

// ---- fastpath bench ----

std::string FastpathBenchReport::summary_line() const {
    char buf[512];
    snprintf(buf, sizeof buf,
             "fastpath %s %zuB n=%llu enqueue p50=%.2fus p99=%.2fus | wait p50=%.2fus | "
             "dequeue p50=%.2fus | trie %.0f ns/level",
             policy.c_str(), object_bytes, static_cast<unsigned long long>(events),
             enqueue.p50_us, enqueue.p99_us, queue_wait.p50_us, dequeue_to_done.p50_us,
             trie_ns_per_level);
    return buf;
}

Result<FastpathBenchReport> run_fastpath_bench(const FastpathBenchOptions& opts) {
    if (opts.policy != "round_robin" && opts.policy != "fifo_by_key")
        return Status::error(Code::ConfigError, "policy must be round_robin or fifo_by_key");

    FastpathBenchReport report;
    report.policy = opts.policy;
    report.object_bytes = opts.object_bytes;

    DispatchPolicy policy =
        opts.policy == "round_robin" ? DispatchPolicy::RoundRobin : DispatchPolicy::FifoByKey;

    struct Timings {
        std::mutex mu;
        std::vector<uint64_t> enqueue, wait, exec;
    } timings;

    {
        FastPath fp({opts.workers, 8192});
        fp.set_timing_probe([&](const EventTiming& t) {
            std::lock_guard lk(timings.mu);
            timings.enqueue.push_back(t.dispatch_ns);
            timings.wait.push_back(t.dequeue_ns > t.enqueue_ns ? t.dequeue_ns - t.enqueue_ns : 0);
            timings.exec.push_back(t.exec_done_ns > t.dequeue_ns ? t.exec_done_ns - t.dequeue_ns
                                                                 : 0);
        });
        Status st = fp.register_lambda({"noop", "/bench/fp", policy}, [](const UpcallEvent&) {});
        if (!st.ok()) return st;

        Bytes body = make_object(opts.object_bytes);
        PayloadPtr payload = make_payload(std::move(body));
        for (uint32_t i = 0; i < opts.events; ++i) {
            auto obj = std::make_shared<DispatchObject>();
            obj->key = "/bench/fp/k" + std::to_string(i % 64);
            obj->payload = payload;
            obj->is_trigger = true;
            fp.submit(std::move(obj));
        }
        auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
        while (fp.stats().events_executed < opts.events &&
               std::chrono::steady_clock::now() < deadline)
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        fp.stop();
    }

    report.events = timings.enqueue.size();
    report.enqueue = percentile_stats(timings.enqueue);
    report.queue_wait = percentile_stats(timings.wait);
    report.dequeue_to_done = percentile_stats(timings.exec);

    // Trie cost by depth: registrations at every level of one path, match
    // keys of growing depth, report mean per-match cost and cost per level.
    {
        PrefixTrie trie;
        std::string prefix;
        for (int d = 1; d <= 8; ++d) {
            prefix += "/c" + std::to_string(d);
            Status st = trie.insert({"l" + std::to_string(d), prefix, DispatchPolicy::RoundRobin});
            if (!st.ok()) return st;
        }
        const int iters = 20'000;
        std::string key;
        for (int d = 1; d <= 8; ++d) {
            key += "/c" + std::to_string(d);
            uint64_t t0 = mono_ns();
            size_t total = 0;
            for (int i = 0; i < iters; ++i) total += trie.match(key).size();
            uint64_t per_match = (mono_ns() - t0) / iters;
            if (total == 0) return Status::error(Code::Internal, "trie bench matched nothing");
            report.trie_match_ns.push_back(static_cast<double>(per_match));
        }
        report.trie_ns_per_level = report.trie_match_ns.back() / 8.0;
    }

    if (!opts.csv_path.empty()) {
        std::ofstream csv(opts.csv_path);
        if (!csv) return Status::error(Code::ConfigError, "cannot write " + opts.csv_path);
        csv << "metric,p50_us,p90_us,p99_us,mean_us,count\n";
        auto row = [&](const char* name, const PercentileStats& s) {
            csv << name << ',' << s.p50_us << ',' << s.p90_us << ',' << s.p99_us << ','
                << s.mean_us << ',' << s.count << '\n';
        };
        row("enqueue", report.enqueue);
        row("queue_wait", report.queue_wait);
        row("dequeue_to_done", report.dequeue_to_done);
        csv << "trie_depth,ns_per_match\n";
        for (size_t d = 0; d < report.trie_match_ns.size(); ++d)
            csv << d + 1 << ',' << report.trie_match_ns[d] << '\n';
    }
    return report;
}

}  // namespace cascade
