// Command-line front end for the cascade store. Links the C API only.

#include <signal.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <cascade/cascade.h>

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

int die(const char* what, casc_status status) {
    std::fprintf(stderr, "%s failed: %s (%s)\n", what, casc_last_error(),
                 casc_status_name(status));
    return 1;
}

std::vector<uint8_t> read_payload(const std::string& data, const std::string& file) {
    if (!file.empty()) {
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            std::fprintf(stderr, "cannot read %s\n", file.c_str());
            std::exit(1);
        }
        return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
    }
    return std::vector<uint8_t>(data.begin(), data.end());
}

int kind_of(const std::string& name) {
    if (name == "default") return CASC_PUT_POOL_DEFAULT;
    if (name == "volatile") return CASC_PUT_VOLATILE;
    if (name == "persistent") return CASC_PUT_PERSISTENT;
    std::fprintf(stderr, "unknown kind %s\n", name.c_str());
    std::exit(1);
}

uint64_t now_epoch_us() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void print_object(const casc_object* obj, const std::string& out_file) {
    casc_version v = casc_object_version(obj);
    std::fprintf(stderr, "version=%llu shard_seq=%llu timestamp_us=%llu size=%zu\n",
                 (unsigned long long)v.per_key_version, (unsigned long long)v.shard_seq,
                 (unsigned long long)v.timestamp_us, casc_object_size(obj));
    if (out_file.empty()) {
        std::fwrite(casc_object_data(obj), 1, casc_object_size(obj), stdout);
        if (casc_object_size(obj) > 0 &&
            static_cast<const char*>(casc_object_data(obj))[casc_object_size(obj) - 1] != '\n')
            std::printf("\n");
    } else {
        std::ofstream out(out_file, std::ios::binary);
        out.write(static_cast<const char*>(casc_object_data(obj)), casc_object_size(obj));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cascade: sharded versioned K/V store with lambda dispatch"};
    app.require_subcommand(1);

    std::string config, key, data, file, out_file, topic, kind = "default";

    // node start --config <path>
    auto* node_cmd = app.add_subcommand("node", "node daemon");
    auto* node_start = node_cmd->add_subcommand("start", "run a node until interrupted");
    node_start->add_option("--config", config, "cluster config JSON")->required();

    auto* put_cmd = app.add_subcommand("put", "store an object");
    put_cmd->add_option("key", key)->required();
    put_cmd->add_option("--config", config)->required();
    put_cmd->add_option("--data", data, "inline payload");
    put_cmd->add_option("--file", file, "payload from file");
    put_cmd->add_option("--kind", kind, "default|volatile|persistent");

    auto* get_cmd = app.add_subcommand("get", "fetch an object");
    uint64_t version = UINT64_MAX, at_us = 0, ago_ms = 0;
    get_cmd->add_option("key", key)->required();
    get_cmd->add_option("--config", config)->required();
    get_cmd->add_option("--version", version, "fetch an exact version");
    get_cmd->add_option("--at-us", at_us, "temporal get at epoch microseconds");
    get_cmd->add_option("--ago-ms", ago_ms, "temporal get this many ms in the past");
    get_cmd->add_option("--out", out_file, "write payload to file");

    auto* trig_cmd = app.add_subcommand("trigput", "trigger put (dispatch only, never stored)");
    trig_cmd->add_option("key", key)->required();
    trig_cmd->add_option("--config", config)->required();
    trig_cmd->add_option("--data", data);
    trig_cmd->add_option("--file", file);

    auto* pub_cmd = app.add_subcommand("pub", "publish to a topic");
    std::string persistence = "volatile";
    pub_cmd->add_option("topic", topic)->required();
    pub_cmd->add_option("--config", config)->required();
    pub_cmd->add_option("--data", data);
    pub_cmd->add_option("--file", file);
    pub_cmd->add_option("--persistence", persistence, "volatile|persistent");

    auto* sub_cmd = app.add_subcommand("sub", "subscribe to a topic and print messages");
    uint64_t sub_count = 0;
    sub_cmd->add_option("topic", topic)->required();
    sub_cmd->add_option("--config", config)->required();
    sub_cmd->add_option("--count", sub_count, "exit after this many messages (0 = forever)");

    // bench put|pipeline|fastpath
    auto* bench_cmd = app.add_subcommand("bench", "microbenchmarks");
    auto* bench_put = bench_cmd->add_subcommand("put", "put latency/throughput");
    std::string op = "vola", csv;
    size_t object_bytes = 10 * 1024;
    double rate = 1000;
    uint64_t duration_ms = 3000;
    uint32_t clients = 1, keys = 16;
    bool no_calibrate = false;
    bench_put->add_option("--config", config, "external cluster (default: self-hosted)");
    bench_put->add_option("--op", op, "trig|vola|pers");
    bench_put->add_option("--size", object_bytes, "object bytes");
    bench_put->add_option("--rate", rate, "offered ops/s");
    bench_put->add_option("--duration-ms", duration_ms);
    bench_put->add_option("--clients", clients);
    bench_put->add_option("--keys", keys, "distinct keys");
    bench_put->add_option("--csv", csv, "raw sample CSV path");
    bench_put->add_flag("--no-calibrate", no_calibrate, "skip the saturation calibration pass");

    auto* bench_pipe = bench_cmd->add_subcommand("pipeline", "k-stage no-op pipeline");
    uint32_t stages = 4, count = 400;
    std::string edge = "trigger";
    uint64_t throughput_ms = 2000;
    bool no_throughput = false;
    bench_pipe->add_option("--stages", stages, "pipeline length k");
    bench_pipe->add_option("--edge", edge, "trigger|volatile");
    bench_pipe->add_option("--size", object_bytes);
    bench_pipe->add_option("--rate", rate, "latency-phase injection rate");
    bench_pipe->add_option("--count", count, "latency-phase injections");
    bench_pipe->add_option("--throughput-ms", throughput_ms);
    bench_pipe->add_flag("--no-throughput", no_throughput);
    bench_pipe->add_option("--csv", csv);

    auto* bench_fp = bench_cmd->add_subcommand("fastpath", "dispatch path breakdown");
    std::string policy = "round_robin";
    uint32_t events = 20'000, workers = 2;
    bench_fp->add_option("--size", object_bytes);
    bench_fp->add_option("--policy", policy, "round_robin|fifo_by_key");
    bench_fp->add_option("--events", events);
    bench_fp->add_option("--workers", workers);
    bench_fp->add_option("--csv", csv);

    CLI11_PARSE(app, argc, argv);

    if (node_start->parsed()) {
        casc_node* node = nullptr;
        casc_status st = casc_node_start(config.c_str(), &node);
        if (st != CASC_OK) return die("node start", st);
        std::fprintf(stderr, "node %u up, view %llu; ctrl-c to stop\n", casc_node_id(node),
                     (unsigned long long)casc_node_view_id(node));
        ::signal(SIGINT, on_signal);
        ::signal(SIGTERM, on_signal);
        while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        casc_node_stop(node);
        return 0;
    }

    if (put_cmd->parsed() || get_cmd->parsed() || trig_cmd->parsed() || pub_cmd->parsed() ||
        sub_cmd->parsed()) {
        casc_client* client = nullptr;
        casc_status st = casc_client_connect(config.c_str(), &client);
        if (st != CASC_OK) return die("connect", st);

        int rc = 0;
        if (put_cmd->parsed()) {
            auto payload = read_payload(data, file);
            casc_version v{};
            casc_put_timing timing{};
            st = casc_put(client, key.c_str(), payload.data(), payload.size(), kind_of(kind), &v,
                          &timing);
            if (st != CASC_OK)
                rc = die("put", st);
            else
                std::printf("version=%llu shard_seq=%llu timestamp_us=%llu e2e_us=%.1f\n",
                            (unsigned long long)v.per_key_version,
                            (unsigned long long)v.shard_seq, (unsigned long long)v.timestamp_us,
                            timing.e2e_ns / 1000.0);
        } else if (get_cmd->parsed()) {
            casc_object* obj = nullptr;
            if (version != UINT64_MAX)
                st = casc_get_by_version(client, key.c_str(), version, &obj);
            else if (at_us != 0)
                st = casc_get_by_time(client, key.c_str(), at_us, &obj);
            else if (ago_ms != 0)
                st = casc_get_by_time(client, key.c_str(), now_epoch_us() - ago_ms * 1000, &obj);
            else
                st = casc_get(client, key.c_str(), &obj);
            if (st != CASC_OK) {
                rc = die("get", st);
            } else {
                print_object(obj, out_file);
                casc_object_free(obj);
            }
        } else if (trig_cmd->parsed()) {
            auto payload = read_payload(data, file);
            st = casc_trigger_put(client, key.c_str(), payload.data(), payload.size());
            if (st != CASC_OK)
                rc = die("trigput", st);
            else
                std::printf("delivered\n");
        } else if (pub_cmd->parsed()) {
            auto payload = read_payload(data, file);
            int p = persistence == "persistent" ? CASC_PUT_PERSISTENT : CASC_PUT_VOLATILE;
            casc_version v{};
            st = casc_publish(client, topic.c_str(), payload.data(), payload.size(), p, &v);
            if (st != CASC_OK)
                rc = die("pub", st);
            else
                std::printf("seq=%llu\n", (unsigned long long)v.per_key_version);
        } else if (sub_cmd->parsed()) {
            struct SubState {
                std::atomic<uint64_t> received{0};
            } state;
            st = casc_subscribe(
                client, topic.c_str(),
                [](const char* t, uint64_t seq, uint64_t ts, const void* d, size_t n,
                   void* user) {
                    auto* s = static_cast<SubState*>(user);
                    std::printf("[%s #%llu @%llu] %.*s\n", t, (unsigned long long)seq,
                                (unsigned long long)ts, (int)n, (const char*)d);
                    std::fflush(stdout);
                    s->received.fetch_add(1);
                },
                &state);
            if (st != CASC_OK) {
                rc = die("sub", st);
            } else {
                ::signal(SIGINT, on_signal);
                ::signal(SIGTERM, on_signal);
                while (!g_stop.load() && (sub_count == 0 || state.received.load() < sub_count))
                    std::this_thread::sleep_for(std::chrono::milliseconds(50));
            }
        }
        casc_client_close(client);
        return rc;
    }

    if (bench_put->parsed()) {
        casc_put_bench_opts opts{};
        opts.op = op.c_str();
        opts.object_bytes = object_bytes;
        opts.rate = rate;
        opts.duration_ms = duration_ms;
        opts.clients = clients;
        opts.keys = keys;
        opts.csv_path = csv.empty() ? nullptr : csv.c_str();
        opts.calibrate = no_calibrate ? 0 : 1;
        char* summary = nullptr;
        casc_status st =
            casc_bench_put(config.empty() ? nullptr : config.c_str(), &opts, &summary);
        if (st != CASC_OK) return die("bench put", st);
        std::printf("%s\n", summary);
        casc_string_free(summary);
        return 0;
    }
    if (bench_pipe->parsed()) {
        casc_pipeline_bench_opts opts{};
        opts.stages = stages;
        opts.edge = edge.c_str();
        opts.object_bytes = object_bytes;
        opts.rate = rate;
        opts.count = count;
        opts.measure_throughput = no_throughput ? 0 : 1;
        opts.throughput_ms = throughput_ms;
        opts.csv_path = csv.empty() ? nullptr : csv.c_str();
        char* summary = nullptr;
        casc_status st = casc_bench_pipeline(&opts, &summary);
        if (st != CASC_OK) return die("bench pipeline", st);
        std::printf("%s\n", summary);
        casc_string_free(summary);
        return 0;
    }
    if (bench_fp->parsed()) {
        casc_fastpath_bench_opts opts{};
        opts.object_bytes = object_bytes;
        opts.policy = policy.c_str();
        opts.events = events;
        opts.workers = workers;
        opts.csv_path = csv.empty() ? nullptr : csv.c_str();
        char* summary = nullptr;
        casc_status st = casc_bench_fastpath(&opts, &summary);
        if (st != CASC_OK) return die("bench fastpath", st);
        std::printf("%s\n", summary);
        casc_string_free(summary);
        return 0;
    }

    std::fprintf(stderr, "no subcommand\n");
    return 1;
}
