#pragma once

#include <string>
#include <vector>

#include "service/client.hpp"
#include "service/config.hpp"

namespace cascade {

struct PercentileStats {
    double p50_us = 0;
    double p90_us = 0;
    double p99_us = 0;
    double mean_us = 0;
    uint64_t count = 0;
};
PercentileStats percentile_stats(std::vector<uint64_t> ns_values);

/*
    Raw put-bench CSV, one row per sample:
      op_id,op_type,object_bytes,send_ns,e2e_ns,resident_ns,submit_ns,
      multicast_ns,processing_ns,persistence_ns,status
    send_ns is the issuing client's monotonic clock; submit_ns is
    e2e_ns - resident_ns (the transport round trip outside the server).
*/
struct PutSample {
    uint64_t op_id = 0;
    uint64_t send_ns = 0;
    uint64_t e2e_ns = 0;
    PutTiming timing;
    uint16_t status = 0;
};

struct PutBenchOptions {
    std::string op = "vola";  // trig | vola | pers
    size_t object_bytes = 10 * 1024;
    double rate = 1000;  // offered ops/s across all clients
    uint64_t duration_ms = 3000;
    uint32_t clients = 1;
    std::string key_prefix = "/bench/data";
    uint32_t keys = 16;  // distinct keys, round-robin
    std::string csv_path;
    bool calibrate = true;  // 10%-rate pass for the saturation heuristic
};

struct PutBenchReport {
    std::string op;
    size_t object_bytes = 0;
    double offered_rate = 0;
    double achieved_send_rate = 0;
    double achieved_completion_rate = 0;
    uint64_t completed = 0;
    uint64_t errors = 0;
    PercentileStats e2e;
    double submit_mean_us = 0;
    double multicast_mean_us = 0;
    double processing_mean_us = 0;
    double persistence_mean_us = 0;
    double calibration_p99_us = 0;
    bool saturated = false;

    std::string summary_line() const;
};

Result<PutBenchReport> run_put_bench(const ServiceConfig& client_cfg, const PutBenchOptions& opts);

struct PipelineBenchOptions {
    uint32_t stages = 4;
    std::string edge = "trigger";  // trigger | volatile
    size_t object_bytes = 10 * 1024;
    double rate = 200;     // latency-phase offered rate
    uint32_t count = 400;  // latency-phase injections
    bool measure_throughput = true;
    uint64_t throughput_ms = 2000;
    std::string csv_path;
};

struct PipelineBenchReport {
    uint32_t stages = 0;
    std::string edge;
    size_t object_bytes = 0;
    uint64_t injected = 0;
    uint64_t completed = 0;
    PercentileStats e2e;
    std::vector<double> stage_mean_us;  // arrival at stage i relative to send
    double throughput_ops = 0;          // closed-loop sustainable completion rate
    std::string summary_line() const;
};

// Self-hosted: builds a loopback cluster with one pool per stage (three-way
// replicated), no-op relay lambdas between stages, and a counting sink.
Result<PipelineBenchReport> run_pipeline_bench(const PipelineBenchOptions& opts);

struct FastpathBenchOptions {
    size_t object_bytes = 10 * 1024;
    std::string policy = "round_robin";  // round_robin | fifo_by_key
    uint32_t events = 20'000;
    uint32_t workers = 2;
    std::string csv_path;
};

struct FastpathBenchReport {
    std::string policy;
    size_t object_bytes = 0;
    uint64_t events = 0;
    PercentileStats enqueue;          // dispatcher match + queue insert
    PercentileStats queue_wait;       // enqueue -> worker pickup
    PercentileStats dequeue_to_done;  // pickup -> lambda returned
    // trie cost: per depth 1..8, mean ns per match and ns per level
    std::vector<double> trie_match_ns;
    double trie_ns_per_level = 0;
    std::string summary_line() const;
};

Result<FastpathBenchReport> run_fastpath_bench(const FastpathBenchOptions& opts);

class Node;

// Self-hosted put-bench cluster: three loopback nodes and one three-replica
// persistent pool "/bench/data". Stops the nodes and removes its scratch
// directory on destruction.
class SelfCluster {
  public:
    static Result<std::unique_ptr<SelfCluster>> start();
    ~SelfCluster();

    const ServiceConfig& client_cfg() const { return client_cfg_; }

  private:
    SelfCluster() = default;
    ServiceConfig client_cfg_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::string scratch_;
};

}  // namespace cascade
