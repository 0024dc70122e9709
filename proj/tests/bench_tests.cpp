#include <doctest.h>

#include <fstream>

#include "bench/bench.hpp"
#include "cluster_util.hpp"

using namespace cascade;
using namespace cascade::testing;

TEST_CASE("percentile stats") {
    std::vector<uint64_t> ns;
    for (int i = 1; i <= 100; ++i) ns.push_back(static_cast<uint64_t>(i) * 1000);
    auto s = percentile_stats(ns);
    CHECK(s.count == 100);
    CHECK(s.p50_us == doctest::Approx(50).epsilon(0.05));
    CHECK(s.p99_us == doctest::Approx(99).epsilon(0.03));
    CHECK(s.mean_us == doctest::Approx(50.5));
    CHECK(percentile_stats({}).count == 0);
}

TEST_CASE("put bench paces the offered rate and emits the frozen CSV schema") {
    TestCluster cluster(3, {make_pool("/bench/data", Persistence::Persistent, 3, 1, 3)});
    ScratchDir dir("bench_csv");

    PutBenchOptions opts;
    opts.op = "vola";
    opts.object_bytes = 2048;
    opts.rate = 400;
    opts.duration_ms = 1200;
    opts.csv_path = dir.file("raw.csv");
    opts.calibrate = false;
    auto report = run_put_bench(cluster.client_config(), opts);
    REQUIRE(report.ok());
    CHECK(report->errors == 0);
    CHECK(report->completed > 300);

    // Open-loop pacing within 2% below saturation.
    CHECK(report->achieved_send_rate == doctest::Approx(opts.rate).epsilon(0.02));

    // Component sanity: multicast + processing never exceed e2e.
    CHECK(report->multicast_mean_us + report->processing_mean_us <=
          report->e2e.mean_us * 1.10);
    CHECK(report->persistence_mean_us == 0);  // volatile puts have no persistence stage

    std::ifstream csv(opts.csv_path);
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "op_id,op_type,object_bytes,send_ns,e2e_ns,resident_ns,submit_ns,multicast_ns,"
          "processing_ns,persistence_ns,status");
    size_t rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == report->completed + report->errors);
}

TEST_CASE("put bench components track the op type") {
    TestCluster cluster(3, {make_pool("/bench/data", Persistence::Persistent, 3, 1, 3)});

    PutBenchOptions opts;
    opts.object_bytes = 2048;
    opts.rate = 150;
    opts.duration_ms = 900;
    opts.calibrate = false;

    opts.op = "pers";
    auto pers = run_put_bench(cluster.client_config(), opts);
    REQUIRE(pers.ok());
    REQUIRE(pers->errors == 0);
    // Persistence dominates persistent puts (it holds the 1ms batching window).
    CHECK(pers->persistence_mean_us > pers->multicast_mean_us);
    CHECK(pers->persistence_mean_us > pers->e2e.mean_us * 0.4);

    opts.op = "trig";
    auto trig = run_put_bench(cluster.client_config(), opts);
    REQUIRE(trig.ok());
    REQUIRE(trig->errors == 0);
    CHECK(trig->multicast_mean_us == 0);  // trigger puts have only the submit component
    CHECK(trig->e2e.p50_us < pers->e2e.p50_us);
}

TEST_CASE("pipeline bench completes every injected object and reports stage means") {
    PipelineBenchOptions opts;
    opts.stages = 2;
    opts.edge = "trigger";
    opts.object_bytes = 1024;
    opts.rate = 150;
    opts.count = 120;
    opts.measure_throughput = false;
    auto report = run_pipeline_bench(opts);
    REQUIRE(report.ok());
    CHECK(report->injected == 120);
    CHECK(report->completed == 120);
    REQUIRE(report->stage_mean_us.size() == 2);
    CHECK(report->stage_mean_us[0] > 0);
    CHECK(report->stage_mean_us[1] > report->stage_mean_us[0]);  // arrivals ordered by stage
    CHECK(report->e2e.count == 120);
}

TEST_CASE("fastpath bench reports dispatch components and trie cost") {
    FastpathBenchOptions opts;
    opts.object_bytes = 4096;
    opts.events = 5000;
    opts.workers = 2;

    opts.policy = "round_robin";
    auto rr = run_fastpath_bench(opts);
    REQUIRE(rr.ok());
    CHECK(rr->events == 5000);
    CHECK(rr->enqueue.count == 5000);
    CHECK(rr->enqueue.p50_us < 50);

    opts.policy = "fifo_by_key";
    auto fifo = run_fastpath_bench(opts);
    REQUIRE(fifo.ok());

    // The two policies should not differ meaningfully in dispatch cost.
    CHECK(fifo->enqueue.p50_us < std::max(1.0, rr->enqueue.p50_us * 8));
    CHECK(rr->enqueue.p50_us < std::max(1.0, fifo->enqueue.p50_us * 8));

    REQUIRE(rr->trie_match_ns.size() == 8);
    CHECK(rr->trie_ns_per_level > 0);
    CHECK(rr->trie_ns_per_level < 1000);  // desk target: < 1us per level
    // Match cost grows with depth, roughly linearly.
    CHECK(rr->trie_match_ns[7] >= rr->trie_match_ns[0]);
}

TEST_CASE("put bench rejects bad options") {
    ServiceConfig cfg;
    cfg.peers = {{0, "127.0.0.1", 1}};
    PutBenchOptions opts;
    opts.op = "nope";
    CHECK(run_put_bench(cfg, opts).status().is(Code::ConfigError));
    PipelineBenchOptions popts;
    popts.edge = "smoke-signals";
    CHECK(run_pipeline_bench(popts).status().is(Code::ConfigError));
    FastpathBenchOptions fopts;
    fopts.policy = "psychic";
    CHECK(run_fastpath_bench(fopts).status().is(Code::ConfigError));
}
