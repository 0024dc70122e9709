#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "core/clock.hpp"
#include "core/hash.hpp"
#include "log/frontier.hpp"
#include "log/log_format.hpp"
#include "log/persistent_log.hpp"

using namespace cascade;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("cascade_log_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const char* name) const { return (path / name).string(); }
};

LogRecord record(const std::string& key, uint64_t version, uint64_t seq, uint64_t ts,
                 int64_t prev_offset, const std::string& body) {
    LogRecord rec;
    rec.key = key;
    rec.payload = to_bytes(body);
    rec.version = {version, seq, ts};
    rec.prev_offset = prev_offset;
    return rec;
}

}  // namespace

TEST_CASE("log record encode/decode round-trips and catches corruption") {
    LogRecord rec = record("/p/k", 3, 17, 123456, 40, "payload-bytes");
    Bytes buf;
    encode_record(rec, buf);
    CHECK(buf.size() == rec.encoded_size());

    auto dec = decode_record(buf.data(), buf.size());
    REQUIRE(dec.outcome == DecodeOutcome::Ok);
    CHECK(dec.record.key == rec.key);
    CHECK(dec.record.payload == rec.payload);
    CHECK(dec.record.version == rec.version);
    CHECK(dec.record.prev_offset == 40);

    // Truncated: every shorter length reads as incomplete, never as valid.
    for (size_t len : {size_t(0), size_t(10), buf.size() - 1})
        CHECK(decode_record(buf.data(), len).outcome == DecodeOutcome::Incomplete);

    Bytes bad = buf;
    bad[kLogRecordHeaderSize + 1] ^= 0xff;
    CHECK(decode_record(bad.data(), bad.size()).outcome == DecodeOutcome::BadChecksum);
}

TEST_CASE("single append on an idle log syncs exactly once") {
    TempDir dir;
    auto log = PersistentLog::open({dir.file("a.log")});
    REQUIRE(log.ok());
    auto off = log.value()->append(record("/p/k", 0, 1, 1000, -1, "x"));
    REQUIRE(off.ok());
    CHECK(off.value() == 0);
    REQUIRE(log.value()->wait_durable(1, 2'000'000));
    auto counters = log.value()->counters();
    CHECK(counters.sync_calls == 1);
    CHECK(counters.records_appended == 1);
}

TEST_CASE("appends arriving faster than sync are batched") {
    TempDir dir;
    auto log = PersistentLog::open({dir.file("a.log")});
    REQUIRE(log.ok());
    int64_t expected_offset = 0;
    for (uint64_t i = 1; i <= 100; ++i) {
        auto rec = record("/p/k", i - 1, i, 1000 + i, -1, "payload" + std::to_string(i));
        auto off = log.value()->append(rec);
        REQUIRE(off.ok());
        CHECK(off.value() == expected_offset);
        expected_offset += static_cast<int64_t>(rec.encoded_size());
    }
    REQUIRE(log.value()->wait_durable(100, 2'000'000));
    auto counters = log.value()->counters();
    CHECK(counters.records_appended == 100);
    CHECK(counters.sync_calls <= 100);
    CHECK(counters.sync_calls <= 50);  // 1ms batching window actually batches

    // Put path writes each record's bytes exactly once.
    CHECK(counters.bytes_written == static_cast<uint64_t>(expected_offset));
    CHECK(counters.write_calls <= counters.records_appended);
}

TEST_CASE("append rejects out-of-order sequence numbers") {
    TempDir dir;
    auto log = PersistentLog::open({dir.file("a.log")});
    REQUIRE(log.ok());
    REQUIRE(log.value()->append(record("/p/k", 0, 2, 1000, -1, "x")).ok());
    CHECK_THROWS_AS((void)log.value()->append(record("/p/k", 1, 2, 1001, -1, "y")),
                    std::logic_error);
    CHECK_THROWS_AS((void)log.value()->append(record("/p/k", 1, 1, 1001, -1, "y")),
                    std::logic_error);
    // Gaps are fine: seqs in between were applied without logging.
    CHECK(log.value()->append(record("/p/k", 1, 9, 1001, -1, "y")).ok());
}

TEST_CASE("append reports LogFull when the size budget is exceeded") {
    TempDir dir;
    LogOptions opts{dir.file("a.log")};
    opts.size_budget_bytes = 128;
    auto log = PersistentLog::open(opts);
    REQUIRE(log.ok());
    REQUIRE(log.value()->append(record("/p/k", 0, 1, 1000, -1, "small")).ok());
    auto res = log.value()->append(record("/p/k", 1, 2, 1001, -1, std::string(200, 'x')));
    CHECK(res.status().is(Code::LogFull));
}

TEST_CASE("read_at fetches staged records by forcing a flush") {
    TempDir dir;
    LogOptions opts{dir.file("a.log")};
    opts.flush_delay_us = 60'000'000;  // effectively never on its own
    auto log = PersistentLog::open(opts);
    REQUIRE(log.ok());
    auto off = log.value()->append(record("/p/k", 0, 1, 1000, -1, "fresh"));
    REQUIRE(off.ok());
    auto rec = log.value()->read_at(off.value());
    REQUIRE(rec.ok());
    CHECK(rec->payload == to_bytes("fresh"));
}

TEST_CASE("recovery: clean shutdown restores identical state") {
    TempDir dir;
    std::string path = dir.file("a.log");
    std::vector<std::pair<std::string, std::string>> contents = {
        {"/p/a", "a0"}, {"/p/b", "b0"}, {"/p/a", "a1"}, {"/p/c", "c0"}, {"/p/a", "a2"}};
    {
        auto log = PersistentLog::open({path});
        REQUIRE(log.ok());
        std::map<std::string, std::pair<uint64_t, int64_t>> heads;  // key -> (next version, prev off)
        uint64_t seq = 0;
        for (const auto& [key, body] : contents) {
            auto& [next_version, prev] = heads[key];
            auto off = log.value()->append(record(key, next_version, ++seq, 1000 + seq,
                                                  next_version == 0 ? -1 : prev, body));
            REQUIRE(off.ok());
            prev = off.value();
            ++next_version;
        }
    }  // destructor drains and syncs

    auto log = PersistentLog::open({path});
    REQUIRE(log.ok());
    auto heads = log.value()->take_recovered_heads();
    REQUIRE(heads.size() == 3);
    std::map<std::string, LogRecord> by_key;
    for (auto& h : heads) by_key[h.record.key] = h.record;
    CHECK(by_key["/p/a"].payload == to_bytes("a2"));
    CHECK(by_key["/p/a"].version.per_key_version == 2);
    CHECK(by_key["/p/b"].payload == to_bytes("b0"));
    CHECK(by_key["/p/c"].payload == to_bytes("c0"));
    CHECK(log.value()->durable_seq() == 5);

    // Chain walk via prev offsets reaches every version of /p/a.
    auto rec = log.value()->read_at(by_key["/p/a"].prev_offset);
    REQUIRE(rec.ok());
    CHECK(rec->payload == to_bytes("a1"));
    rec = log.value()->read_at(rec->prev_offset);
    REQUIRE(rec.ok());
    CHECK(rec->payload == to_bytes("a0"));
    CHECK(rec->prev_offset == -1);
}

TEST_CASE("recovery: truncated final record is dropped, prior records kept") {
    TempDir dir;
    std::string path = dir.file("a.log");
    uint64_t full_size = 0;
    {
        auto log = PersistentLog::open({path});
        REQUIRE(log.ok());
        REQUIRE(log.value()->append(record("/p/a", 0, 1, 1000, -1, "first")).ok());
        auto off2 = log.value()->append(record("/p/a", 1, 2, 1001, 0, "second"));
        REQUIRE(off2.ok());
        REQUIRE(log.value()->wait_durable(2, 2'000'000));
        full_size = static_cast<uint64_t>(off2.value()) +
                    record("/p/a", 1, 2, 1001, 0, "second").encoded_size();
    }
    fs::resize_file(path, full_size - 5);  // cut into the final record

    auto log = PersistentLog::open({path});
    REQUIRE(log.ok());
    auto heads = log.value()->take_recovered_heads();
    REQUIRE(heads.size() == 1);
    CHECK(heads[0].record.payload == to_bytes("first"));
    CHECK(log.value()->durable_seq() == 1);
}

TEST_CASE("recovery: empty file yields empty state") {
    TempDir dir;
    auto log = PersistentLog::open({dir.file("fresh.log")});
    REQUIRE(log.ok());
    CHECK(log.value()->take_recovered_heads().empty());
    CHECK(log.value()->durable_seq() == 0);
}

TEST_CASE("recovery: corrupt record 0 is CorruptLog") {
    TempDir dir;
    std::string path = dir.file("a.log");
    {
        auto log = PersistentLog::open({path});
        REQUIRE(log.ok());
        REQUIRE(log.value()->append(record("/p/a", 0, 1, 1000, -1, "first")).ok());
        REQUIRE(log.value()->wait_durable(1, 2'000'000));
    }
    {
        // Flip a payload byte inside the (complete) first record.
        FILE* f = fopen(path.c_str(), "r+b");
        REQUIRE(f != nullptr);
        fseek(f, kLogRecordHeaderSize + 2, SEEK_SET);
        fputc('X', f);
        fclose(f);
    }
    auto log = PersistentLog::open({path});
    CHECK(log.status().is(Code::CorruptLog));
}

TEST_CASE("crash_stop abandons the staging buffer") {
    TempDir dir;
    std::string path = dir.file("a.log");
    {
        LogOptions opts{path};
        opts.flush_delay_us = 60'000'000;
        auto log = PersistentLog::open(opts);
        REQUIRE(log.ok());
        REQUIRE(log.value()->append(record("/p/a", 0, 1, 1000, -1, "synced")).ok());
        REQUIRE(log.value()->wait_durable(1, 2'000'000));
        REQUIRE(log.value()->append(record("/p/a", 1, 2, 1001, 0, "staged-only")).ok());
        log.value()->crash_stop();
    }
    auto log = PersistentLog::open({path});
    REQUIRE(log.ok());
    auto heads = log.value()->take_recovered_heads();
    REQUIRE(heads.size() == 1);
    CHECK(heads[0].record.payload == to_bytes("synced"));
}

TEST_CASE("time_to_version selects the newest version at or before t") {
    TempDir dir;
    auto log = PersistentLog::open({dir.file("a.log")});
    REQUIRE(log.ok());
    // Versions at t = 100000, 110000, 120000 us.
    int64_t prev = -1;
    uint64_t seq = 0;
    for (auto [v, ts] : std::initializer_list<std::pair<uint64_t, uint64_t>>{
             {0, 100'000}, {1, 110'000}, {2, 120'000}}) {
        auto off = log.value()->append(record("/p/k", v, ++seq, ts, prev, "v" + std::to_string(v)));
        REQUIRE(off.ok());
        prev = off.value();
    }
    REQUIRE(log.value()->wait_durable(3, 2'000'000));
    log.value()->set_frontier(3, 120'000);

    auto v = log.value()->time_to_version("/p/k", 115'000);
    REQUIRE(v.ok());
    CHECK(v.value() == 1);

    v = log.value()->time_to_version("/p/k", 110'000);  // boundary inclusive
    REQUIRE(v.ok());
    CHECK(v.value() == 1);

    v = log.value()->time_to_version("/p/k", 120'000);
    REQUIRE(v.ok());
    CHECK(v.value() == 2);

    CHECK(log.value()->time_to_version("/p/k", 99'999).status().is(Code::NotFound));
    CHECK(log.value()->time_to_version("/p/zzz", 115'000).status().is(Code::KeyNotFound));

    auto off = log.value()->offset_of_version("/p/k", 1);
    REQUIRE(off.ok());
    auto rec = log.value()->read_at(off.value());
    REQUIRE(rec.ok());
    CHECK(rec->payload == to_bytes("v1"));
    CHECK(log.value()->offset_of_version("/p/k", 7).status().is(Code::VersionNotFound));
}

TEST_CASE("time_to_version equals a brute-force scan of the raw log file") {
    TempDir dir;
    std::string path = dir.file("oracle.log");
    auto log = PersistentLog::open({path});
    REQUIRE(log.ok());

    std::mt19937 rng(11);
    const int keys = 10, versions = 1000;
    std::vector<uint64_t> next_version(keys, 0);
    std::vector<int64_t> prev_off(keys, -1);
    uint64_t ts = 1'000'000, seq = 0;
    uint64_t max_ts = 0;
    for (int i = 0; i < versions; ++i) {
        int k = static_cast<int>(rng() % keys);
        ts += rng() % 50;  // non-decreasing, frequently equal
        std::string key = "/p/k" + std::to_string(k);
        auto off = log.value()->append(
            record(key, next_version[k], ++seq, ts, prev_off[k], "b" + std::to_string(i)));
        REQUIRE(off.ok());
        prev_off[k] = off.value();
        ++next_version[k];
        max_ts = ts;
    }
    REQUIRE(log.value()->wait_durable(versions, 5'000'000));
    log.value()->set_frontier(versions, max_ts);

    // Independent oracle: parse the raw file bytes directly.
    struct RawRec {
        std::string key;
        uint64_t version, ts;
    };
    std::vector<RawRec> raw;
    {
        FILE* f = fopen(path.c_str(), "rb");
        REQUIRE(f != nullptr);
        std::vector<uint8_t> bytes;
        fseek(f, 0, SEEK_END);
        bytes.resize(static_cast<size_t>(ftell(f)));
        fseek(f, 0, SEEK_SET);
        REQUIRE(fread(bytes.data(), 1, bytes.size(), f) == bytes.size());
        fclose(f);
        size_t pos = 0;
        while (pos < bytes.size()) {
            auto dec = decode_record(bytes.data() + pos, bytes.size() - pos);
            REQUIRE(dec.outcome == DecodeOutcome::Ok);
            raw.push_back({dec.record.key, dec.record.version.per_key_version,
                           dec.record.version.timestamp_us});
            pos += dec.encoded_size;
        }
        REQUIRE(raw.size() == versions);
    }
    auto oracle = [&](const std::string& key, uint64_t t) -> std::pair<bool, uint64_t> {
        bool found = false;
        uint64_t best = 0;
        for (const auto& r : raw) {
            if (r.key != key || r.ts > t) continue;
            if (!found || r.version > best) best = r.version;
            found = true;
        }
        return {found, best};
    };

    std::uniform_int_distribution<uint64_t> t_dist(999'990, max_ts + 10);
    for (int q = 0; q < 10'000; ++q) {
        std::string key = "/p/k" + std::to_string(rng() % keys);
        uint64_t t = t_dist(rng);
        if (q % 7 == 0) t = raw[rng() % raw.size()].ts;  // exact boundary cases
        if (t > max_ts) t = max_ts;                      // stay within the frontier
        auto [found, best] = oracle(key, t);
        auto got = log.value()->time_to_version(key, t);
        if (found) {
            REQUIRE(got.ok());
            CHECK(got.value() == best);
        } else {
            CHECK_FALSE(got.ok());
        }
    }
}

TEST_CASE("frontier waits wake when the frontier passes the timestamp") {
    TempDir dir;
    auto log = PersistentLog::open({dir.file("a.log")});
    REQUIRE(log.ok());
    CHECK_FALSE(log.value()->wait_frontier_ts(1000, 20'000));  // times out

    std::thread advancer([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        log.value()->set_frontier(5, 2000);
    });
    CHECK(log.value()->wait_frontier_ts(1000, 2'000'000));
    advancer.join();

    // Monotone: a stale frontier publication is ignored.
    log.value()->set_frontier(3, 1500);
    CHECK(log.value()->frontier().stable_seq == 5);
}

TEST_CASE("advance_frontier takes the minimum durable seq across replicas") {
    FrontierTracker tracker({1, 2, 3});
    tracker.note_timestamp(3, 300);
    tracker.note_timestamp(4, 400);
    tracker.note_timestamp(5, 500);

    CHECK_FALSE(tracker.advance(1, 5).has_value());  // acks (5,0,0): min still 0
    CHECK_FALSE(tracker.advance(3, 4).has_value());
    auto f = tracker.advance(2, 3);  // acks (5,3,4) -> stable 3
    REQUIRE(f.has_value());
    CHECK(f->stable_seq == 3);
    CHECK(f->stable_ts == 300);

    // Single replica: frontier equals its durable seq.
    FrontierTracker solo({7});
    solo.note_timestamp(2, 20);
    auto g = solo.advance(7, 2);
    REQUIRE(g.has_value());
    CHECK(g->stable_seq == 2);

    // No acks yet: frontier unchanged.
    FrontierTracker idle({1, 2});
    CHECK(idle.frontier().stable_seq == 0);
}

TEST_CASE("temporal index insertion happens off the append path") {
    // Appends stage under one lock while index publication takes another;
    // verify staging latency stays flat while the index grows large.
    TempDir dir;
    LogOptions opts{dir.file("a.log")};
    auto log = PersistentLog::open(opts);
    REQUIRE(log.ok());

    auto stage_burst = [&](uint64_t start_seq, int n) {
        uint64_t worst = 0;
        for (int i = 0; i < n; ++i) {
            auto rec = record("/p/k", start_seq + i - 1, start_seq + i, 1'000'000 + start_seq + i,
                              -1, "x");
            uint64_t t0 = mono_ns();
            REQUIRE(log.value()->append(rec).ok());
            worst = std::max(worst, mono_ns() - t0);
        }
        return worst;
    };

    uint64_t cold = stage_burst(1, 200);
    // Grow the index.
    for (int i = 0; i < 40; ++i) {
        stage_burst(201 + i * 1000, 1000);
        REQUIRE(log.value()->wait_durable(200 + (i + 1) * 1000, 10'000'000));
    }
    CHECK(log.value()->temporal_index_size() >= 40'000);
    uint64_t warm = stage_burst(40'201, 200);
    // Not a tight bound; the point is staging does not scale with index size.
    CHECK(warm < std::max<uint64_t>(cold * 50, 20'000'000));
}
