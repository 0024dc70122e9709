#include <doctest.h>

#include <random>

#include "core/hash.hpp"
#include "core/keys.hpp"

using namespace cascade;

namespace {

PoolRegistry make_registry(std::initializer_list<PoolDescriptor> pools) {
    PoolRegistry reg;
    for (const auto& p : pools) REQUIRE(reg.add(p).ok());
    return reg;
}

}  // namespace

TEST_CASE("stable_hash matches FNV-1a reference values") {
    // Offset basis by definition; "a" hand-computed via one FNV-1a round.
    CHECK(stable_hash("", 0) == 0xcbf29ce484222325ull);
    CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cull);
    CHECK(stable_hash("hello") == stable_hash("hello"));
}

TEST_CASE("split_path validates key structure") {
    CHECK(split_path("/a/b").ok());
    CHECK(split_path("a/b").status().is(Code::MalformedKey));
    CHECK(split_path("/a//b").status().is(Code::MalformedKey));
    CHECK(split_path("/a/./b").status().is(Code::MalformedKey));
    CHECK(split_path("/a/../b").status().is(Code::MalformedKey));
    CHECK(split_path("/").status().is(Code::MalformedKey));
}

TEST_CASE("parse_key splits at the pool boundary") {
    auto reg = make_registry({{"/cms/topics", Persistence::Volatile, 1, 1, ShardingPolicy::HashFullKey}});

    auto key = reg.parse_key("/cms/topics/T");
    REQUIRE(key.ok());
    CHECK(key->pool_path == "/cms/topics");
    CHECK(key->suffix == "T");
    CHECK(key->full() == "/cms/topics/T");

    CHECK(reg.parse_key("/cms/topics").status().is(Code::MalformedKey));  // empty suffix
    CHECK(reg.parse_key("/unknown/x").status().is(Code::NoSuchPool));
    CHECK(reg.parse_key("/cms/topicsX/T").status().is(Code::NoSuchPool));  // component-wise prefix
    CHECK(reg.parse_key("bad").status().is(Code::MalformedKey));
}

TEST_CASE("pool registry rejects nesting and duplicates") {
    PoolRegistry reg;
    REQUIRE(reg.add({"/a/b", Persistence::Volatile, 1, 1, ShardingPolicy::HashFullKey}).ok());
    CHECK(reg.add({"/a/b", Persistence::Volatile, 1, 1, ShardingPolicy::HashFullKey})
              .is(Code::ConfigError));
    CHECK(reg.add({"/a", Persistence::Volatile, 1, 1, ShardingPolicy::HashFullKey})
              .is(Code::ConfigError));
    CHECK(reg.add({"/a/b/c", Persistence::Volatile, 1, 1, ShardingPolicy::HashFullKey})
              .is(Code::ConfigError));
    CHECK(reg.add({"/a/c", Persistence::Volatile, 0, 1, ShardingPolicy::HashFullKey})
              .is(Code::ConfigError));
    REQUIRE(reg.add({"/ab", Persistence::Volatile, 1, 1, ShardingPolicy::HashFullKey}).ok());
}

TEST_CASE("map_key_to_shard is deterministic and policy-driven") {
    PoolDescriptor one{"/p", Persistence::Volatile, 1, 1, ShardingPolicy::HashFullKey};
    PoolDescriptor four{"/p", Persistence::Volatile, 1, 4, ShardingPolicy::HashFullKey};
    PoolDescriptor grouped{"/p", Persistence::Volatile, 1, 8, ShardingPolicy::HashFirstSuffixComponent};

    CHECK(map_key_to_shard({"/p", "anything/at/all"}, one) == 0);
    // stable_hash("a") = 0xaf63dc4c8601ec8c, mod 4 = 0.
    CHECK(map_key_to_shard({"/p", "a"}, four) == 0);
    CHECK(map_key_to_shard({"/p", "cam0/f1"}, grouped) == map_key_to_shard({"/p", "cam0/f2"}, grouped));
    CHECK(map_key_to_shard({"/p", "x"}, four) == map_key_to_shard({"/p", "x"}, four));
}

TEST_CASE("parse_key round-trips composed keys and matches brute-force prefix scan") {
    auto reg = make_registry({
        {"/p", Persistence::Volatile, 1, 1, ShardingPolicy::HashFullKey},
        {"/q/deep/pool", Persistence::Volatile, 1, 1, ShardingPolicy::HashFullKey},
        {"/q/other", Persistence::Persistent, 3, 2, ShardingPolicy::HashFullKey},
    });

    std::mt19937 rng(7);
    std::uniform_int_distribution<int> comp_len(1, 8), comps(1, 4), pick(0, 2);
    const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789_-";
    auto random_component = [&] {
        std::string s;
        int n = comp_len(rng);
        for (int i = 0; i < n; ++i) s += alphabet[rng() % (sizeof(alphabet) - 1)];
        return s;
    };

    for (int iter = 0; iter < 2000; ++iter) {
        const PoolDescriptor& pool = reg.pools()[pick(rng)];
        std::string suffix = random_component();
        for (int i = 1, n = comps(rng); i < n; ++i) suffix += "/" + random_component();

        std::string raw = pool.path + "/" + suffix;
        auto key = reg.parse_key(raw);
        REQUIRE(key.ok());
        CHECK(key->pool_path == pool.path);
        CHECK(key->suffix == suffix);
        CHECK(key->full() == raw);

        // Longest-prefix resolution equals a brute-force scan.
        const PoolDescriptor* best = nullptr;
        for (const auto& p : reg.pools())
            if (is_path_prefix(p.path, raw) && (best == nullptr || p.path.size() > best->path.size()))
                best = &p;
        REQUIRE(best != nullptr);
        CHECK(best->path == key->pool_path);
    }
}
