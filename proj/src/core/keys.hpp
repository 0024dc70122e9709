#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "core/status.hpp"

namespace cascade {

enum class Persistence : uint8_t { Volatile = 0, Persistent = 1 };
enum class ShardingPolicy : uint8_t { HashFullKey = 0, HashFirstSuffixComponent = 1 };

const char* persistence_name(Persistence p);
const char* sharding_policy_name(ShardingPolicy p);

// A pool is a namespace of keys under a path prefix, with shared replication,
// persistence and sharding settings.
struct PoolDescriptor {
    std::string path;
    Persistence persistence = Persistence::Volatile;
    uint32_t replication_factor = 1;
    uint32_t shard_count = 1;
    ShardingPolicy sharding_policy = ShardingPolicy::HashFullKey;
};

// A key split at its pool boundary. full key = pool_path + "/" + suffix.
struct ObjectKey {
    std::string pool_path;
    std::string suffix;

    std::string full() const { return pool_path + "/" + suffix; }
    std::string_view first_suffix_component() const;

    bool operator==(const ObjectKey&) const = default;
};

// Dual counters assigned at ordered delivery. per_key_version counts puts to
// one key; shard_seq is the multicast sequence within the home shard.
struct Version {
    uint64_t per_key_version = 0;
    uint64_t shard_seq = 0;
    uint64_t timestamp_us = 0;

    bool operator==(const Version&) const = default;
};

// Splits a path into components, enforcing the key invariants: leading '/',
// no empty component, no '.' or '..'.
Result<std::vector<std::string_view>> split_path(std::string_view raw);

// True when `prefix` is a whole-component prefix of `path` (so "/cms/top"
// does not prefix "/cms/topics/T").
bool is_path_prefix(std::string_view prefix, std::string_view path);

class PoolRegistry {
  public:
    // Rejects duplicate paths and prefix-nested pools.
    Status add(PoolDescriptor pool);

    // Splits a raw key at the unique longest registered pool prefix.
    Result<ObjectKey> parse_key(std::string_view raw) const;

    const PoolDescriptor* find(std::string_view pool_path) const;
    const std::vector<PoolDescriptor>& pools() const { return pools_; }
    bool empty() const { return pools_.empty(); }

  private:
    std::vector<PoolDescriptor> pools_;
};

// Deterministic home-shard mapping. Hashes the policy-selected portion of the
// suffix so that, under HashFirstSuffixComponent, related keys land together.
uint32_t map_key_to_shard(const ObjectKey& key, const PoolDescriptor& pool);

}  // namespace cascade
