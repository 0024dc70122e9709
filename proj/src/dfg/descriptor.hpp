#pragma once

#include <set>
#include <string>
#include <vector>

#include "core/keys.hpp"
#include "core/status.hpp"
#include "fastpath/trie.hpp"

namespace cascade {

enum class EdgePutType : uint8_t { Trigger = 0, Volatile = 1, Persistent = 2 };

const char* edge_put_type_name(EdgePutType t);

struct DfgEdge {
    std::string from_vertex;
    std::string to_prefix;  // target pool prefix; emit appends '/' + suffix
    EdgePutType put = EdgePutType::Trigger;

    bool operator==(const DfgEdge&) const = default;
};

struct DfgVertex {
    std::string id;
    std::string lambda_id;
    std::string prefix;  // bound pool prefix
    DispatchPolicy policy = DispatchPolicy::RoundRobin;
    std::vector<DfgEdge> out_edges;
};

/*
    DFG JSON schema (field names frozen by golden-file tests):

    {
      "pools": ["/pipe/s1", "/pipe/s2"],
      "vertices": [
        {"id": "v1", "lambda": "relay", "prefix": "/pipe/s1",
         "dispatch_policy": "round_robin" | "fifo_by_key"}
      ],
      "edges": [
        {"from": "v1", "to": "/pipe/s2",
         "put": "trigger" | "volatile" | "persistent"}   // default "trigger"
      ]
    }

    Every pool mentioned by a vertex prefix or edge target must appear in
    "pools", and every listed pool must be registered with the service.
*/
struct DfgDescriptor {
    std::vector<std::string> pools;
    std::vector<DfgVertex> vertices;

    const DfgVertex* vertex(std::string_view id) const;
    std::vector<DfgEdge> all_edges() const;
};

// Parses and validates against the registered pools and known lambda ids.
Result<DfgDescriptor> load_dfg(const std::string& json_text, const PoolRegistry& pools,
                               const std::set<std::string>& lambda_ids);

std::string serialize_dfg(const DfgDescriptor& dfg);

}  // namespace cascade
