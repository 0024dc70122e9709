#include "dfg/descriptor.hpp"

#include <json.hpp>

namespace cascade {

using nlohmann::json;

const char* edge_put_type_name(EdgePutType t) {
    switch (t) {
    case EdgePutType::Trigger: return "trigger";
    case EdgePutType::Volatile: return "volatile";
    case EdgePutType::Persistent: return "persistent";
    }
    return "?";
}

const DfgVertex* DfgDescriptor::vertex(std::string_view id) const {
    for (const auto& v : vertices)
        if (v.id == id) return &v;
    return nullptr;
}

std::vector<DfgEdge> DfgDescriptor::all_edges() const {
    std::vector<DfgEdge> out;
    for (const auto& v : vertices)
        out.insert(out.end(), v.out_edges.begin(), v.out_edges.end());
    return out;
}

namespace {

// Longest registered pool prefixing `prefix`, or null.
const PoolDescriptor* pool_of_prefix(const PoolRegistry& pools, const std::string& prefix) {
    const PoolDescriptor* best = nullptr;
    for (const auto& p : pools.pools())
        if (is_path_prefix(p.path, prefix))
            if (best == nullptr || p.path.size() > best->path.size()) best = &p;
    return best;
}

}  // namespace

Result<DfgDescriptor> load_dfg(const std::string& json_text, const PoolRegistry& pools,
                               const std::set<std::string>& lambda_ids) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        return Status::error(Code::SchemaError, std::string("DFG is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) return Status::error(Code::SchemaError, "DFG root must be an object");

    DfgDescriptor dfg;

    if (j.contains("pools")) {
        if (!j["pools"].is_array())
            return Status::error(Code::SchemaError, "'pools' must be an array of pool paths");
        for (const auto& p : j["pools"]) {
            if (!p.is_string())
                return Status::error(Code::SchemaError, "'pools' entries must be strings");
            dfg.pools.push_back(p.get<std::string>());
        }
    }
    std::set<std::string> declared(dfg.pools.begin(), dfg.pools.end());
    for (const auto& path : declared)
        if (pools.find(path) == nullptr)
            return Status::error(Code::UnknownPool, "DFG pool " + path + " is not registered");

    auto declared_pool_of = [&](const std::string& prefix,
                                const std::string& what) -> Result<std::string> {
        const PoolDescriptor* pool = pool_of_prefix(pools, prefix);
        if (pool == nullptr)
            return Status::error(Code::UnknownPool,
                                 what + " prefix " + prefix + " resolves to no registered pool");
        if (declared.count(pool->path) == 0)
            return Status::error(Code::SchemaError, what + " prefix " + prefix + " uses pool " +
                                                        pool->path + " missing from 'pools'");
        return pool->path;
    };

    if (j.contains("vertices")) {
        if (!j["vertices"].is_array())
            return Status::error(Code::SchemaError, "'vertices' must be an array");
        for (const auto& v : j["vertices"]) {
            DfgVertex vertex;
            if (!v.contains("id") || !v["id"].is_string())
                return Status::error(Code::SchemaError, "vertex needs a string 'id'");
            vertex.id = v["id"].get<std::string>();
            if (!v.contains("lambda") || !v["lambda"].is_string())
                return Status::error(Code::SchemaError, "vertex " + vertex.id +
                                                            " needs a string 'lambda'");
            vertex.lambda_id = v["lambda"].get<std::string>();
            if (!v.contains("prefix") || !v["prefix"].is_string())
                return Status::error(Code::SchemaError,
                                     "vertex " + vertex.id + " needs a string 'prefix'");
            vertex.prefix = v["prefix"].get<std::string>();
            std::string policy = v.value("dispatch_policy", "round_robin");
            if (policy == "round_robin")
                vertex.policy = DispatchPolicy::RoundRobin;
            else if (policy == "fifo_by_key")
                vertex.policy = DispatchPolicy::FifoByKey;
            else
                return Status::error(Code::SchemaError, "vertex " + vertex.id +
                                                            ": unknown dispatch_policy '" + policy + "'");

            if (dfg.vertex(vertex.id) != nullptr)
                return Status::error(Code::SchemaError, "duplicate vertex id " + vertex.id);
            if (!split_path(vertex.prefix).ok())
                return Status::error(Code::SchemaError,
                                     "vertex " + vertex.id + " has a malformed prefix");
            auto pool = declared_pool_of(vertex.prefix, "vertex " + vertex.id);
            if (!pool.ok()) return pool.status();
            if (lambda_ids.count(vertex.lambda_id) == 0)
                return Status::error(Code::UnknownLambda, "vertex " + vertex.id +
                                                              " references unknown lambda '" +
                                                              vertex.lambda_id + "'");
            dfg.vertices.push_back(std::move(vertex));
        }
    }

    if (j.contains("edges")) {
        if (!j["edges"].is_array()) return Status::error(Code::SchemaError, "'edges' must be an array");
        for (const auto& e : j["edges"]) {
            DfgEdge edge;
            if (!e.contains("from") || !e["from"].is_string())
                return Status::error(Code::SchemaError, "edge needs a string 'from' vertex id");
            edge.from_vertex = e["from"].get<std::string>();
            if (!e.contains("to") || !e["to"].is_string())
                return Status::error(Code::SchemaError, "edge needs a string 'to' pool prefix");
            edge.to_prefix = e["to"].get<std::string>();
            std::string put = e.value("put", "trigger");
            if (put == "trigger")
                edge.put = EdgePutType::Trigger;
            else if (put == "volatile")
                edge.put = EdgePutType::Volatile;
            else if (put == "persistent")
                edge.put = EdgePutType::Persistent;
            else
                return Status::error(Code::SchemaError, "edge: unknown put type '" + put + "'");

            auto* from = const_cast<DfgVertex*>(dfg.vertex(edge.from_vertex));
            if (from == nullptr)
                return Status::error(Code::SchemaError,
                                     "edge references unknown vertex " + edge.from_vertex);
            if (!split_path(edge.to_prefix).ok())
                return Status::error(Code::SchemaError, "edge target " + edge.to_prefix +
                                                            " is a malformed prefix");
            if (edge.to_prefix == from->prefix)
                return Status::error(Code::SchemaError,
                                     "self-loop edge on vertex " + edge.from_vertex);
            auto pool = declared_pool_of(edge.to_prefix, "edge from " + edge.from_vertex);
            if (!pool.ok()) return pool.status();
            if (edge.put == EdgePutType::Persistent) {
                const PoolDescriptor* desc = pools.find(pool.value());
                if (desc->persistence != Persistence::Persistent)
                    return Status::error(Code::SchemaError,
                                         "edge from " + edge.from_vertex +
                                             " uses a persistent put into volatile pool " +
                                             desc->path);
            }
            from->out_edges.push_back(std::move(edge));
        }
    }

    return dfg;
}

std::string serialize_dfg(const DfgDescriptor& dfg) {
    json j;
    j["pools"] = dfg.pools;
    j["vertices"] = json::array();
    for (const auto& v : dfg.vertices) {
        j["vertices"].push_back({{"id", v.id},
                                 {"lambda", v.lambda_id},
                                 {"prefix", v.prefix},
                                 {"dispatch_policy", dispatch_policy_name(v.policy)}});
    }
    j["edges"] = json::array();
    for (const auto& v : dfg.vertices)
        for (const auto& e : v.out_edges)
            j["edges"].push_back(
                {{"from", e.from_vertex}, {"to", e.to_prefix}, {"put", edge_put_type_name(e.put)}});
    return j.dump(2);
}

}  // namespace cascade
