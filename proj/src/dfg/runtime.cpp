#include "dfg/runtime.hpp"

#include "core/debug.hpp"

namespace cascade {

Status LambdaContext::emit(const PayloadPtr& payload, const std::string& suffix) {
    if (vertex_.out_edges.empty())
        return Status::error(Code::NoOutEdges, "vertex " + vertex_.id + " has no out-edges");
    for (const auto& edge : vertex_.out_edges) {
        std::string key = edge.to_prefix + "/" + suffix;
        switch (edge.put) {
        case EdgePutType::Trigger: {
            Status st = store_.api_trigger_put(key, payload);
            if (!st.ok()) return st;
            break;
        }
        case EdgePutType::Volatile: {
            auto res = store_.api_put(key, payload, PutKind::Volatile);
            if (!res.ok()) return res.status();
            break;
        }
        case EdgePutType::Persistent: {
            auto res = store_.api_put(key, payload, PutKind::Persistent);
            if (!res.ok()) return res.status();
            break;
        }
        }
    }
    return Status::success();
}

Status DfgRuntime::instantiate(DfgDescriptor dfg, const LambdaRegistry& registry) {
    auto shared = std::make_shared<const DfgDescriptor>(std::move(dfg));
    size_t added = 0;
    for (const DfgVertex& vertex : shared->vertices) {
        // Pool resolution was validated by load_dfg; re-derive the pool here.
        const PoolDescriptor* pool = nullptr;
        for (const auto& p : store_.api_pools().pools())
            if (is_path_prefix(p.path, vertex.prefix))
                if (pool == nullptr || p.path.size() > pool->path.size()) pool = &p;
        if (pool == nullptr)
            return Status::error(Code::UnknownPool, "vertex " + vertex.id + " prefix " +
                                                        vertex.prefix + " has no pool");
        if (!store_.api_hosts_pool(pool->path)) continue;

        const UserLambda* fn = registry.find(vertex.lambda_id);
        if (fn == nullptr)
            return Status::error(Code::UnknownLambda, vertex.lambda_id);

        // The wrapper keeps the descriptor alive for the vertex reference.
        UserLambda user = *fn;
        const DfgVertex* vptr = &vertex;
        auto keep = shared;
        LambdaFn wrapped = [this, user, vptr, keep](const UpcallEvent& ev) {
            LambdaContext ctx(store_, *vptr);
            user(ctx, ev);
        };
        Status st = store_.api_register({vertex.lambda_id, vertex.prefix, vertex.policy},
                                        std::move(wrapped));
        if (!st.ok()) return st;
        ++added;
    }
    dfg_ = shared;
    registrations_ += added;
    return Status::success();
}

void register_builtin_lambdas(LambdaRegistry& registry) {
    (void)registry.add("noop", [](LambdaContext&, const UpcallEvent&) {});
    (void)registry.add("relay", [](LambdaContext& ctx, const UpcallEvent& ev) {
        if (ctx.vertex().out_edges.empty()) return;  // terminal stage
        auto key = ctx.pools().parse_key(ev.object->key);
        if (!key.ok()) {
            CASC_WARN("dfg", "relay got unparseable key %s", ev.object->key.c_str());
            return;
        }
        Status st = ctx.emit(ev.object->payload, key->suffix);
        if (!st.ok())
            CASC_WARN("dfg", "relay emit from %s failed: %s", ev.object->key.c_str(),
                      st.to_string().c_str());
    });
}

}  // namespace cascade
