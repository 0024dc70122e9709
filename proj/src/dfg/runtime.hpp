#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>

#include "dfg/descriptor.hpp"
#include "fastpath/dispatcher.hpp"
#include "service/types.hpp"

namespace cascade {

class LambdaContext;

// Developer-facing handler: upcalled with the matched object and a context
// bound to the vertex for the duration of the call.
using UserLambda = std::function<void(LambdaContext&, const UpcallEvent&)>;

// Process-local name -> callable table, populated at startup.
class LambdaRegistry {
  public:
    Status add(const std::string& name, UserLambda fn) {
        if (fns_.count(name)) return Status::error(Code::DuplicateRegistration, name);
        fns_.emplace(name, std::move(fn));
        return Status::success();
    }
    const UserLambda* find(const std::string& name) const {
        auto it = fns_.find(name);
        return it == fns_.end() ? nullptr : &it->second;
    }
    std::set<std::string> names() const {
        std::set<std::string> out;
        for (const auto& [name, fn] : fns_) out.insert(name);
        return out;
    }

  private:
    std::map<std::string, UserLambda> fns_;
};

// What a lambda may do to the store; the node service implements it.
class StoreApi {
  public:
    virtual ~StoreApi() = default;
    virtual Result<PutResult> api_put(const std::string& key, PayloadPtr payload, PutKind kind) = 0;
    virtual Status api_trigger_put(const std::string& key, PayloadPtr payload) = 0;
    virtual Result<GetResult> api_get(const std::string& key, bool allow_cached) = 0;
    virtual Result<GetResult> api_get_by_version(const std::string& key, uint64_t version) = 0;
    virtual Result<GetResult> api_get_by_time(const std::string& key, uint64_t ts_us) = 0;
    virtual Status api_register(LambdaRegistration reg, LambdaFn fn) = 0;
    virtual bool api_hosts_pool(const std::string& pool_path) const = 0;
    virtual const PoolRegistry& api_pools() const = 0;
};

// Valid only for the duration of one upcall.
class LambdaContext {
  public:
    LambdaContext(StoreApi& store, const DfgVertex& vertex) : store_(store), vertex_(vertex) {}

    Result<GetResult> get_current(const std::string& key, bool allow_cached = false) {
        return store_.api_get(key, allow_cached);
    }
    Result<GetResult> get_by_version(const std::string& key, uint64_t version) {
        return store_.api_get_by_version(key, version);
    }
    Result<GetResult> get_by_time(const std::string& key, uint64_t ts_us) {
        return store_.api_get_by_time(key, ts_us);
    }
    Result<PutResult> put(const std::string& key, PayloadPtr payload,
                          PutKind kind = PutKind::PoolDefault) {
        return store_.api_put(key, std::move(payload), kind);
    }
    Status trigger_put(const std::string& key, PayloadPtr payload) {
        return store_.api_trigger_put(key, std::move(payload));
    }

    // Performs each out-edge's configured put with key = prefix + '/' + suffix.
    Status emit(const PayloadPtr& payload, const std::string& suffix);

    const DfgVertex& vertex() const { return vertex_; }
    const PoolRegistry& pools() const { return store_.api_pools(); }

  private:
    StoreApi& store_;
    const DfgVertex& vertex_;
};

// Binds DFG vertices to the local fast path: one registration per vertex on
// every node hosting a member of the vertex's pool.
class DfgRuntime {
  public:
    explicit DfgRuntime(StoreApi& store) : store_(store) {}

    Status instantiate(DfgDescriptor dfg, const LambdaRegistry& registry);

    const DfgDescriptor* descriptor() const { return dfg_ ? dfg_.get() : nullptr; }
    size_t registrations() const { return registrations_; }

  private:
    StoreApi& store_;
    std::shared_ptr<const DfgDescriptor> dfg_;
    size_t registrations_ = 0;
};

// Stock lambdas: "noop" (does nothing) and "relay" (emits the received
// payload to the vertex's out-edges under the same key suffix).
void register_builtin_lambdas(LambdaRegistry& registry);

}  // namespace cascade
