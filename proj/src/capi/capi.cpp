#include "cascade/cascade.h"

#include <cstdlib>
#include <cstring>
#include <mutex>

#include "bench/bench.hpp"
#include "dfg/runtime.hpp"
#include "service/client.hpp"
#include "service/node.hpp"

using namespace cascade;

namespace {

thread_local std::string t_last_error;

casc_status fail(const Status& st) {
    t_last_error = st.to_string();
    return static_cast<casc_status>(st.code);
}

casc_status fail_arg(const char* what) {
    t_last_error = std::string("bad argument: ") + what;
    return CASC_ERR_BAD_ARGUMENT;
}

// Lambdas registered through the C API, shared by every node started in this
// process. Copied into each node at start, so register before starting.
std::mutex g_registry_mu;
std::shared_ptr<LambdaRegistry>& g_registry() {
    static std::shared_ptr<LambdaRegistry> reg = std::make_shared<LambdaRegistry>();
    return reg;
}

casc_version to_c(const Version& v) { return {v.per_key_version, v.shard_seq, v.timestamp_us}; }

}  // namespace

struct casc_node {
    std::unique_ptr<Node> impl;
};

struct casc_client {
    std::unique_ptr<Client> impl;
};

struct casc_object {
    Bytes data;
    casc_version version;
};

struct casc_lambda_ctx {
    LambdaContext* impl;
};

extern "C" {

const char* casc_status_name(casc_status status) {
    if (status == CASC_ERR_BAD_ARGUMENT) return "BadArgument";
    return code_name(static_cast<Code>(status));
}

const char* casc_last_error(void) { return t_last_error.c_str(); }

casc_status casc_node_start(const char* config_path, casc_node** node_out) {
    if (config_path == nullptr || node_out == nullptr) return fail_arg("config_path/node_out");
    auto cfg = ServiceConfig::from_file(config_path);
    if (!cfg.ok()) return fail(cfg.status());
    std::shared_ptr<LambdaRegistry> reg;
    {
        std::lock_guard lk(g_registry_mu);
        reg = g_registry();
    }
    auto node = Node::start(cfg.take(), std::move(reg));
    if (!node.ok()) return fail(node.status());
    *node_out = new casc_node{node.take()};
    return CASC_OK;
}

casc_status casc_node_start_json(const char* config_json, casc_node** node_out) {
    if (config_json == nullptr || node_out == nullptr) return fail_arg("config_json/node_out");
    auto cfg = ServiceConfig::from_json_text(config_json);
    if (!cfg.ok()) return fail(cfg.status());
    std::shared_ptr<LambdaRegistry> reg;
    {
        std::lock_guard lk(g_registry_mu);
        reg = g_registry();
    }
    auto node = Node::start(cfg.take(), std::move(reg));
    if (!node.ok()) return fail(node.status());
    *node_out = new casc_node{node.take()};
    return CASC_OK;
}

void casc_node_stop(casc_node* node) {
    if (node == nullptr) return;
    node->impl->stop();
    delete node;
}

uint32_t casc_node_id(const casc_node* node) { return node ? node->impl->id() : UINT32_MAX; }

uint64_t casc_node_view_id(const casc_node* node) { return node ? node->impl->view_id() : 0; }

casc_status casc_lambda_register(const char* name, casc_lambda_fn fn, void* user) {
    if (name == nullptr || fn == nullptr) return fail_arg("name/fn");
    std::lock_guard lk(g_registry_mu);
    Status st = g_registry()->add(name, [fn, user](LambdaContext& ctx, const UpcallEvent& ev) {
        casc_lambda_ctx c{&ctx};
        fn(&c, ev.object->key.c_str(), ev.object->payload->data(), ev.object->payload->size(),
           ev.object->is_trigger ? 1 : 0, user);
    });
    if (!st.ok()) return fail(st);
    return CASC_OK;
}

static casc_status object_from(Result<GetResult> got, casc_object** out) {
    if (!got.ok()) return fail(got.status());
    auto* obj = new casc_object;
    obj->data = std::move(got->payload);
    obj->version = to_c(got->version);
    *out = obj;
    return CASC_OK;
}

casc_status casc_ctx_put(casc_lambda_ctx* ctx, const char* key, const void* data, size_t len,
                         int kind, casc_version* version_out) {
    if (ctx == nullptr || key == nullptr || (data == nullptr && len > 0))
        return fail_arg("ctx/key/data");
    auto res = ctx->impl->put(
        key, make_payload(Bytes(static_cast<const uint8_t*>(data),
                                static_cast<const uint8_t*>(data) + len)),
        static_cast<PutKind>(kind));
    if (!res.ok()) return fail(res.status());
    if (version_out != nullptr) *version_out = to_c(res->version);
    return CASC_OK;
}

casc_status casc_ctx_trigger_put(casc_lambda_ctx* ctx, const char* key, const void* data,
                                 size_t len) {
    if (ctx == nullptr || key == nullptr || (data == nullptr && len > 0))
        return fail_arg("ctx/key/data");
    Status st = ctx->impl->trigger_put(
        key, make_payload(Bytes(static_cast<const uint8_t*>(data),
                                static_cast<const uint8_t*>(data) + len)));
    if (!st.ok()) return fail(st);
    return CASC_OK;
}

casc_status casc_ctx_get(casc_lambda_ctx* ctx, const char* key, casc_object** out) {
    if (ctx == nullptr || key == nullptr || out == nullptr) return fail_arg("ctx/key/out");
    return object_from(ctx->impl->get_current(key), out);
}

casc_status casc_ctx_get_by_version(casc_lambda_ctx* ctx, const char* key, uint64_t version,
                                    casc_object** out) {
    if (ctx == nullptr || key == nullptr || out == nullptr) return fail_arg("ctx/key/out");
    return object_from(ctx->impl->get_by_version(key, version), out);
}

casc_status casc_ctx_get_by_time(casc_lambda_ctx* ctx, const char* key, uint64_t timestamp_us,
                                 casc_object** out) {
    if (ctx == nullptr || key == nullptr || out == nullptr) return fail_arg("ctx/key/out");
    return object_from(ctx->impl->get_by_time(key, timestamp_us), out);
}

casc_status casc_ctx_emit(casc_lambda_ctx* ctx, const void* data, size_t len,
                          const char* suffix) {
    if (ctx == nullptr || suffix == nullptr || (data == nullptr && len > 0))
        return fail_arg("ctx/suffix/data");
    Status st = ctx->impl->emit(make_payload(Bytes(static_cast<const uint8_t*>(data),
                                                   static_cast<const uint8_t*>(data) + len)),
                                suffix);
    if (!st.ok()) return fail(st);
    return CASC_OK;
}

casc_status casc_client_connect(const char* config_path, casc_client** client_out) {
    if (config_path == nullptr || client_out == nullptr) return fail_arg("config_path/client_out");
    auto cfg = ServiceConfig::from_file(config_path);
    if (!cfg.ok()) return fail(cfg.status());
    auto client = Client::create(cfg.take());
    if (!client.ok()) return fail(client.status());
    *client_out = new casc_client{client.take()};
    return CASC_OK;
}

casc_status casc_client_connect_json(const char* config_json, casc_client** client_out) {
    if (config_json == nullptr || client_out == nullptr) return fail_arg("config_json/client_out");
    auto cfg = ServiceConfig::from_json_text(config_json);
    if (!cfg.ok()) return fail(cfg.status());
    auto client = Client::create(cfg.take());
    if (!client.ok()) return fail(client.status());
    *client_out = new casc_client{client.take()};
    return CASC_OK;
}

void casc_client_close(casc_client* client) {
    if (client == nullptr) return;
    client->impl->close();
    delete client;
}

casc_status casc_put(casc_client* client, const char* key, const void* data, size_t len,
                     int kind, casc_version* version_out, casc_put_timing* timing_out) {
    if (client == nullptr || key == nullptr || (data == nullptr && len > 0))
        return fail_arg("client/key/data");
    auto res = client->impl->put(key,
                                 Bytes(static_cast<const uint8_t*>(data),
                                       static_cast<const uint8_t*>(data) + len),
                                 static_cast<PutKind>(kind));
    if (!res.ok()) return fail(res.status());
    if (version_out != nullptr) *version_out = to_c(res->version);
    if (timing_out != nullptr)
        *timing_out = {res->e2e_ns, res->timing.resident_ns, res->timing.multicast_ns,
                       res->timing.processing_ns, res->timing.persistence_ns};
    return CASC_OK;
}

casc_status casc_trigger_put(casc_client* client, const char* key, const void* data, size_t len) {
    if (client == nullptr || key == nullptr || (data == nullptr && len > 0))
        return fail_arg("client/key/data");
    auto res = client->impl->trigger_put(key, Bytes(static_cast<const uint8_t*>(data),
                                                    static_cast<const uint8_t*>(data) + len));
    if (!res.ok()) return fail(res.status());
    return CASC_OK;
}

casc_status casc_get(casc_client* client, const char* key, casc_object** out) {
    if (client == nullptr || key == nullptr || out == nullptr) return fail_arg("client/key/out");
    return object_from(client->impl->get(key), out);
}

casc_status casc_get_by_version(casc_client* client, const char* key, uint64_t version,
                                casc_object** out) {
    if (client == nullptr || key == nullptr || out == nullptr) return fail_arg("client/key/out");
    return object_from(client->impl->get_by_version(key, version), out);
}

casc_status casc_get_by_time(casc_client* client, const char* key, uint64_t timestamp_us,
                             casc_object** out) {
    if (client == nullptr || key == nullptr || out == nullptr) return fail_arg("client/key/out");
    return object_from(client->impl->get_by_time(key, timestamp_us), out);
}

casc_status casc_publish(casc_client* client, const char* topic, const void* data, size_t len,
                         int persistence, casc_version* version_out) {
    if (client == nullptr || topic == nullptr || (data == nullptr && len > 0))
        return fail_arg("client/topic/data");
    if (persistence != CASC_PUT_VOLATILE && persistence != CASC_PUT_PERSISTENT)
        return fail_arg("persistence must be volatile or persistent");
    auto res = client->impl->publish(topic,
                                     Bytes(static_cast<const uint8_t*>(data),
                                           static_cast<const uint8_t*>(data) + len),
                                     static_cast<PutKind>(persistence));
    if (!res.ok()) return fail(res.status());
    if (version_out != nullptr) *version_out = to_c(res->version);
    return CASC_OK;
}

casc_status casc_subscribe(casc_client* client, const char* topic, casc_notify_fn fn,
                           void* user) {
    if (client == nullptr || topic == nullptr || fn == nullptr)
        return fail_arg("client/topic/fn");
    Status st = client->impl->subscribe(topic, [fn, user](const Client::NotifyEvent& ev) {
        fn(ev.topic.c_str(), ev.seq, ev.timestamp_us, ev.payload.data(), ev.payload.size(), user);
    });
    if (!st.ok()) return fail(st);
    return CASC_OK;
}

const void* casc_object_data(const casc_object* obj) { return obj ? obj->data.data() : nullptr; }

size_t casc_object_size(const casc_object* obj) { return obj ? obj->data.size() : 0; }

casc_version casc_object_version(const casc_object* obj) {
    return obj ? obj->version : casc_version{0, 0, 0};
}

void casc_object_free(casc_object* obj) { delete obj; }

static char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

casc_status casc_bench_put(const char* config_path, const casc_put_bench_opts* opts,
                           char** summary_out) {
    if (opts == nullptr || opts->op == nullptr) return fail_arg("opts");

    PutBenchOptions o;
    o.op = opts->op;
    o.object_bytes = opts->object_bytes ? opts->object_bytes : 10 * 1024;
    o.rate = opts->rate > 0 ? opts->rate : 1000;
    o.duration_ms = opts->duration_ms ? opts->duration_ms : 3000;
    o.clients = opts->clients ? opts->clients : 1;
    if (opts->key_prefix != nullptr) o.key_prefix = opts->key_prefix;
    if (opts->keys != 0) o.keys = opts->keys;
    if (opts->csv_path != nullptr) o.csv_path = opts->csv_path;
    o.calibrate = opts->calibrate != 0;

    Result<PutBenchReport> report = Status::error(Code::Internal, "unset");
    if (config_path != nullptr) {
        auto cfg = ServiceConfig::from_file(config_path);
        if (!cfg.ok()) return fail(cfg.status());
        report = run_put_bench(cfg.take(), o);
    } else {
        // Self-hosted three-node cluster with a persistent /bench/data pool.
        auto cluster = SelfCluster::start();
        if (!cluster.ok()) return fail(cluster.status());
        report = run_put_bench((*cluster)->client_cfg(), o);
    }
    if (!report.ok()) return fail(report.status());
    if (summary_out != nullptr) *summary_out = dup_string(report->summary_line());
    return CASC_OK;
}

casc_status casc_bench_pipeline(const casc_pipeline_bench_opts* opts, char** summary_out) {
    if (opts == nullptr || opts->edge == nullptr) return fail_arg("opts");
    PipelineBenchOptions o;
    o.stages = opts->stages ? opts->stages : 4;
    o.edge = opts->edge;
    o.object_bytes = opts->object_bytes ? opts->object_bytes : 10 * 1024;
    o.rate = opts->rate > 0 ? opts->rate : 200;
    o.count = opts->count ? opts->count : 400;
    o.measure_throughput = opts->measure_throughput != 0;
    o.throughput_ms = opts->throughput_ms ? opts->throughput_ms : 2000;
    if (opts->csv_path != nullptr) o.csv_path = opts->csv_path;
    auto report = run_pipeline_bench(o);
    if (!report.ok()) return fail(report.status());
    if (summary_out != nullptr) *summary_out = dup_string(report->summary_line());
    return CASC_OK;
}

casc_status casc_bench_fastpath(const casc_fastpath_bench_opts* opts, char** summary_out) {
    if (opts == nullptr || opts->policy == nullptr) return fail_arg("opts");
    FastpathBenchOptions o;
    o.object_bytes = opts->object_bytes ? opts->object_bytes : 10 * 1024;
    o.policy = opts->policy;
    o.events = opts->events ? opts->events : 20'000;
    o.workers = opts->workers ? opts->workers : 2;
    if (opts->csv_path != nullptr) o.csv_path = opts->csv_path;
    auto report = run_fastpath_bench(o);
    if (!report.ok()) return fail(report.status());
    if (summary_out != nullptr) *summary_out = dup_string(report->summary_line());
    return CASC_OK;
}

void casc_string_free(char* s) { std::free(s); }

}  // extern "C"
