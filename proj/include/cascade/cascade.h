/*
 * cascade.h - C API for the cascade edge store.
 *
 * The library hosts a sharded, versioned K/V object store with three put
 * semantics (trigger / volatile / persistent), prefix-matched lambda
 * dispatch, a persisted temporal log, and topic pub/sub. Handles are opaque;
 * every call returns a casc_status whose values are stable across releases.
 * A human-readable message for the most recent failure on the calling thread
 * is available from casc_last_error().
 *
 * Threading: node and client handles are internally synchronized. Lambda and
 * notification callbacks run on library threads and must not block for long.
 * casc_lambda_register is process-global and must happen before the nodes
 * that use the lambda start.
 */
#ifndef CASCADE_CASCADE_H
#define CASCADE_CASCADE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef CASC_API
#define CASC_API __attribute__((visibility("default")))
#endif

typedef int32_t casc_status;

enum {
    CASC_OK = 0,
    CASC_ERR_NO_SUCH_POOL = 1,
    CASC_ERR_MALFORMED_KEY = 2,
    CASC_ERR_KEY_NOT_FOUND = 3,
    CASC_ERR_VERSION_NOT_FOUND = 4,
    CASC_ERR_NOT_FOUND = 5,
    CASC_ERR_RETRY_EXHAUSTED = 6,
    CASC_ERR_TIMEOUT = 7,
    CASC_ERR_LOG_FULL = 8,
    CASC_ERR_CORRUPT_LOG = 9,
    CASC_ERR_SHARD_UNAVAILABLE = 10,
    CASC_ERR_VIEW_CHANGED = 11,
    CASC_ERR_COMMIT_TIMEOUT = 12,
    CASC_ERR_NODE_UNREACHABLE = 13,
    CASC_ERR_QUEUE_FULL = 14,
    CASC_ERR_DUPLICATE_REGISTRATION = 15,
    CASC_ERR_SCHEMA = 16,
    CASC_ERR_UNKNOWN_POOL = 17,
    CASC_ERR_UNKNOWN_LAMBDA = 18,
    CASC_ERR_NO_OUT_EDGES = 19,
    CASC_ERR_CONFIG = 20,
    CASC_ERR_BOOTSTRAP_TIMEOUT = 21,
    CASC_ERR_NOT_PERSISTENT_POOL = 22,
    CASC_ERR_WRONG_NODE = 23,
    CASC_ERR_CONNECTION_CLOSED = 24,
    CASC_ERR_PROTOCOL = 25,
    CASC_ERR_INTERNAL = 26,

    CASC_ERR_BAD_ARGUMENT = 100
};

/* Put kinds. POOL_DEFAULT follows the pool's configured persistence. */
enum {
    CASC_PUT_POOL_DEFAULT = 0,
    CASC_PUT_VOLATILE = 1,
    CASC_PUT_PERSISTENT = 2
};

typedef struct casc_node casc_node;
typedef struct casc_client casc_client;
typedef struct casc_object casc_object;
typedef struct casc_lambda_ctx casc_lambda_ctx;

typedef struct casc_version {
    uint64_t per_key_version; /* counts puts to this key, from 0 */
    uint64_t shard_seq;       /* multicast sequence within the home shard */
    uint64_t timestamp_us;    /* delivery timestamp, microseconds since epoch */
} casc_version;

typedef struct casc_put_timing {
    uint64_t e2e_ns;         /* caller round trip */
    uint64_t resident_ns;    /* request receive -> response send on the server */
    uint64_t multicast_ns;   /* receive -> all replicas applied */
    uint64_t processing_ns;  /* in-memory apply */
    uint64_t persistence_ns; /* all-applied -> durable on every replica */
} casc_put_timing;

CASC_API const char* casc_status_name(casc_status status);
CASC_API const char* casc_last_error(void);

/* ---- node daemon ---- */

/* Starts a node from a JSON config file; blocks until the cluster peers are
 * reachable. The handle must be released with casc_node_stop. */
CASC_API casc_status casc_node_start(const char* config_path, casc_node** node_out);
CASC_API casc_status casc_node_start_json(const char* config_json, casc_node** node_out);
CASC_API void casc_node_stop(casc_node* node);
CASC_API uint32_t casc_node_id(const casc_node* node);
CASC_API uint64_t casc_node_view_id(const casc_node* node);

/* ---- lambdas (process-local registry) ---- */

typedef void (*casc_lambda_fn)(casc_lambda_ctx* ctx, const char* key, const void* data,
                               size_t len, int is_trigger, void* user);

CASC_API casc_status casc_lambda_register(const char* name, casc_lambda_fn fn, void* user);

/* Store operations available to a lambda during an upcall. The ctx pointer
 * is only valid for the duration of the call. */
CASC_API casc_status casc_ctx_put(casc_lambda_ctx* ctx, const char* key, const void* data,
                                  size_t len, int kind, casc_version* version_out);
CASC_API casc_status casc_ctx_trigger_put(casc_lambda_ctx* ctx, const char* key,
                                          const void* data, size_t len);
CASC_API casc_status casc_ctx_get(casc_lambda_ctx* ctx, const char* key, casc_object** out);
CASC_API casc_status casc_ctx_get_by_version(casc_lambda_ctx* ctx, const char* key,
                                             uint64_t version, casc_object** out);
CASC_API casc_status casc_ctx_get_by_time(casc_lambda_ctx* ctx, const char* key,
                                          uint64_t timestamp_us, casc_object** out);
/* Performs each DFG out-edge's configured put with key = prefix + '/' + suffix. */
CASC_API casc_status casc_ctx_emit(casc_lambda_ctx* ctx, const void* data, size_t len,
                                   const char* suffix);

/* ---- client ---- */

CASC_API casc_status casc_client_connect(const char* config_path, casc_client** client_out);
CASC_API casc_status casc_client_connect_json(const char* config_json, casc_client** client_out);
CASC_API void casc_client_close(casc_client* client);

/* timing_out may be NULL. */
CASC_API casc_status casc_put(casc_client* client, const char* key, const void* data, size_t len,
                              int kind, casc_version* version_out, casc_put_timing* timing_out);
CASC_API casc_status casc_trigger_put(casc_client* client, const char* key, const void* data,
                                      size_t len);
CASC_API casc_status casc_get(casc_client* client, const char* key, casc_object** out);
CASC_API casc_status casc_get_by_version(casc_client* client, const char* key, uint64_t version,
                                         casc_object** out);
/* Blocks until the stability frontier passes timestamp_us (or times out). */
CASC_API casc_status casc_get_by_time(casc_client* client, const char* key,
                                      uint64_t timestamp_us, casc_object** out);

/* persistence: CASC_PUT_VOLATILE or CASC_PUT_PERSISTENT. */
CASC_API casc_status casc_publish(casc_client* client, const char* topic, const void* data,
                                  size_t len, int persistence, casc_version* version_out);

typedef void (*casc_notify_fn)(const char* topic, uint64_t seq, uint64_t timestamp_us,
                               const void* data, size_t len, void* user);
CASC_API casc_status casc_subscribe(casc_client* client, const char* topic, casc_notify_fn fn,
                                    void* user);

/* ---- objects ---- */

CASC_API const void* casc_object_data(const casc_object* obj);
CASC_API size_t casc_object_size(const casc_object* obj);
CASC_API casc_version casc_object_version(const casc_object* obj);
CASC_API void casc_object_free(casc_object* obj);

/* ---- benchmarks ---- */

typedef struct casc_put_bench_opts {
    const char* op; /* "trig" | "vola" | "pers" */
    size_t object_bytes;
    double rate;          /* offered ops/s across all clients */
    uint64_t duration_ms;
    uint32_t clients;
    const char* key_prefix; /* defaults to "/bench/data" */
    uint32_t keys;          /* distinct keys, defaults to 16 */
    const char* csv_path;   /* raw samples; NULL to skip */
    int calibrate;          /* nonzero: 10%-rate pass for saturation detection */
} casc_put_bench_opts;

/* config_path NULL self-hosts a three-node loopback cluster with a
 * three-replica persistent pool "/bench/data". summary_out receives a
 * malloc'd line; free with casc_string_free. */
CASC_API casc_status casc_bench_put(const char* config_path, const casc_put_bench_opts* opts,
                                    char** summary_out);

typedef struct casc_pipeline_bench_opts {
    uint32_t stages;
    const char* edge; /* "trigger" | "volatile" */
    size_t object_bytes;
    double rate;
    uint32_t count;
    int measure_throughput;
    uint64_t throughput_ms;
    const char* csv_path;
} casc_pipeline_bench_opts;

/* Always self-hosted. */
CASC_API casc_status casc_bench_pipeline(const casc_pipeline_bench_opts* opts, char** summary_out);

typedef struct casc_fastpath_bench_opts {
    size_t object_bytes;
    const char* policy; /* "round_robin" | "fifo_by_key" */
    uint32_t events;
    uint32_t workers;
    const char* csv_path;
} casc_fastpath_bench_opts;

CASC_API casc_status casc_bench_fastpath(const casc_fastpath_bench_opts* opts, char** summary_out);

CASC_API void casc_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* CASCADE_CASCADE_H */
