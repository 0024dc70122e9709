#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

namespace cascade {

// Stable error codes. Numeric values are part of the wire protocol and the
// C API; never renumber, only append.
enum class Code : uint16_t {
    Ok = 0,
    NoSuchPool = 1,
    MalformedKey = 2,
    KeyNotFound = 3,
    VersionNotFound = 4,
    NotFound = 5,
    RetryExhausted = 6,
    Timeout = 7,
    LogFull = 8,
    CorruptLog = 9,
    ShardUnavailable = 10,
    ViewChanged = 11,
    CommitTimeout = 12,
    NodeUnreachable = 13,
    QueueFull = 14,
    DuplicateRegistration = 15,
    SchemaError = 16,
    UnknownPool = 17,
    UnknownLambda = 18,
    NoOutEdges = 19,
    ConfigError = 20,
    BootstrapTimeout = 21,
    NotPersistentPool = 22,
    WrongNode = 23,
    ConnectionClosed = 24,
    ProtocolError = 25,
    Internal = 26,
};

const char* code_name(Code c);

struct Status {
    Code code = Code::Ok;
    std::string message;

    bool ok() const { return code == Code::Ok; }
    bool is(Code c) const { return code == c; }

    static Status success() { return Status{}; }
    static Status error(Code c, std::string msg = {}) { return Status{c, std::move(msg)}; }

    std::string to_string() const;
};

template <typename T>
class Result {
  public:
    Result(T value) : value_(std::move(value)) {}        // NOLINT(google-explicit-constructor)
    Result(Status st) : status_(std::move(st)) {}        // NOLINT(google-explicit-constructor)
    Result(Code c, std::string msg = {}) : status_{c, std::move(msg)} {}

    bool ok() const { return status_.ok(); }
    Code code() const { return status_.code; }
    const Status& status() const { return status_; }

    T& value() { return *value_; }
    const T& value() const { return *value_; }
    T take() { return std::move(*value_); }

    T* operator->() { return &*value_; }
    const T* operator->() const { return &*value_; }
    T& operator*() { return *value_; }
    const T& operator*() const { return *value_; }

  private:
    Status status_;
    std::optional<T> value_;
};

}  // namespace cascade
