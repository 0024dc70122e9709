#include "core/status.hpp"

namespace cascade {

const char* code_name(Code c) {
    switch (c) {
    case Code::Ok: return "Ok";
    case Code::NoSuchPool: return "NoSuchPool";
    case Code::MalformedKey: return "MalformedKey";
    case Code::KeyNotFound: return "KeyNotFound";
    case Code::VersionNotFound: return "VersionNotFound";
    case Code::NotFound: return "NotFound";
    case Code::RetryExhausted: return "RetryExhausted";
    case Code::Timeout: return "Timeout";
    case Code::LogFull: return "LogFull";
    case Code::CorruptLog: return "CorruptLog";
    case Code::ShardUnavailable: return "ShardUnavailable";
    case Code::ViewChanged: return "ViewChanged";
    case Code::CommitTimeout: return "CommitTimeout";
    case Code::NodeUnreachable: return "NodeUnreachable";
    case Code::QueueFull: return "QueueFull";
    case Code::DuplicateRegistration: return "DuplicateRegistration";
    case Code::SchemaError: return "SchemaError";
    case Code::UnknownPool: return "UnknownPool";
    case Code::UnknownLambda: return "UnknownLambda";
    case Code::NoOutEdges: return "NoOutEdges";
    case Code::ConfigError: return "ConfigError";
    case Code::BootstrapTimeout: return "BootstrapTimeout";
    case Code::NotPersistentPool: return "NotPersistentPool";
    case Code::WrongNode: return "WrongNode";
    case Code::ConnectionClosed: return "ConnectionClosed";
    case Code::ProtocolError: return "ProtocolError";
    case Code::Internal: return "Internal";
    }
    return "Unknown";
}

std::string Status::to_string() const {
    std::string s = code_name(code);
    if (!message.empty()) {
        s += ": ";
        s += message;
    }
    return s;
}

}  // namespace cascade
