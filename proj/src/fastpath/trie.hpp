#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "core/status.hpp"

namespace cascade {

enum class DispatchPolicy : uint8_t { RoundRobin = 0, FifoByKey = 1 };

const char* dispatch_policy_name(DispatchPolicy p);

struct LambdaRegistration {
    std::string lambda_id;
    std::string prefix;  // whole-component path prefix, e.g. "/sf/detect_animal"
    DispatchPolicy policy = DispatchPolicy::RoundRobin;

    bool operator==(const LambdaRegistration&) const = default;
};

// Path-component trie. Each node holds the registrations bound at exactly
// that prefix; a lookup walks the key's components and collects every
// registration along the way, shortest prefix first.
class PrefixTrie {
  public:
    Status insert(const LambdaRegistration& reg);

    // All registrations whose prefix is a whole-component prefix of `full_key`.
    std::vector<const LambdaRegistration*> match(std::string_view full_key) const;

    size_t registration_count() const { return registration_count_; }

  private:
    struct TrieNode {
        std::map<std::string, std::unique_ptr<TrieNode>, std::less<>> children;
        std::vector<LambdaRegistration> registrations;
    };

    TrieNode root_;
    size_t registration_count_ = 0;
};

}  // namespace cascade
