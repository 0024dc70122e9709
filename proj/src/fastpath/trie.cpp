#include "fastpath/trie.hpp"

#include "core/keys.hpp"

namespace cascade {

const char* dispatch_policy_name(DispatchPolicy p) {
    return p == DispatchPolicy::RoundRobin ? "round_robin" : "fifo_by_key";
}

Status PrefixTrie::insert(const LambdaRegistration& reg) {
    auto comps = split_path(reg.prefix);
    if (!comps.ok())
        return Status::error(Code::MalformedKey, "bad prefix: " + comps.status().message);

    TrieNode* node = &root_;
    for (std::string_view comp : comps.value()) {
        auto it = node->children.find(comp);
        if (it == node->children.end())
            it = node->children.emplace(std::string(comp), std::make_unique<TrieNode>()).first;
        node = it->second.get();
    }
    for (const auto& existing : node->registrations) {
        if (existing.lambda_id == reg.lambda_id)
            return Status::error(Code::DuplicateRegistration,
                                 reg.lambda_id + " already bound to " + reg.prefix);
    }
    node->registrations.push_back(reg);
    ++registration_count_;
    return Status::success();
}

std::vector<const LambdaRegistration*> PrefixTrie::match(std::string_view full_key) const {
    std::vector<const LambdaRegistration*> out;
    const TrieNode* node = &root_;

    size_t pos = 1;  // keys start with '/'
    if (full_key.empty() || full_key[0] != '/') return out;
    while (true) {
        for (const auto& reg : node->registrations) out.push_back(&reg);
        if (pos > full_key.size()) break;
        size_t next = full_key.find('/', pos);
        if (next == std::string_view::npos) next = full_key.size();
        std::string_view comp = full_key.substr(pos, next - pos);
        if (comp.empty()) break;
        auto it = node->children.find(comp);
        if (it == node->children.end()) break;
        node = it->second.get();
        pos = next + 1;
    }
    return out;
}

}  // namespace cascade
