#pragma once

#include "tiermem/agent.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tiermem::eval {

inline constexpr std::size_t kKvPairs = 140;
inline constexpr int kKvMaxDepth = 4;

struct KvPair {
    std::string key;
    std::string value;
};

// 140 UUID pairs. Following initial_key through the pairs takes depth hops
// beyond the first lookup; the final value is not a key.
struct KvDataset {
    std::vector<KvPair> pairs;
    std::string initial_key;
    int depth = 0;
    std::uint64_t pair_seed = 0;
    std::uint64_t ordering_seed = 0;
};

// UUIDs come from pair_seed, the shuffle of all pairs from ordering_seed.
// Errors: InvalidRange for depth outside [0, 4].
Result<KvDataset> gen_kv(int depth, std::uint64_t pair_seed, std::uint64_t ordering_seed);

// Multi-hop lookup from initial_key until the value is not a key.
// Errors: CycleDetected, KeyNotFound.
Result<std::string> kv_oracle(const KvDataset& ds);

// "KEY = <k> ; VALUE = <v>"
std::string kv_line(const KvPair& p);

enum class KvMode {
    archival,    // pairs in archival storage, multi-hop search policy
    truncation,  // no memory functions; pairs pushed through the queue
};

struct KvRun {
    std::string answer;
    std::string expected;
    bool correct = false;
    std::size_t n_processor_calls = 0;
    std::size_t n_search_calls = 0;
};

Result<KvRun> run_kv(const AgentConfig& config, const KvDataset& ds, KvMode mode);

// Budget for the truncation baseline: half of the token cost of the 140
// rendered pair messages, the same document-to-window ratio as an 8k-token
// document read through a 4k window.
Tokens kv_truncation_budget(const KvDataset& ds);

std::string kv_question(const std::string& initial_key);

}  // namespace tiermem::eval
