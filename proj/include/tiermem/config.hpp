#pragma once

#include "tiermem/context.hpp"
#include "tiermem/embedding.hpp"
#include "tiermem/processor.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tiermem {

struct AgentConfig {
    Tokens budget_total = 4096;
    std::size_t max_chain = 10;
    double warn_ratio = 0.75;
    double evict_target_ratio = 0.5;
    double summary_ratio = 0.15;
    std::size_t page_size = 5;
    std::size_t result_item_chars = 600;
    std::optional<Millis> tick_interval;

    // Backend selectors: processor "echo" | "scripted" | "http";
    // embedder "hashed-bow" | "http"; summarizer "truncation" | "processor".
    std::string processor = "echo";
    std::vector<ScriptEntry> script;
    std::string embedder = "hashed-bow";
    std::size_t embed_dim = HashedBowEmbedder::kDefaultDim;
    std::string summarizer = "truncation";

    // Functions withheld from this agent (baselines).
    std::vector<std::string> disabled_functions;
    // Replaces the default memory preamble when set.
    std::optional<std::string> preamble;

    Result<void> validate() const;
};

nlohmann::json config_to_json(const AgentConfig& cfg);
// Missing keys keep their defaults. Errors: InvalidConfig naming the key.
Result<AgentConfig> config_from_json(const nlohmann::json& j, AgentConfig base = {});

// Key-value text: one "key = value" per line, '#' comments, optional
// [section] headers (ignored). Keys: budget_total, max_chain, warn_ratio,
// evict_target_ratio, summary_ratio, page_size, result_item_chars,
// tick_interval_ms, processor, embedder, embed_dim, summarizer,
// disabled_functions (comma separated).
Result<AgentConfig> parse_config_text(std::string_view text, AgentConfig base = {});
Result<AgentConfig> load_config_file(const std::filesystem::path& file, AgentConfig base = {});

Result<std::shared_ptr<Processor>> make_processor(const AgentConfig& cfg);
Result<std::shared_ptr<const Embedder>> make_embedder(const AgentConfig& cfg);

}  // namespace tiermem
