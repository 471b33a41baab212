#pragma once

#include "tiermem/context.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tiermem {

inline constexpr std::string_view kPressureWarning =
    "Warning: the conversation history will soon reach its maximum length and be trimmed. "
    "Make sure to save any important information from the conversation to your memory before "
    "it is removed.";

struct QueueConfig {
    Tokens cap = 0;
    double warn_ratio = 0.75;
    double evict_target_ratio = 0.5;
    // Share of cap reserved for the summary message written by an eviction.
    double summary_ratio = 0.15;

    Result<void> validate() const;
    Tokens warn_threshold() const;
    Tokens evict_target() const;
    Tokens summary_budget() const;
};

struct QueueState {
    QueueConfig config;
    std::vector<Message> messages;
    std::optional<Message> summary;
    // Set once the pressure warning fired; cleared by eviction.
    bool warned = false;
    std::size_t evictions = 0;

    Tokens occupancy(const Tokenizer& tok = default_tokenizer()) const;
    // Summary first, then messages in arrival order.
    std::vector<Message> rendered() const;
};

class Summarizer {
public:
    virtual ~Summarizer() = default;
    // Folds the prior summary and the evicted messages into a new summary
    // text of at most cap tokens.
    virtual Result<std::string> summarize(const std::optional<std::string>& prior,
                                          std::span<const Message> evicted, Tokens cap) = 0;
};

// "SUMMARY(n=..; span=a..b): " + prior + first sentence of each evicted
// message, trimmed from the oldest end to fit cap.
std::string truncation_summarizer(const std::optional<std::string>& prior,
                                  std::span<const Message> evicted, Tokens cap,
                                  const Tokenizer& tok = default_tokenizer());

class TruncationSummarizer final : public Summarizer {
public:
    explicit TruncationSummarizer(const Tokenizer& tok = default_tokenizer()) : tok_(&tok) {}
    Result<std::string> summarize(const std::optional<std::string>& prior,
                                  std::span<const Message> evicted, Tokens cap) override {
        return truncation_summarizer(prior, evicted, cap, *tok_);
    }

private:
    const Tokenizer* tok_;
};

struct EnqueueOutcome {
    QueueState state;
    std::optional<Message> warning;
};

// Errors: MessageTooLarge (message alone exceeds cap), QueueFull (caller
// must evict first).
Result<EnqueueOutcome> enqueue(QueueState state, Message msg,
                               const Tokenizer& tok = default_tokenizer());

enum class EvictMode {
    IfFull,  // no-op unless occupancy >= cap
    Force,   // evict down to the target even below cap
    Flush,   // evict every live message
};

struct EvictionOutcome {
    QueueState state;
    std::vector<std::string> evicted_ids;
};

Result<EvictionOutcome> evict(QueueState state, Summarizer& summarizer, EvictMode mode = EvictMode::IfFull,
                              const Tokenizer& tok = default_tokenizer());

}  // namespace tiermem
