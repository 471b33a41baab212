#pragma once

#include "tiermem/config.hpp"
#include "tiermem/external.hpp"
#include "tiermem/functions.hpp"
#include "tiermem/processor.hpp"
#include "tiermem/queue.hpp"
#include "tiermem/working_context.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tiermem {

enum class EventKind { user_message, system_alert, user_interaction, scheduled };

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

struct Event {
    EventKind kind = EventKind::user_message;
    std::string payload;
    Instant at{};
};

// One processor invocation inside a step.
struct StepRecord {
    std::string input_digest;  // FNV-1a of the composed prompt, hex
    Tokens prompt_tokens = 0;
    std::string raw_output;
    std::optional<std::string> thoughts;
    std::optional<ValidatedCall> call;
    std::optional<std::string> function_result;
    // Parse or validation feedback sent back to the processor.
    std::optional<std::string> error;
    std::vector<std::string> outbound;
};

struct StepTrace {
    std::string trace_id;
    std::vector<StepRecord> records;
    std::vector<std::string> outbound;
    bool chain_limit_hit = false;
};

inline constexpr std::string_view kChainLimitNote = "chain limit reached";

class Agent {
public:
    static Result<Agent> create(AgentConfig config, std::shared_ptr<Processor> processor,
                                std::shared_ptr<const Embedder> embedder, Instant created_at = now_utc());

    // Event in, processor loop until yield or max_chain. Errors roll the
    // agent back to its pre-step state: ProcessorUnavailable, OutOfOrder,
    // InvalidEvent.
    Result<StepTrace> step(const Event& event);

    // Runs a scheduled step once tick_interval has elapsed since the last
    // event. Errors: InvalidConfig without tick_interval.
    Result<std::optional<StepTrace>> tick(Instant now);

    // Records history (recall + queue) without invoking the processor.
    Result<void> observe(Role role, std::string_view text, Instant at);

    // Document ingestion path.
    Result<std::string> archival_insert(std::string_view text, Instant at);

    Result<std::string> compose() const;

    // <dir>/agent.json, recall.jsonl, archival.jsonl.
    Result<void> save(const std::filesystem::path& dir) const;
    // Errors: CorruptSnapshot naming the failing file/field.
    static Result<Agent> load(const std::filesystem::path& dir, std::shared_ptr<Processor> processor,
                              std::shared_ptr<const Embedder> embedder);
    // Builds processor and embedder from the stored config.
    static Result<Agent> load(const std::filesystem::path& dir);

    const AgentConfig& config() const { return config_; }
    const TokenBudget& budget() const { return budget_; }
    const std::string& instructions() const { return instructions_; }
    const WorkingContext& working() const { return working_; }
    const QueueState& queue() const { return queue_; }
    const RecallStore& recall() const { return recall_; }
    const ArchivalStore& archival() const { return archival_; }
    const FunctionRegistry& registry() const { return registry_; }
    std::uint64_t step_count() const { return step_count_; }
    std::size_t evicted_count() const { return evicted_count_; }
    Instant created_at() const { return created_at_; }
    Instant last_event_at() const { return last_event_at_; }
    std::optional<Instant> paused_until() const { return paused_until_; }
    Processor& processor() { return *processor_; }
    void set_processor(std::shared_ptr<Processor> p) { processor_ = std::move(p); }

    // Largest single message (rendered cost) the runtime lets into the queue.
    Tokens max_message_tokens() const { return budget_.queue_cap / 4; }

private:
    Agent(AgentConfig config, std::shared_ptr<Processor> processor, std::shared_ptr<const Embedder> embedder);

    struct Snapshot {
        WorkingContext working;
        QueueState queue;
        std::size_t recall_size;
        std::size_t archival_size;
        std::uint64_t step_count;
        std::uint64_t next_id;
        std::size_t evicted_count;
        Instant last_event_at;
        std::optional<Instant> paused_until;
    };
    Snapshot snapshot() const;
    void restore(Snapshot s);

    Result<StepTrace> run_step(const Event& event);
    Result<void> admit(Message m);
    Result<void> admit_text(Role role, std::string_view text, Instant at, bool split);
    std::string next_id();
    Instant stamp(Instant at) const;

    AgentConfig config_;
    std::shared_ptr<Processor> processor_;
    std::shared_ptr<const Embedder> embedder_;
    const Tokenizer* tok_ = &default_tokenizer();
    FunctionRegistry registry_;
    std::string instructions_;
    TokenBudget budget_;
    WorkingContext working_;
    QueueState queue_;
    RecallStore recall_;
    ArchivalStore archival_;
    std::uint64_t step_count_ = 0;
    std::uint64_t next_id_ = 1;
    std::size_t evicted_count_ = 0;
    Instant created_at_{};
    Instant last_event_at_{};
    std::optional<Instant> paused_until_;
};

// Canonical system instructions: preamble + rendered function schema.
Result<std::string> build_instructions(const AgentConfig& config, const FunctionRegistry& registry);

std::string digest_hex(std::string_view text);

// Step trace flattened into stream entries: kind is one of monologue,
// function_call, function_result, error, outbound.
nlohmann::json trace_entries(const StepTrace& trace);
nlohmann::json trace_to_json(const StepTrace& trace);

}  // namespace tiermem
