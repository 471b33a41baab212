#pragma once

#include "tiermem/agent.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

namespace tiermem::service {

struct AgentDescriptor {
    std::string agent_id;
    std::string name;
    Instant created_at{};
};

nlohmann::json descriptor_to_json(const AgentDescriptor& d, const AgentConfig& cfg);

struct StreamEntry {
    std::uint64_t seq = 0;  // 1-based, per agent
    nlohmann::json body;
};

// One agent shared between threads. Mutating calls run one at a time in
// the order they arrived; reads take a shared lock.
class AgentHost {
public:
    AgentHost(AgentDescriptor descriptor, Agent agent);

    const AgentDescriptor& descriptor() const { return descriptor_; }

    // at = nullopt stamps the event when its turn comes, never earlier than
    // the agent's last event.
    Result<StepTrace> submit(EventKind kind, std::string payload, std::optional<Instant> at = std::nullopt);
    Result<std::optional<StepTrace>> tick(Instant now);
    Result<std::string> archival_insert(std::string_view text, std::optional<Instant> at = std::nullopt);
    Result<void> save(const std::filesystem::path& dir) const;

    template <typename F>
    auto read(F&& f) const {
        std::shared_lock lock(state_mu_);
        return f(agent_);
    }

    std::vector<StreamEntry> entries_since(std::uint64_t since) const;
    std::uint64_t last_seq() const;
    // Waits until an entry after `since` exists, the host closes, or the
    // timeout passes. Returns false once closed.
    bool wait_for(std::uint64_t since, std::chrono::milliseconds timeout) const;
    void close();

private:
    class Turn;

    AgentDescriptor descriptor_;
    Agent agent_;
    mutable std::shared_mutex state_mu_;

    // Ticket lock: FIFO admission of writers.
    std::mutex ticket_mu_;
    std::condition_variable ticket_cv_;
    std::uint64_t next_ticket_ = 0;
    std::uint64_t serving_ = 0;

    mutable std::mutex log_mu_;
    mutable std::condition_variable log_cv_;
    std::vector<StreamEntry> log_;
    bool closed_ = false;

    void publish(const StepTrace& trace);
};

}  // namespace tiermem::service
