#include "tiermem/service/host.hpp"

#include <algorithm>

namespace tiermem::service {

nlohmann::json descriptor_to_json(const AgentDescriptor& d, const AgentConfig& cfg) {
    return {{"agent_id", d.agent_id},
            {"name", d.name},
            {"created_at", format_iso8601(d.created_at)},
            {"config", {{"budget_total", cfg.budget_total},
                        {"processor", cfg.processor},
                        {"embedder", cfg.embedder},
                        {"summarizer", cfg.summarizer}}}};
}

class AgentHost::Turn {
public:
    explicit Turn(AgentHost& h) : h_(h) {
        std::unique_lock lock(h_.ticket_mu_);
        const std::uint64_t mine = h_.next_ticket_++;
        h_.ticket_cv_.wait(lock, [&] { return h_.serving_ == mine; });
    }
    ~Turn() {
        {
            std::lock_guard lock(h_.ticket_mu_);
            ++h_.serving_;
        }
        h_.ticket_cv_.notify_all();
    }
    Turn(const Turn&) = delete;
    Turn& operator=(const Turn&) = delete;

private:
    AgentHost& h_;
};

AgentHost::AgentHost(AgentDescriptor descriptor, Agent agent)
    : descriptor_(std::move(descriptor)), agent_(std::move(agent)) {}

Result<StepTrace> AgentHost::submit(EventKind kind, std::string payload, std::optional<Instant> at) {
    Turn turn(*this);
    std::unique_lock lock(state_mu_);
    const Instant when = at ? *at : std::max(now_utc(), agent_.last_event_at());
    auto trace = agent_.step(Event{kind, std::move(payload), when});
    lock.unlock();
    if (trace) publish(*trace);
    return trace;
}

Result<std::optional<StepTrace>> AgentHost::tick(Instant now) {
    Turn turn(*this);
    std::unique_lock lock(state_mu_);
    auto trace = agent_.tick(now);
    lock.unlock();
    if (trace && *trace) publish(**trace);
    return trace;
}

Result<std::string> AgentHost::archival_insert(std::string_view text, std::optional<Instant> at) {
    Turn turn(*this);
    std::unique_lock lock(state_mu_);
    return agent_.archival_insert(text, at ? *at : now_utc());
}

Result<void> AgentHost::save(const std::filesystem::path& dir) const {
    std::shared_lock lock(state_mu_);
    return agent_.save(dir);
}

void AgentHost::publish(const StepTrace& trace) {
    {
        std::lock_guard lock(log_mu_);
        for (auto& e : trace_entries(trace)) {
            StreamEntry s;
            s.seq = log_.size() + 1;
            e["seq"] = s.seq;
            s.body = std::move(e);
            log_.push_back(std::move(s));
        }
    }
    log_cv_.notify_all();
}

std::vector<StreamEntry> AgentHost::entries_since(std::uint64_t since) const {
    std::lock_guard lock(log_mu_);
    if (since >= log_.size()) return {};
    return {log_.begin() + static_cast<std::ptrdiff_t>(since), log_.end()};
}

std::uint64_t AgentHost::last_seq() const {
    std::lock_guard lock(log_mu_);
    return log_.size();
}

bool AgentHost::wait_for(std::uint64_t since, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(log_mu_);
    log_cv_.wait_for(lock, timeout, [&] { return closed_ || log_.size() > since; });
    return !closed_;
}

void AgentHost::close() {
    {
        std::lock_guard lock(log_mu_);
        closed_ = true;
    }
    log_cv_.notify_all();
}

}  // namespace tiermem::service
