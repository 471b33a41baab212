#pragma once

#include "tiermem/service/host.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace tiermem::service {

struct ServiceOptions {
    std::filesystem::path data_dir = "tiermem-data";
    AgentConfig defaults;
    // Host-wide SSE poll granularity; a follow stream re-checks for closed
    // connections this often.
    std::chrono::milliseconds stream_poll{250};
};

// Agents by id, each persisted under data_dir/<id>/.
class Registry {
public:
    explicit Registry(ServiceOptions opts);
    ~Registry();

    // Loads every agent directory found under data_dir. Returns the ids that
    // failed to load with their errors.
    std::vector<std::pair<std::string, Error>> load_all();

    Result<std::shared_ptr<AgentHost>> create(const std::string& name, const nlohmann::json& config_overrides,
                                              Instant created_at = now_utc());
    std::shared_ptr<AgentHost> find(const std::string& id) const;
    std::vector<std::shared_ptr<AgentHost>> list() const;
    Result<void> persist(const std::string& id) const;
    Result<void> remove(const std::string& id);

    // Runs tick() on every agent; returns the number of scheduled steps.
    std::size_t tick_all(Instant now);

    const ServiceOptions& options() const { return opts_; }
    std::filesystem::path agent_dir(const std::string& id) const { return opts_.data_dir / id; }

private:
    ServiceOptions opts_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<AgentHost>> agents_;
    std::uint64_t next_id_ = 1;
};

// HTTP error status for a runtime error code.
int http_status(Errc code);

// HTTP/JSON + SSE front end.
class HttpService {
public:
    explicit HttpService(Registry& registry);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    // port 0 picks a free port. Returns the bound port.
    Result<int> bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tiermem::service
