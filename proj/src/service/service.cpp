#include "tiermem/service/service.hpp"

#include "httplib.h"

#include <charconv>
#include <fstream>
#include <sstream>

namespace tiermem::service {

namespace {

using nlohmann::json;

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

json message_json(const Message& m) {
    return {{"id", m.id}, {"role", to_string(m.role)}, {"timestamp", format_iso8601(m.timestamp)}, {"text", m.text}};
}

template <typename T, typename F>
json page_json(const Page<T>& p, F&& item) {
    json j = {{"page", p.page_index}, {"page_size", p.page_size}, {"total_matches", p.total_matches},
              {"has_more", p.has_more}, {"results", json::array()}};
    for (const auto& x : p.items) j["results"].push_back(item(x));
    return j;
}

Result<json> read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) return make_error(Errc::Io, "cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) return make_error(Errc::CorruptSnapshot, file.string() + ": invalid JSON");
    return j;
}

std::optional<std::uint64_t> id_number(const std::string& id) {
    static constexpr std::string_view kPrefix = "agent-";
    if (id.rfind(kPrefix, 0) != 0) return std::nullopt;
    std::uint64_t n = 0;
    const char* b = id.data() + kPrefix.size();
    const char* e = id.data() + id.size();
    auto [p, ec] = std::from_chars(b, e, n);
    if (ec != std::errc{} || p != e) return std::nullopt;
    return n;
}

}  // namespace

int http_status(Errc code) {
    switch (code) {
        case Errc::NotFound: return 404;
        case Errc::OutOfOrder: return 409;
        case Errc::ProcessorUnavailable: return 502;
        case Errc::Io:
        case Errc::CorruptSnapshot: return 500;
        default: return 400;
    }
}

Registry::Registry(ServiceOptions opts) : opts_(std::move(opts)) {}

Registry::~Registry() {
    std::lock_guard lock(mu_);
    for (auto& [id, host] : agents_) host->close();
}

std::vector<std::pair<std::string, Error>> Registry::load_all() {
    std::vector<std::pair<std::string, Error>> failures;
    std::error_code ec;
    if (!std::filesystem::is_directory(opts_.data_dir, ec)) return failures;
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(opts_.data_dir, ec))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "descriptor.json")) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        const std::string id = dir.filename().string();
        auto d = read_json_file(dir / "descriptor.json");
        if (!d) {
            failures.emplace_back(id, d.error());
            continue;
        }
        AgentDescriptor desc;
        desc.agent_id = id;
        desc.name = d->value("name", id);
        auto created = parse_iso8601(d->value("created_at", ""));
        desc.created_at = created ? *created : Instant{};
        auto agent = Agent::load(dir);
        if (!agent) {
            failures.emplace_back(id, agent.error());
            continue;
        }
        std::lock_guard lock(mu_);
        agents_[id] = std::make_shared<AgentHost>(std::move(desc), std::move(*agent));
        if (auto n = id_number(id)) next_id_ = std::max(next_id_, *n + 1);
    }
    return failures;
}

Result<std::shared_ptr<AgentHost>> Registry::create(const std::string& name, const json& config_overrides,
                                                    Instant created_at) {
    auto cfg = config_from_json(config_overrides, opts_.defaults);
    if (!cfg) return cfg.error();
    auto processor = make_processor(*cfg);
    if (!processor) return processor.error();
    auto embedder = make_embedder(*cfg);
    if (!embedder) return embedder.error();
    auto agent = Agent::create(*cfg, *processor, *embedder, created_at);
    if (!agent) return agent.error();

    std::shared_ptr<AgentHost> host;
    {
        std::lock_guard lock(mu_);
        AgentDescriptor desc{"agent-" + std::to_string(next_id_++), name, created_at};
        host = std::make_shared<AgentHost>(std::move(desc), std::move(*agent));
        agents_[host->descriptor().agent_id] = host;
    }
    if (auto r = persist(host->descriptor().agent_id); !r) {
        std::lock_guard lock(mu_);
        agents_.erase(host->descriptor().agent_id);
        return r.error();
    }
    return host;
}

std::shared_ptr<AgentHost> Registry::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = agents_.find(id);
    return it == agents_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<AgentHost>> Registry::list() const {
    std::lock_guard lock(mu_);
    std::vector<std::shared_ptr<AgentHost>> out;
    for (const auto& [id, host] : agents_) out.push_back(host);
    return out;
}

Result<void> Registry::persist(const std::string& id) const {
    auto host = find(id);
    if (!host) return make_error(Errc::NotFound, "unknown agent " + id);
    const auto dir = agent_dir(id);
    if (auto r = host->save(dir); !r) return r;
    const auto& d = host->descriptor();
    json desc = {{"agent_id", d.agent_id}, {"name", d.name}, {"created_at", format_iso8601(d.created_at)}};
    return write_file_atomic(dir / "descriptor.json", desc.dump(2));
}

Result<void> Registry::remove(const std::string& id) {
    std::shared_ptr<AgentHost> host;
    {
        std::lock_guard lock(mu_);
        auto it = agents_.find(id);
        if (it == agents_.end()) return make_error(Errc::NotFound, "unknown agent " + id);
        host = it->second;
        agents_.erase(it);
    }
    host->close();
    std::error_code ec;
    std::filesystem::remove_all(agent_dir(id), ec);
    if (ec) return make_error(Errc::Io, "cannot remove " + agent_dir(id).string() + ": " + ec.message());
    return {};
}

std::size_t Registry::tick_all(Instant now) {
    std::size_t n = 0;
    for (const auto& host : list()) {
        const bool has_interval = host->read([](const Agent& a) { return a.config().tick_interval.has_value(); });
        if (!has_interval) continue;
        auto r = host->tick(now);
        if (r && *r) ++n;
    }
    return n;
}

struct HttpService::Impl {
    Registry& registry;
    httplib::Server server;

    explicit Impl(Registry& r) : registry(r) { routes(); }

    static void send_json(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(dump(body), "application/json");
    }

    static void send_error(httplib::Response& res, const Error& e) {
        send_json(res, http_status(e.code), {{"error", {{"code", std::string(to_string(e.code))}, {"message", e.message}}}});
    }

    static void bad_request(httplib::Response& res, const std::string& message) {
        send_json(res, 400, {{"error", {{"code", "BadRequest"}, {"message", message}}}});
    }

    std::shared_ptr<AgentHost> agent_or_404(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.path_params.at("id");
        auto host = registry.find(id);
        if (!host) send_error(res, make_error(Errc::NotFound, "unknown agent " + id));
        return host;
    }

    static std::optional<json> body_object(const httplib::Request& req, httplib::Response& res) {
        auto j = json::parse(req.body.empty() ? std::string("{}") : req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            bad_request(res, "body must be a JSON object");
            return std::nullopt;
        }
        return j;
    }

    static std::optional<std::size_t> page_param(const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("page")) return 0;
        const std::string s = req.get_param_value("page");
        std::size_t n = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
        if (ec != std::errc{} || p != s.data() + s.size()) {
            bad_request(res, "page must be a non-negative integer");
            return std::nullopt;
        }
        return n;
    }

    void routes() {
        server.Post("/agents", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = body_object(req, res);
            if (!body) return;
            if (body->contains("name") && !(*body)["name"].is_string()) return bad_request(res, "name must be a string");
            if (body->contains("config") && !(*body)["config"].is_object())
                return bad_request(res, "config must be an object");
            auto host = registry.create(body->value("name", "agent"), body->value("config", json::object()));
            if (!host) return send_error(res, host.error());
            send_json(res, 201, {{"agent_id", (*host)->descriptor().agent_id}});
        });

        server.Get("/agents", [this](const httplib::Request&, httplib::Response& res) {
            json out = json::array();
            for (const auto& h : registry.list())
                out.push_back(h->read([&](const Agent& a) { return descriptor_to_json(h->descriptor(), a.config()); }));
            send_json(res, 200, out);
        });

        server.Get("/agents/:id", [this](const httplib::Request& req, httplib::Response& res) {
            auto host = agent_or_404(req, res);
            if (!host) return;
            send_json(res, 200, host->read([&](const Agent& a) { return descriptor_to_json(host->descriptor(), a.config()); }));
        });

        server.Delete("/agents/:id", [this](const httplib::Request& req, httplib::Response& res) {
            auto r = registry.remove(req.path_params.at("id"));
            if (!r) return send_error(res, r.error());
            send_json(res, 200, {{"removed", req.path_params.at("id")}});
        });

        server.Post("/agents/:id/messages", [this](const httplib::Request& req, httplib::Response& res) {
            auto host = agent_or_404(req, res);
            if (!host) return;
            auto body = body_object(req, res);
            if (!body) return;
            if (!body->contains("text") || !(*body)["text"].is_string())
                return bad_request(res, "text must be a string");
            EventKind kind = EventKind::user_message;
            if (body->contains("kind")) {
                auto k = (*body)["kind"].is_string() ? event_kind_from_string((*body)["kind"].get<std::string>())
                                                     : std::nullopt;
                if (!k) return bad_request(res, "unknown event kind");
                kind = *k;
            }
            std::optional<Instant> at;
            if (body->contains("at")) {
                auto t = (*body)["at"].is_string() ? parse_iso8601((*body)["at"].get<std::string>())
                                                   : Result<Instant>(make_error(Errc::InvalidRange, "at must be a string"));
                if (!t) return bad_request(res, t.error().what());
                at = *t;
            }
            auto trace = host->submit(kind, (*body)["text"].get<std::string>(), at);
            if (!trace) return send_error(res, trace.error());
            send_json(res, 200, {{"trace_id", trace->trace_id}, {"outbound", trace->outbound},
                                 {"chain_limit_hit", trace->chain_limit_hit}});
        });

        server.Get("/agents/:id/stream", [this](const httplib::Request& req, httplib::Response& res) {
            auto host = agent_or_404(req, res);
            if (!host) return;
            std::uint64_t since = 0;
            std::string from = req.has_param("since") ? req.get_param_value("since") : req.get_header_value("Last-Event-ID");
            if (!from.empty()) {
                auto [p, ec] = std::from_chars(from.data(), from.data() + from.size(), since);
                if (ec != std::errc{} || p != from.data() + from.size()) return bad_request(res, "since must be an integer");
            }
            const bool follow = !(req.has_param("follow") && req.get_param_value("follow") == "false");
            const auto poll = registry.options().stream_poll;
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream", [host, since, follow, poll](std::size_t, httplib::DataSink& sink) mutable {
                    for (const auto& e : host->entries_since(since)) {
                        std::string frame = "id: " + std::to_string(e.seq) + "\nevent: step-entry\ndata: " +
                                            dump(e.body) + "\n\n";
                        if (!sink.write(frame.data(), frame.size())) return false;
                        since = e.seq;
                    }
                    if (!follow) {
                        sink.done();
                        return true;
                    }
                    if (!sink.is_writable()) return false;
                    if (!host->wait_for(since, poll)) {
                        sink.done();
                        return true;
                    }
                    return true;
                });
        });

        server.Get("/agents/:id/memory", [this](const httplib::Request& req, httplib::Response& res) {
            auto host = agent_or_404(req, res);
            if (!host) return;
            send_json(res, 200, host->read([](const Agent& a) {
                const auto& q = a.queue();
                return json{{"working_context", a.working().text},
                            {"working_context_cap", a.working().cap},
                            {"queue_occupancy", {{"tokens", q.occupancy()}, {"cap", q.config.cap}}},
                            {"queue_length", q.messages.size()},
                            {"summary", q.summary ? json(q.summary->text) : json(nullptr)},
                            {"pressure_warned", q.warned},
                            {"recall_count", a.recall().size()},
                            {"archival_count", a.archival().size()},
                            {"evicted_count", a.evicted_count()},
                            {"step_count", a.step_count()}};
            }));
        });

        server.Post("/agents/:id/memory/archival", [this](const httplib::Request& req, httplib::Response& res) {
            auto host = agent_or_404(req, res);
            if (!host) return;
            auto body = body_object(req, res);
            if (!body) return;
            if (!body->contains("text") || !(*body)["text"].is_string())
                return bad_request(res, "text must be a string");
            auto id = host->archival_insert((*body)["text"].get<std::string>());
            if (!id) return send_error(res, id.error());
            send_json(res, 201, {{"entry_id", *id}});
        });

        server.Get("/agents/:id/memory/recall", [this](const httplib::Request& req, httplib::Response& res) {
            auto host = agent_or_404(req, res);
            if (!host) return;
            auto page = page_param(req, res);
            if (!page) return;
            Result<json> out = host->read([&](const Agent& a) -> Result<json> {
                const std::size_t size = a.config().page_size;
                if (req.has_param("start") || req.has_param("end")) {
                    auto s = parse_iso8601(req.get_param_value("start"));
                    auto e = parse_iso8601(req.get_param_value("end"));
                    if (!s) return s.error();
                    if (!e) return e.error();
                    auto p = a.recall().search_date(*s, *e, *page, size);
                    if (!p) return p.error();
                    return page_json(*p, message_json);
                }
                auto p = a.recall().search_text(req.get_param_value("q"), *page, size);
                if (!p) return p.error();
                json j = page_json(*p, message_json);
                j["query"] = req.get_param_value("q");
                return j;
            });
            if (!out) return send_error(res, out.error());
            send_json(res, 200, *out);
        });

        server.Get("/agents/:id/memory/archival", [this](const httplib::Request& req, httplib::Response& res) {
            auto host = agent_or_404(req, res);
            if (!host) return;
            auto page = page_param(req, res);
            if (!page) return;
            Result<json> out = host->read([&](const Agent& a) -> Result<json> {
                auto p = a.archival().search(req.get_param_value("q"), *page, a.config().page_size);
                if (!p) return p.error();
                json j = page_json(*p, [](const ArchivalHit& h) {
                    return json{{"id", h.id}, {"score", h.score}, {"text", h.text}};
                });
                j["query"] = req.get_param_value("q");
                return j;
            });
            if (!out) return send_error(res, out.error());
            send_json(res, 200, *out);
        });

        server.Post("/agents/:id/snapshot", [this](const httplib::Request& req, httplib::Response& res) {
            auto host = agent_or_404(req, res);
            if (!host) return;
            const std::string id = host->descriptor().agent_id;
            if (auto r = registry.persist(id); !r) return send_error(res, r.error());
            send_json(res, 200, {{"agent_id", id}, {"path", registry.agent_dir(id).string()}});
        });

        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string what = "internal error";
            try {
                if (ep) std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                what = e.what();
            } catch (...) {
            }
            send_json(res, 500, {{"error", {{"code", "Internal"}, {"message", what}}}});
        });
    }
};

HttpService::HttpService(Registry& registry) : impl_(std::make_unique<Impl>(registry)) {}

HttpService::~HttpService() { stop(); }

Result<int> HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) return make_error(Errc::Io, "cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port))
        return make_error(Errc::Io, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace tiermem::service
