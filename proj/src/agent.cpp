#include "tiermem/agent.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tiermem {

using nlohmann::json;

namespace {

std::string dump(const json& j, int indent = -1) { return j.dump(indent, ' ', false, json::error_handler_t::replace); }

std::size_t utf8_floor(std::string_view s, std::size_t n) {
    if (n >= s.size()) return s.size();
    while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
    return n;
}

// Longest prefix of text (plus suffix) whose rendered message fits max_cost.
std::size_t fitting_prefix(std::string_view text, std::string_view suffix, const Message& shell, Tokens max_cost,
                           const Tokenizer& tok) {
    auto cost = [&](std::size_t n) {
        Message m = shell;
        m.text = std::string(text.substr(0, n)) + std::string(suffix);
        return message_cost(m, tok);
    };
    std::size_t lo = 0, hi = text.size();
    while (lo < hi) {
        const std::size_t mid = utf8_floor(text, (lo + hi + 1) / 2);
        if (mid <= lo) {
            // Step over a multi-byte sequence.
            std::size_t next = lo + 1;
            while (next < text.size() && (static_cast<unsigned char>(text[next]) & 0xC0) == 0x80) ++next;
            if (next <= hi && cost(next) <= max_cost)
                lo = next;
            else
                break;
            continue;
        }
        if (cost(mid) <= max_cost)
            lo = mid;
        else
            hi = mid - 1;
    }
    return utf8_floor(text, lo);
}

class ProcessorSummarizer final : public Summarizer {
public:
    explicit ProcessorSummarizer(Processor& p) : processor_(p) {}

    Result<std::string> summarize(const std::optional<std::string>& prior, std::span<const Message> evicted,
                                  Tokens cap) override {
        if (evicted.empty()) return prior.value_or(std::string{});
        std::string prompt = "Summarize the conversation excerpt below in at most " + std::to_string(cap) +
                             " tokens. Keep names, dates, preferences and facts. Reply with the summary only.\n";
        if (prior) prompt += "Earlier summary: " + *prior + "\n";
        for (const auto& m : evicted) prompt += render_message(m) + "\n";
        auto out = processor_.complete(prompt);
        if (!out) return out.error();
        if (auto parsed = parse_output(*out)) {
            if (parsed->call && parsed->call->name == "send_message" && parsed->call->params.contains("message") &&
                parsed->call->params["message"].is_string())
                return parsed->call->params["message"].get<std::string>();
            if (parsed->thoughts) return *parsed->thoughts;
        }
        return *out;
    }

private:
    Processor& processor_;
};

std::string event_text(const Event& e) {
    switch (e.kind) {
        case EventKind::user_message:
        case EventKind::system_alert: return e.payload;
        case EventKind::user_interaction: return "[user interaction] " + e.payload;
        case EventKind::scheduled: return "[scheduled heartbeat] " + (e.payload.empty() ? std::string("timer fired") : e.payload);
    }
    return e.payload;
}

json message_to_json(const Message& m) {
    return json{{"id", m.id}, {"role", to_string(m.role)}, {"text", m.text}, {"timestamp", format_iso8601(m.timestamp)}};
}

}  // namespace

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::user_message: return "user_message";
        case EventKind::system_alert: return "system_alert";
        case EventKind::user_interaction: return "user_interaction";
        case EventKind::scheduled: return "scheduled";
    }
    return "unknown";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
    for (auto k : {EventKind::user_message, EventKind::system_alert, EventKind::user_interaction, EventKind::scheduled})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

std::string digest_hex(std::string_view text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Result<std::string> build_instructions(const AgentConfig& config, const FunctionRegistry& registry) {
    auto schema = render_schema(registry.schemas());
    if (!schema) return schema.error();
    std::string out = config.preamble ? *config.preamble : std::string(default_memory_preamble());
    out += "\n";
    out += *schema;
    return out;
}

Agent::Agent(AgentConfig config, std::shared_ptr<Processor> processor, std::shared_ptr<const Embedder> embedder)
    : config_(std::move(config)),
      processor_(std::move(processor)),
      embedder_(std::move(embedder)),
      archival_(embedder_) {}

Result<Agent> Agent::create(AgentConfig config, std::shared_ptr<Processor> processor,
                            std::shared_ptr<const Embedder> embedder, Instant created_at) {
    if (auto r = config.validate(); !r) return r.error();
    if (!processor) return make_error(Errc::InvalidConfig, "processor binding missing");
    if (!embedder) return make_error(Errc::InvalidConfig, "embedder binding missing");

    Agent a(std::move(config), std::move(processor), std::move(embedder));
    a.registry_ = FunctionRegistry::defaults();
    for (const auto& name : a.config_.disabled_functions) {
        if (!a.registry_.find(name)) return make_error(Errc::InvalidConfig, "disabled_functions: unknown '" + name + "'");
        a.registry_ = a.registry_.without({name});
    }
    auto instructions = build_instructions(a.config_, a.registry_);
    if (!instructions) return instructions.error();
    a.instructions_ = std::move(*instructions);
    auto budget = make_budget(a.config_.budget_total, a.instructions_, *a.tok_);
    if (!budget) return budget.error();
    a.budget_ = *budget;
    a.working_.cap = a.budget_.working_cap;
    a.queue_.config = QueueConfig{a.budget_.queue_cap, a.config_.warn_ratio, a.config_.evict_target_ratio,
                                  a.config_.summary_ratio};
    if (auto r = a.queue_.config.validate(); !r) return r.error();
    a.created_at_ = created_at;
    a.last_event_at_ = created_at;
    return a;
}

Agent::Snapshot Agent::snapshot() const {
    return Snapshot{working_,     queue_,       recall_.size(),  archival_.size(), step_count_,
                    next_id_,     evicted_count_, last_event_at_, paused_until_};
}

void Agent::restore(Snapshot s) {
    working_ = std::move(s.working);
    queue_ = std::move(s.queue);
    recall_.truncate(s.recall_size);
    archival_.truncate(s.archival_size);
    step_count_ = s.step_count;
    next_id_ = s.next_id;
    evicted_count_ = s.evicted_count;
    last_event_at_ = s.last_event_at;
    paused_until_ = s.paused_until;
}

std::string Agent::next_id() { return "m" + std::to_string(next_id_++); }

Instant Agent::stamp(Instant at) const {
    if (!recall_.entries().empty()) at = std::max(at, recall_.entries().back().message.timestamp);
    return at;
}

Result<std::string> Agent::compose() const {
    MainContext ctx{instructions_, working_.text, queue_.rendered()};
    return tiermem::compose(ctx, budget_, *tok_);
}

Result<void> Agent::admit(Message m) {
    if (message_cost(m, *tok_) > budget_.queue_cap)
        return make_error(Errc::MessageTooLarge, "message " + m.id + " exceeds the queue cap");
    // Recall first: eviction below can never orphan a message.
    if (auto r = recall_.insert(m); !r) return r.error();

    TruncationSummarizer truncation(*tok_);
    ProcessorSummarizer via_processor(*processor_);
    Summarizer& summarizer = config_.summarizer == "processor" ? static_cast<Summarizer&>(via_processor)
                                                                : static_cast<Summarizer&>(truncation);
    for (EvictMode mode : {EvictMode::Force, EvictMode::Flush}) {
        auto r = enqueue(queue_, m, *tok_);
        if (r) {
            queue_ = std::move(r->state);
            if (r->warning) {
                if (auto w = recall_.insert(*r->warning); !w) return w.error();
            }
            return {};
        }
        if (r.error().code != Errc::QueueFull) return r.error();
        auto ev = evict(queue_, summarizer, mode, *tok_);
        if (!ev) return ev.error();
        for (const auto& id : ev->evicted_ids)
            if (!recall_.contains(id))
                return make_error(Errc::NotFound, "evicted message " + id + " missing from recall");
        evicted_count_ += ev->evicted_ids.size();
        queue_ = std::move(ev->state);
    }
    auto r = enqueue(queue_, std::move(m), *tok_);
    if (!r) return r.error();
    queue_ = std::move(r->state);
    if (r->warning) {
        if (auto w = recall_.insert(*r->warning); !w) return w.error();
    }
    return {};
}

Result<void> Agent::admit_text(Role role, std::string_view text, Instant at, bool split) {
    const Tokens max_cost = max_message_tokens();
    const Instant ts = stamp(at);
    std::string_view rest = text;
    do {
        Message m = make_message(next_id(), role, "", ts, *tok_);
        if (message_cost(make_message(m.id, role, std::string(rest), ts, *tok_), *tok_) <= max_cost) {
            m = make_message(m.id, role, std::string(rest), ts, *tok_);
            rest = {};
        } else if (split) {
            std::size_t n = fitting_prefix(rest, "", m, max_cost, *tok_);
            if (n == 0) n = std::min<std::size_t>(rest.size(), 1);
            m = make_message(m.id, role, std::string(rest.substr(0, n)), ts, *tok_);
            rest.remove_prefix(n);
        } else {
            static constexpr std::string_view kCut = " ...[truncated]";
            const std::size_t n = fitting_prefix(rest, kCut, m, max_cost, *tok_);
            m = make_message(m.id, role, std::string(rest.substr(0, n)) + std::string(kCut), ts, *tok_);
            rest = {};
        }
        if (auto r = admit(std::move(m)); !r) return r;
    } while (!rest.empty());
    return {};
}

Result<void> Agent::observe(Role role, std::string_view text, Instant at) {
    if (text.empty()) return make_error(Errc::InvalidEvent, "empty history message");
    if (!recall_.entries().empty() && at < recall_.entries().back().message.timestamp)
        return make_error(Errc::OutOfOrder, "history timestamp precedes the last recorded message");
    auto snap = snapshot();
    auto r = admit_text(role, text, at, true);
    if (!r) {
        restore(std::move(snap));
        return r;
    }
    last_event_at_ = std::max(last_event_at_, at);
    return {};
}

Result<std::string> Agent::archival_insert(std::string_view text, Instant at) { return archival_.insert(text, at); }

Result<StepTrace> Agent::step(const Event& event) {
    if (event.kind == EventKind::user_message && event.payload.empty())
        return make_error(Errc::InvalidEvent, "user_message payload is empty");
    if (event.at < last_event_at_ ||
        (!recall_.entries().empty() && event.at < recall_.entries().back().message.timestamp))
        return make_error(Errc::OutOfOrder, "event at " + format_iso8601(event.at) + " precedes the agent's last event");
    auto snap = snapshot();
    auto trace = run_step(event);
    if (!trace) restore(std::move(snap));
    return trace;
}

Result<StepTrace> Agent::run_step(const Event& event) {
    const Instant now = stamp(event.at);
    last_event_at_ = event.at;
    ++step_count_;

    StepTrace trace;
    trace.trace_id = "t" + std::to_string(step_count_);

    const Role event_role = event.kind == EventKind::user_message ? Role::user : Role::system;
    if (auto r = admit_text(event_role, event_text(event), now, true); !r) return r.error();

    for (std::size_t i = 0; i < config_.max_chain; ++i) {
        auto prompt = compose();
        if (!prompt) return prompt.error();

        StepRecord rec;
        rec.input_digest = digest_hex(*prompt);
        rec.prompt_tokens = tok_->count(*prompt);

        auto output = processor_->complete(*prompt);
        if (!output) {
            if (output.error().code == Errc::ProcessorUnavailable) return output.error();
            return make_error(Errc::ProcessorUnavailable, output.error().what());
        }
        rec.raw_output = *output;

        auto parsed = parse_output(*output);
        const Role out_role = parsed && parsed->call ? Role::function_call : Role::assistant;
        if (!output->empty()) {
            if (auto r = admit_text(out_role, *output, now, false); !r) return r.error();
        }

        bool heartbeat = false;
        if (!parsed) {
            rec.error = parsed.error().what();
            heartbeat = true;
        } else {
            rec.thoughts = parsed->thoughts;
            if (parsed->call) {
                auto call = validate(*parsed->call, parsed->request_heartbeat, registry_);
                if (!call) {
                    rec.error = call.error().what();
                    heartbeat = true;
                } else {
                    ToolContext ctx{working_, recall_, archival_, rec.outbound, paused_until_, now,
                                    config_.page_size, config_.result_item_chars, *tok_};
                    Execution exec = execute(*call, ctx);
                    rec.call = *call;
                    rec.function_result = exec.result;
                    heartbeat = call->request_heartbeat;
                    if (auto r = admit_text(Role::function_result, exec.result, now, false); !r) return r.error();
                }
            }
        }
        if (rec.error) {
            if (auto r = admit_text(Role::system, *rec.error + ". Reply with one valid JSON object.", now, false); !r)
                return r.error();
        }
        trace.outbound.insert(trace.outbound.end(), rec.outbound.begin(), rec.outbound.end());
        trace.records.push_back(std::move(rec));

        if (!heartbeat) break;
        if (i + 1 == config_.max_chain) {
            trace.chain_limit_hit = true;
            if (auto r = admit_text(Role::system, kChainLimitNote, now, false); !r) return r.error();
        }
    }
    return trace;
}

Result<std::optional<StepTrace>> Agent::tick(Instant now) {
    if (!config_.tick_interval) return make_error(Errc::InvalidConfig, "tick_interval is not configured");
    if (paused_until_ && now < *paused_until_) return std::optional<StepTrace>{};
    if (now < last_event_at_ + *config_.tick_interval) return std::optional<StepTrace>{};
    auto trace = step(Event{EventKind::scheduled, "", now});
    if (!trace) return trace.error();
    return std::optional<StepTrace>{std::move(*trace)};
}

Result<void> Agent::save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) return make_error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());

    json queue_messages = json::array();
    for (const auto& m : queue_.messages) queue_messages.push_back(message_to_json(m));
    json j = {
        {"version", 1},
        {"config", config_to_json(config_)},
        {"instructions", instructions_},
        {"budget",
         {{"total", budget_.total},
          {"system_reserved", budget_.system_reserved},
          {"working_cap", budget_.working_cap},
          {"queue_cap", budget_.queue_cap}}},
        {"created_at", format_iso8601(created_at_)},
        {"last_event_at", format_iso8601(last_event_at_)},
        {"paused_until", paused_until_ ? json(format_iso8601(*paused_until_)) : json(nullptr)},
        {"step_count", step_count_},
        {"next_message_id", next_id_},
        {"evicted_count", evicted_count_},
        {"working_context", {{"text", working_.text}, {"cap", working_.cap}}},
        {"queue",
         {{"messages", std::move(queue_messages)},
          {"summary", queue_.summary ? message_to_json(*queue_.summary) : json(nullptr)},
          {"warned", queue_.warned},
          {"evictions", queue_.evictions}}},
    };
    if (auto r = recall_.save(dir / "recall.jsonl"); !r) return r;
    if (auto r = archival_.save(dir / "archival.jsonl"); !r) return r;
    return write_file_atomic(dir / "agent.json", dump(j, 2) + "\n");
}

namespace {

Error corrupt_field(const std::string& field, const std::string& why = "missing or wrong type") {
    return make_error(Errc::CorruptSnapshot, "agent.json: " + field + ": " + why);
}

const json* field(const json& j, const char* key, json::value_t type) {
    auto it = j.find(key);
    if (it == j.end()) return nullptr;
    if (type == json::value_t::number_unsigned ? !it->is_number_unsigned() : it->type() != type) return nullptr;
    return &*it;
}

Result<Message> message_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) return corrupt_field(where);
    const json* id = field(j, "id", json::value_t::string);
    const json* role = field(j, "role", json::value_t::string);
    const json* text = field(j, "text", json::value_t::string);
    const json* ts = field(j, "timestamp", json::value_t::string);
    if (!id) return corrupt_field(where + ".id");
    if (!role || !role_from_string(role->get<std::string>())) return corrupt_field(where + ".role");
    if (!text) return corrupt_field(where + ".text");
    if (!ts) return corrupt_field(where + ".timestamp");
    auto t = parse_iso8601(ts->get<std::string>());
    if (!t) return corrupt_field(where + ".timestamp", "bad timestamp");
    return make_message(id->get<std::string>(), *role_from_string(role->get<std::string>()), text->get<std::string>(), *t);
}

Result<Instant> instant_field(const json& j, const char* key) {
    const json* f = field(j, key, json::value_t::string);
    if (!f) return corrupt_field(key);
    auto t = parse_iso8601(f->get<std::string>());
    if (!t) return corrupt_field(key, "bad timestamp");
    return *t;
}

Result<json> read_agent_json(const std::filesystem::path& dir) {
    std::ifstream in(dir / "agent.json", std::ios::binary);
    if (!in) return make_error(Errc::CorruptSnapshot, "agent.json: cannot open in " + dir.string());
    std::stringstream ss;
    ss << in.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return make_error(Errc::CorruptSnapshot, "agent.json: not a JSON object");
    return j;
}

}  // namespace

Result<Agent> Agent::load(const std::filesystem::path& dir) {
    auto j = read_agent_json(dir);
    if (!j) return j.error();
    const json* cfg_json = field(*j, "config", json::value_t::object);
    if (!cfg_json) return corrupt_field("config");
    auto cfg = config_from_json(*cfg_json);
    if (!cfg) return corrupt_field("config", cfg.error().what());
    auto processor = make_processor(*cfg);
    if (!processor) return processor.error();
    auto embedder = make_embedder(*cfg);
    if (!embedder) return embedder.error();
    return load(dir, std::move(*processor), std::move(*embedder));
}

Result<Agent> Agent::load(const std::filesystem::path& dir, std::shared_ptr<Processor> processor,
                          std::shared_ptr<const Embedder> embedder) {
    auto jr = read_agent_json(dir);
    if (!jr) return jr.error();
    const json& j = *jr;

    const json* cfg_json = field(j, "config", json::value_t::object);
    if (!cfg_json) return corrupt_field("config");
    auto cfg = config_from_json(*cfg_json);
    if (!cfg) return corrupt_field("config", cfg.error().what());
    auto created = instant_field(j, "created_at");
    if (!created) return created.error();

    auto made = create(std::move(*cfg), std::move(processor), std::move(embedder), *created);
    if (!made) return corrupt_field("config", made.error().what());
    Agent a = std::move(*made);

    const json* instructions = field(j, "instructions", json::value_t::string);
    if (!instructions) return corrupt_field("instructions");
    if (instructions->get<std::string>() != a.instructions_)
        return corrupt_field("instructions", "does not match the configured function registry");

    const json* budget = field(j, "budget", json::value_t::object);
    if (!budget) return corrupt_field("budget");
    const TokenBudget stored{budget->value("total", Tokens{0}), budget->value("system_reserved", Tokens{0}),
                             budget->value("working_cap", Tokens{0}), budget->value("queue_cap", Tokens{0})};
    if (!(stored == a.budget_)) return corrupt_field("budget", "does not match the configuration");

    auto last = instant_field(j, "last_event_at");
    if (!last) return last.error();
    a.last_event_at_ = *last;
    if (auto it = j.find("paused_until"); it != j.end() && !it->is_null()) {
        auto p = instant_field(j, "paused_until");
        if (!p) return p.error();
        a.paused_until_ = *p;
    }
    const json* steps = field(j, "step_count", json::value_t::number_unsigned);
    const json* next = field(j, "next_message_id", json::value_t::number_unsigned);
    const json* evicted = field(j, "evicted_count", json::value_t::number_unsigned);
    if (!steps) return corrupt_field("step_count");
    if (!next) return corrupt_field("next_message_id");
    if (!evicted) return corrupt_field("evicted_count");
    a.step_count_ = steps->get<std::uint64_t>();
    a.next_id_ = next->get<std::uint64_t>();
    a.evicted_count_ = evicted->get<std::size_t>();

    const json* wc = field(j, "working_context", json::value_t::object);
    if (!wc || !field(*wc, "text", json::value_t::string)) return corrupt_field("working_context.text");
    a.working_.text = (*wc)["text"].get<std::string>();
    if (a.tok_->count(a.working_.text) > a.working_.cap) return corrupt_field("working_context.text", "exceeds cap");

    const json* q = field(j, "queue", json::value_t::object);
    if (!q) return corrupt_field("queue");
    const json* msgs = field(*q, "messages", json::value_t::array);
    if (!msgs) return corrupt_field("queue.messages");
    for (std::size_t i = 0; i < msgs->size(); ++i) {
        auto m = message_from_json((*msgs)[i], "queue.messages[" + std::to_string(i) + "]");
        if (!m) return m.error();
        a.queue_.messages.push_back(std::move(*m));
    }
    if (auto it = q->find("summary"); it != q->end() && !it->is_null()) {
        auto m = message_from_json(*it, "queue.summary");
        if (!m) return m.error();
        a.queue_.summary = std::move(*m);
    }
    const json* warned = field(*q, "warned", json::value_t::boolean);
    const json* evictions = field(*q, "evictions", json::value_t::number_unsigned);
    if (!warned) return corrupt_field("queue.warned");
    if (!evictions) return corrupt_field("queue.evictions");
    a.queue_.warned = warned->get<bool>();
    a.queue_.evictions = evictions->get<std::size_t>();
    if (a.queue_.occupancy(*a.tok_) > a.budget_.queue_cap) return corrupt_field("queue", "exceeds queue cap");

    auto recall = RecallStore::load(dir / "recall.jsonl");
    if (!recall) return recall.error();
    a.recall_ = std::move(*recall);
    for (const auto& m : a.queue_.messages)
        if (!a.recall_.contains(m.id)) return corrupt_field("queue.messages", "message " + m.id + " missing from recall");

    auto archival = ArchivalStore::load(dir / "archival.jsonl", a.embedder_);
    if (!archival) return archival.error();
    a.archival_ = std::move(*archival);
    return a;
}

json trace_entries(const StepTrace& trace) {
    json out = json::array();
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const StepRecord& r = trace.records[i];
        auto entry = [&](const char* kind, json data) {
            out.push_back(json{{"trace_id", trace.trace_id}, {"record", i}, {"kind", kind}, {"data", std::move(data)}});
        };
        if (r.thoughts) entry("monologue", *r.thoughts);
        if (r.call) entry("function_call", json{{"name", r.call->name}, {"params", args_to_json(r.call->args)},
                                                {"request_heartbeat", r.call->request_heartbeat}});
        if (r.function_result) entry("function_result", *r.function_result);
        if (r.error) entry("error", *r.error);
        for (const auto& o : r.outbound) entry("outbound", o);
    }
    return out;
}

json trace_to_json(const StepTrace& trace) {
    json records = json::array();
    for (const auto& r : trace.records) {
        json rec = {{"input_digest", r.input_digest}, {"prompt_tokens", r.prompt_tokens}, {"raw_output", r.raw_output}};
        rec["thoughts"] = r.thoughts ? json(*r.thoughts) : json(nullptr);
        rec["call"] = r.call ? json{{"name", r.call->name}, {"params", args_to_json(r.call->args)},
                                    {"request_heartbeat", r.call->request_heartbeat}}
                             : json(nullptr);
        rec["function_result"] = r.function_result ? json(*r.function_result) : json(nullptr);
        rec["error"] = r.error ? json(*r.error) : json(nullptr);
        rec["outbound"] = r.outbound;
        records.push_back(std::move(rec));
    }
    return json{{"trace_id", trace.trace_id},
                {"records", std::move(records)},
                {"outbound", trace.outbound},
                {"chain_limit_hit", trace.chain_limit_hit}};
}

}  // namespace tiermem
