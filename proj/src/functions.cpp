#include "tiermem/functions.hpp"

#include <algorithm>
#include <chrono>
#include <set>

namespace tiermem {

namespace {

std::string dump(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

// Rejects inputs whose bracket nesting would recurse deeply in the parser.
bool nesting_within(std::string_view text, int limit) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (char c : text) {
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{' || c == '[') {
            if (++depth > limit) return false;
        } else if (c == '}' || c == ']') {
            --depth;
        }
    }
    return true;
}

Error parse_error(std::string reason) { return make_error(Errc::ParseError, std::move(reason)); }
Error validation_error(std::string reason) { return make_error(Errc::ValidationError, std::move(reason)); }

std::string clip(std::string_view s, std::size_t max_chars) {
    if (s.size() <= max_chars) return std::string(s);
    std::size_t n = max_chars;
    while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
    return std::string(s.substr(0, n)) + "...";
}

Execution failed(const Error& e) {
    return Execution{dump(Json{{"status", "Failed"}, {"error", e.what()}}), false};
}

Execution succeeded(Json body) {
    body["status"] = "OK";
    return Execution{dump(body), true};
}

template <typename T>
Json page_meta(const Page<T>& p) {
    return Json{{"page", p.page_index}, {"total_matches", p.total_matches}, {"has_more", p.has_more}};
}

const std::string& arg_string(const ValidatedCall& c, const std::string& name) {
    static const std::string empty;
    auto it = c.args.find(name);
    return it == c.args.end() ? empty : std::get<std::string>(it->second);
}

std::int64_t arg_int(const ValidatedCall& c, const std::string& name, std::int64_t fallback) {
    auto it = c.args.find(name);
    return it == c.args.end() ? fallback : std::get<std::int64_t>(it->second);
}

Result<std::size_t> page_arg(const ValidatedCall& c) {
    const std::int64_t p = arg_int(c, "page", 0);
    if (p < 0) return make_error(Errc::InvalidRange, "page must be >= 0");
    return static_cast<std::size_t>(p);
}

Json message_json(const Message& m, std::size_t item_chars) {
    return Json{{"id", m.id}, {"role", to_string(m.role)}, {"timestamp", format_iso8601(m.timestamp)},
                {"text", clip(m.text, item_chars)}};
}

}  // namespace

std::string_view to_string(ParamType t) {
    switch (t) {
        case ParamType::string: return "string";
        case ParamType::integer: return "integer";
        case ParamType::boolean: return "boolean";
    }
    return "unknown";
}

Result<void> FunctionRegistry::add(FunctionSchema schema) {
    if (find(schema.name)) return make_error(Errc::DuplicateName, "function '" + schema.name + "' already registered");
    std::set<std::string> names;
    for (const auto& p : schema.params)
        if (!names.insert(p.name).second)
            return make_error(Errc::DuplicateName, "parameter '" + p.name + "' repeated in " + schema.name);
    schemas_.push_back(std::move(schema));
    return {};
}

const FunctionSchema* FunctionRegistry::find(std::string_view name) const {
    for (const auto& s : schemas_)
        if (s.name == name) return &s;
    return nullptr;
}

FunctionRegistry FunctionRegistry::without(std::initializer_list<std::string_view> names) const {
    FunctionRegistry out;
    for (const auto& s : schemas_)
        if (std::find(names.begin(), names.end(), s.name) == names.end()) out.schemas_.push_back(s);
    return out;
}

const FunctionRegistry& FunctionRegistry::defaults() {
    static const FunctionRegistry reg = [] {
        FunctionRegistry r;
        const ParamSpec page{"page", ParamType::integer, false, "Result page to return, starting at 0."};
        auto must = [](Result<void> res) {
            if (!res) throw std::logic_error(res.error().what());
        };
        must(r.add({"send_message",
                    "Send a message to the user. This is the only way the user sees anything you write.",
                    {{"message", ParamType::string, true, "Message text shown to the user."}},
                    false}));
        must(r.add({"working_context_append",
                    "Append a line to working context. Use it for facts you need in every future reply.",
                    {{"content", ParamType::string, true, "Text to append on a new line."}},
                    false}));
        must(r.add({"working_context_replace",
                    "Replace the first exact occurrence of old_content in working context with new_content.",
                    {{"old_content", ParamType::string, true, "Exact text currently in working context."},
                     {"new_content", ParamType::string, true, "Replacement text; may be empty to delete."}},
                    false}));
        must(r.add({"recall_search_text",
                    "Search the full conversation history for messages containing the query "
                    "(case-insensitive), newest first.",
                    {{"query", ParamType::string, true, "Text to look for."}, page},
                    true}));
        must(r.add({"recall_search_date",
                    "List past messages whose timestamps fall between two dates (inclusive), oldest first.",
                    {{"start_date", ParamType::string, true, "ISO 8601 date or timestamp."},
                     {"end_date", ParamType::string, true, "ISO 8601 date or timestamp."},
                     page},
                    true}));
        must(r.add({"archival_insert",
                    "Store text in archival storage for later semantic search.",
                    {{"content", ParamType::string, true, "Text to store."}},
                    false}));
        must(r.add({"archival_search",
                    "Semantic search over archival storage, best matches first.",
                    {{"query", ParamType::string, true, "What to look for."}, page},
                    true}));
        must(r.add({"pause_heartbeats",
                    "Suppress scheduled wake-ups for a number of minutes.",
                    {{"minutes", ParamType::integer, true, "How long to stay quiet."}},
                    false}));
        return r;
    }();
    return reg;
}

Result<std::string> render_schema(std::span<const FunctionSchema> schemas) {
    if (schemas.empty()) return make_error(Errc::EmptyText, "registry is empty");
    std::vector<const FunctionSchema*> sorted;
    for (const auto& s : schemas) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->name < b->name; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i]->name == sorted[i - 1]->name)
            return make_error(Errc::DuplicateName, "function '" + sorted[i]->name + "' listed twice");

    std::string out = "FUNCTIONS\n";
    for (const auto* s : sorted) {
        out += "- " + s->name + "(";
        for (std::size_t i = 0; i < s->params.size(); ++i) {
            if (i) out += ", ";
            out += s->params[i].name;
            out += ": ";
            out += to_string(s->params[i].type);
            if (!s->params[i].required) out += "?";
        }
        out += ")";
        if (s->returns_page) out += " -> page";
        out += "\n  " + s->description + "\n";
        for (const auto& p : s->params)
            out += "  * " + p.name + (p.required ? " (required): " : " (optional): ") + p.description + "\n";
    }
    out += "Every function accepts request_heartbeat (boolean, default false) at the top level of your "
           "reply. true: the result is added to your context and you run again immediately. false: you "
           "yield until the next event.\n";
    return out;
}

Result<ParsedOutput> parse_output(std::string_view text) {
    if (!nesting_within(text, 32)) return parse_error("invalid object: nesting too deep");
    Json j = Json::parse(text.begin(), text.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return parse_error("invalid object");

    ParsedOutput out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "thoughts") {
            if (!it->is_string()) return parse_error("'thoughts' must be a string");
            out.thoughts = it->get<std::string>();
        } else if (key == "function") {
            if (!it->is_string()) return parse_error("'function' must be a string");
        } else if (key == "params") {
            if (!it->is_object()) return parse_error("'params' must be an object");
        } else if (key == "request_heartbeat") {
            if (!it->is_boolean()) return parse_error("'request_heartbeat' must be a boolean");
            out.request_heartbeat = it->get<bool>();
        } else {
            return parse_error("unknown key '" + dump(Json(key)) + "'");
        }
    }
    if (auto fn = j.find("function"); fn != j.end()) {
        FunctionCall call;
        call.name = fn->get<std::string>();
        if (auto p = j.find("params"); p != j.end()) call.params = *p;
        out.call = std::move(call);
    } else if (j.contains("params")) {
        return parse_error("'params' given without 'function'");
    }
    if (out.request_heartbeat && !out.call) return parse_error("request_heartbeat requires a function call");
    return out;
}

Result<ValidatedCall> validate(const FunctionCall& call, bool request_heartbeat, const FunctionRegistry& registry) {
    const FunctionSchema* schema = registry.find(call.name);
    if (!schema) return validation_error("unknown function '" + dump(Json(call.name)) + "'");
    if (!call.params.is_object()) return validation_error("params of " + call.name + " must be an object");

    ValidatedCall out{call.name, {}, request_heartbeat};
    for (auto it = call.params.begin(); it != call.params.end(); ++it) {
        const auto spec = std::find_if(schema->params.begin(), schema->params.end(),
                                       [&](const ParamSpec& p) { return p.name == it.key(); });
        if (spec == schema->params.end())
            return validation_error("unknown parameter '" + dump(Json(it.key())) + "' for " + call.name);
        switch (spec->type) {
            case ParamType::string:
                if (!it->is_string()) return validation_error("parameter '" + spec->name + "' expects string");
                out.args.emplace(spec->name, it->get<std::string>());
                break;
            case ParamType::integer:
                if (it->is_number_integer() && !(it->is_number_unsigned() && it->get<std::uint64_t>() > INT64_MAX))
                    out.args.emplace(spec->name, it->get<std::int64_t>());
                else
                    return validation_error("parameter '" + spec->name + "' expects integer");
                break;
            case ParamType::boolean:
                if (!it->is_boolean()) return validation_error("parameter '" + spec->name + "' expects boolean");
                out.args.emplace(spec->name, it->get<bool>());
                break;
        }
    }
    for (const auto& p : schema->params)
        if (p.required && !out.args.count(p.name))
            return validation_error("missing required parameter '" + p.name + "' for " + call.name);
    return out;
}

Json args_to_json(const ArgMap& args) {
    Json params = Json::object();
    for (const auto& [k, v] : args) std::visit([&](const auto& x) { params[k] = x; }, v);
    return params;
}

std::string render_call(const ValidatedCall& call, const std::optional<std::string>& thoughts) {
    Json j = Json::object();
    if (thoughts) j["thoughts"] = *thoughts;
    j["function"] = call.name;
    j["params"] = args_to_json(call.args);
    j["request_heartbeat"] = call.request_heartbeat;
    return dump(j);
}

Execution execute(const ValidatedCall& call, ToolContext& ctx) {
    const std::string& fn = call.name;

    if (fn == "send_message") {
        ctx.outbound.push_back(arg_string(call, "message"));
        return succeeded(Json{{"message", "message sent"}});
    }
    if (fn == "working_context_append") {
        auto r = working_context_append(ctx.working, arg_string(call, "content"), ctx.tok);
        if (!r) return failed(r.error());
        ctx.working = std::move(*r);
        return succeeded(Json{{"message", "appended"}, {"working_context_tokens", ctx.tok.count(ctx.working.text)},
                              {"working_context_cap", ctx.working.cap}});
    }
    if (fn == "working_context_replace") {
        auto r = working_context_replace(ctx.working, arg_string(call, "old_content"), arg_string(call, "new_content"),
                                         ctx.tok);
        if (!r) return failed(r.error());
        ctx.working = std::move(*r);
        return succeeded(Json{{"message", "replaced"}});
    }
    if (fn == "recall_search_text" || fn == "recall_search_date") {
        auto page = page_arg(call);
        if (!page) return failed(page.error());
        Result<Page<Message>> r = make_error(Errc::NotFound);
        Json query;
        if (fn == "recall_search_text") {
            query = arg_string(call, "query");
            r = ctx.recall.search_text(arg_string(call, "query"), *page, ctx.page_size);
        } else {
            auto start = parse_iso8601(arg_string(call, "start_date"));
            if (!start) return failed(start.error());
            auto end = parse_iso8601(arg_string(call, "end_date"));
            if (!end) return failed(end.error());
            // A bare end date covers that whole day.
            Instant end_t = *end;
            if (arg_string(call, "end_date").size() == 10) end_t += std::chrono::days{1} - Millis{1};
            query = Json{{"start_date", arg_string(call, "start_date")}, {"end_date", arg_string(call, "end_date")}};
            r = ctx.recall.search_date(*start, end_t, *page, ctx.page_size);
        }
        if (!r) return failed(r.error());
        Json body = page_meta(*r);
        body["query"] = query;
        body["results"] = Json::array();
        for (const auto& m : r->items) body["results"].push_back(message_json(m, ctx.item_chars));
        return succeeded(std::move(body));
    }
    if (fn == "archival_insert") {
        auto r = ctx.archival.insert(arg_string(call, "content"), ctx.now);
        if (!r) return failed(r.error());
        return succeeded(Json{{"message", "stored"}, {"id", *r}});
    }
    if (fn == "archival_search") {
        auto page = page_arg(call);
        if (!page) return failed(page.error());
        auto r = ctx.archival.search(arg_string(call, "query"), *page, ctx.page_size);
        if (!r) return failed(r.error());
        Json body = page_meta(*r);
        body["query"] = arg_string(call, "query");
        body["results"] = Json::array();
        for (const auto& h : r->items)
            body["results"].push_back(Json{{"id", h.id}, {"score", h.score}, {"text", clip(h.text, ctx.item_chars)}});
        return succeeded(std::move(body));
    }
    if (fn == "pause_heartbeats") {
        const std::int64_t minutes = arg_int(call, "minutes", 0);
        if (minutes < 0) return failed(make_error(Errc::InvalidRange, "minutes must be >= 0"));
        ctx.paused_until = ctx.now + std::chrono::minutes{minutes};
        return succeeded(Json{{"message", "heartbeats paused"}, {"until", format_iso8601(*ctx.paused_until)}});
    }
    return failed(make_error(Errc::ValidationError, "no handler for function '" + fn + "'"));
}

}  // namespace tiermem
