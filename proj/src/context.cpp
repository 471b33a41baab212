#include "tiermem/context.hpp"

#include <array>

namespace tiermem {

namespace {

constexpr std::array<std::pair<Role, std::string_view>, 5> kRoleNames{{
    {Role::user, "user"},
    {Role::assistant, "assistant"},
    {Role::system, "system"},
    {Role::function_call, "function_call"},
    {Role::function_result, "function_result"},
}};

std::string escape_line(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == '\\') {
            out += "\\\\";
        } else if (c == '\n') {
            out += "\\n";
        } else if (c == '\r') {
            out += "\\r";
        } else {
            out += c;
        }
    }
    return out;
}

std::string unescape_line(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
            const char n = text[++i];
            out += n == 'n' ? '\n' : n == 'r' ? '\r' : n;
        } else {
            out += text[i];
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(Role role) {
    for (const auto& [r, name] : kRoleNames)
        if (r == role) return name;
    return "unknown";
}

std::optional<Role> role_from_string(std::string_view name) {
    for (const auto& [r, n] : kRoleNames)
        if (n == name) return r;
    return std::nullopt;
}

std::size_t utf8_length(std::string_view text) {
    std::size_t n = 0;
    for (unsigned char c : text)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

Tokens HeuristicTokenizer::count(std::string_view text) const {
    const std::size_t chars = utf8_length(text);
    return (chars + kCharsPerToken - 1) / kCharsPerToken;
}

const Tokenizer& default_tokenizer() {
    static const HeuristicTokenizer tok;
    return tok;
}

Message make_message(std::string id, Role role, std::string text, Instant timestamp,
                     const Tokenizer& tok) {
    Message m{std::move(id), role, std::move(text), timestamp, 0};
    m.token_count = tok.count(m.text);
    return m;
}

std::string render_message(const Message& m) {
    std::string out = "[";
    out += format_iso8601(m.timestamp);
    out += "] ";
    out += to_string(m.role);
    out += " #";
    out += m.id;
    out += ": ";
    out += escape_line(m.text);
    return out;
}

Tokens message_cost(const Message& m, const Tokenizer& tok) {
    return tok.count(render_message(m) + "\n");
}

Tokens system_cost(std::string_view instructions, const Tokenizer& tok) {
    std::string frame{kWorkingHeader};
    frame += kQueueHeader;
    return tok.count(instructions) + tok.count(frame);
}

Result<TokenBudget> make_budget(Tokens total, std::string_view instructions, const Tokenizer& tok) {
    TokenBudget b;
    b.total = total;
    b.system_reserved = system_cost(instructions, tok);
    if (b.system_reserved >= total)
        return make_error(Errc::BudgetExceeded, "system instructions need " +
                                                    std::to_string(b.system_reserved) +
                                                    " tokens of a " + std::to_string(total) +
                                                    "-token budget");
    const Tokens rest = total - b.system_reserved;
    b.working_cap = rest / 4;
    b.queue_cap = rest - b.working_cap;
    return b;
}

Result<std::string> compose(const MainContext& ctx, const TokenBudget& budget, const Tokenizer& tok) {
    if (!budget.valid())
        return make_error(Errc::BudgetExceeded, "budget parts exceed total");
    const Tokens sys = system_cost(ctx.system_instructions, tok);
    if (sys > budget.system_reserved)
        return make_error(Errc::BudgetExceeded, "system instructions use " + std::to_string(sys) +
                                                    " > " + std::to_string(budget.system_reserved));
    const Tokens wc = tok.count(ctx.working_context);
    if (wc > budget.working_cap)
        return make_error(Errc::BudgetExceeded, "working context uses " + std::to_string(wc) +
                                                    " > " + std::to_string(budget.working_cap));
    Tokens q = 0;
    for (const auto& m : ctx.queue) q += message_cost(m, tok);
    if (q > budget.queue_cap)
        return make_error(Errc::BudgetExceeded, "queue uses " + std::to_string(q) + " > " +
                                                    std::to_string(budget.queue_cap));

    std::string doc = ctx.system_instructions;
    doc += kWorkingHeader;
    doc += ctx.working_context;
    doc += kQueueHeader;
    for (const auto& m : ctx.queue) {
        doc += render_message(m);
        doc += '\n';
    }
    const Tokens total = tok.count(doc);
    if (total > budget.total)
        return make_error(Errc::BudgetExceeded, "composed document uses " + std::to_string(total) +
                                                    " > " + std::to_string(budget.total));
    return doc;
}

std::vector<Message> parse_conversation(std::string_view composed) {
    std::vector<Message> out;
    const auto at = composed.rfind(kQueueHeader);
    if (at == std::string_view::npos) return out;
    std::string_view rest = composed.substr(at + kQueueHeader.size());
    while (!rest.empty()) {
        const auto nl = rest.find('\n');
        const std::string_view line = rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);

        if (line.size() < 3 || line.front() != '[') continue;
        const auto close = line.find("] ");
        if (close == std::string_view::npos) continue;
        auto ts = parse_iso8601(line.substr(1, close - 1));
        if (!ts) continue;
        const auto hash = line.find(" #", close + 2);
        if (hash == std::string_view::npos) continue;
        auto role = role_from_string(line.substr(close + 2, hash - close - 2));
        if (!role) continue;
        const auto colon = line.find(": ", hash + 2);
        if (colon == std::string_view::npos) continue;
        Message m;
        m.id = std::string(line.substr(hash + 2, colon - hash - 2));
        m.role = *role;
        m.text = unescape_line(line.substr(colon + 2));
        m.timestamp = *ts;
        out.push_back(std::move(m));
    }
    return out;
}

std::string_view default_memory_preamble() {
    return "You are a persistent conversational agent whose context window is managed for you.\n"
           "Your view of the world is split into tiers:\n"
           "- These instructions are fixed and always visible.\n"
           "- WORKING CONTEXT is a small scratchpad you edit with working_context_append and "
           "working_context_replace. Keep key facts about the user and yourself there.\n"
           "- CONVERSATION is a queue of recent events. When it fills up the oldest events are "
           "replaced by a lossy summary. A system warning appears before that happens; save "
           "anything important first.\n"
           "- Recall storage keeps every past event verbatim. Search it by text or by date.\n"
           "- Archival storage is an unlimited datastore searched by meaning. Insert facts and "
           "documents with archival_insert and query them with archival_search.\n"
           "Search results are paginated; request the next page to see more.\n"
           "Reply with exactly one JSON object: {\"thoughts\": string, \"function\": string, "
           "\"params\": object, \"request_heartbeat\": boolean}. Only send_message is visible to "
           "the user. Set request_heartbeat to true to run again right after the function "
           "returns; otherwise you yield until the next event.\n";
}

}  // namespace tiermem
