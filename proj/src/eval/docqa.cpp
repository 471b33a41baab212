#include "tiermem/eval/docqa.hpp"

#include "policy_util.hpp"

#include <cctype>

namespace tiermem::eval {

namespace {

using nlohmann::json;

constexpr std::string_view kNoAnswer = "I could not find the answer in the documents.";

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::string subject_of(std::string_view q) {
    std::string s = trim(q);
    while (!s.empty() && (s.back() == '?' || s.back() == '.')) s.pop_back();
    for (std::string_view lead : {"what is ", "what was ", "who is ", "who was ", "where is ", "where was "}) {
        if (ascii_lower(s).rfind(lead, 0) == 0) return trim(std::string_view(s).substr(lead.size()));
    }
    return s;
}

// Paragraph texts visible in the prompt: plain message texts plus the
// result items of archival_search.
std::vector<std::string> visible_texts(const std::string& prompt) {
    std::vector<std::string> out;
    for (const auto& m : parse_conversation(prompt)) {
        if (m.role == Role::user) continue;
        if (m.role == Role::function_result) {
            auto j = json::parse(m.text, nullptr, false);
            if (!j.is_discarded() && j.is_object()) {
                for (const auto& item : j.value("results", json::array())) out.push_back(item.value("text", ""));
                continue;
            }
        }
        out.push_back(m.text);
    }
    return out;
}

Result<std::string> fixed_policy(const std::string& prompt) {
    auto turn = detail::current_turn(prompt);
    if (!turn.user) return std::string{R"({"thoughts":"no question"})"};
    auto a = read_answer(turn.user->text, visible_texts(prompt));
    return detail::send(a ? *a : std::string(kNoAnswer));
}

Result<std::string> paged_policy(const std::string& prompt) {
    auto turn = detail::current_turn(prompt);
    if (!turn.user) return std::string{R"({"thoughts":"no question"})"};
    auto res = detail::last_result(turn);
    if (!res)
        return detail::call_json("search the documents", "archival_search",
                                 {{"query", turn.user->text}, {"page", 0}}, true);
    if (auto a = read_answer(turn.user->text, visible_texts(prompt))) return detail::send(*a);
    if (res->value("has_more", false)) {
        const int next = res->value("page", 0) + 1;
        return detail::call_json("not on this page, read the next one", "archival_search",
                                 {{"query", turn.user->text}, {"page", next}}, true);
    }
    return detail::send(std::string(kNoAnswer));
}

Instant docqa_epoch() { return *parse_iso8601("2023-10-01T00:00:00Z"); }

}  // namespace

std::vector<std::string> split_paragraphs(std::string_view document) {
    std::vector<std::string> out;
    std::string cur;
    std::size_t pos = 0;
    auto flush = [&] {
        std::string p = trim(cur);
        if (!p.empty()) out.push_back(std::move(p));
        cur.clear();
    };
    while (pos <= document.size()) {
        std::size_t end = document.find('\n', pos);
        if (end == std::string_view::npos) end = document.size();
        std::string_view line = document.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) {
            flush();
        } else {
            if (!cur.empty()) cur += '\n';
            cur += line;
        }
        pos = end + 1;
    }
    flush();
    return out;
}

std::optional<std::string> read_answer(std::string_view question, const std::vector<std::string>& texts) {
    const std::string subject = ascii_lower(subject_of(question));
    if (subject.empty()) return std::nullopt;
    for (const auto& text : texts) {
        const std::string lower = ascii_lower(text);
        for (std::string_view verb : {" is ", " was "}) {
            const std::string needle = subject + std::string(verb);
            const auto at = lower.find(needle);
            if (at == std::string::npos) continue;
            const std::size_t from = at + needle.size();
            std::size_t to = text.find_first_of(".;\n", from);
            if (to == std::string::npos) to = text.size();
            std::string phrase = trim(std::string_view(text).substr(from, to - from));
            if (!phrase.empty()) return phrase;
        }
    }
    return std::nullopt;
}

Result<DocQaResult> run_docqa(const AgentConfig& config, const std::vector<std::string>& corpus,
                              const std::vector<DocQaQuestion>& questions, std::size_t k, DocQaMode mode) {
    if (k == 0) return make_error(Errc::InvalidRange, "K must be >= 1");
    AgentConfig cfg = config;
    cfg.page_size = k;
    auto embedder = make_embedder(cfg);
    if (!embedder) return embedder.error();

    std::vector<std::string> paragraphs;
    for (const auto& doc : corpus)
        for (auto& p : split_paragraphs(doc)) paragraphs.push_back(std::move(p));

    DocQaResult out;
    const Instant t0 = docqa_epoch();
    for (const auto& q : questions) {
        auto policy = std::make_shared<CallbackProcessor>(mode == DocQaMode::paged ? paged_policy : fixed_policy,
                                                          "docqa");
        auto agent = Agent::create(cfg, policy, *embedder, t0);
        if (!agent) return agent.error();
        for (const auto& p : paragraphs)
            if (auto r = agent->archival_insert(p, t0); !r) return r.error();

        if (mode == DocQaMode::fixed_k) {
            std::string block = "Retrieved documents:";
            if (!paragraphs.empty()) {
                auto top = agent->archival().search(q.question, 0, k);
                if (!top) return top.error();
                std::size_t i = 1;
                for (const auto& hit : top->items) block += "\n[" + std::to_string(i++) + "] " + hit.text;
            } else {
                block += " none";
            }
            if (auto r = agent->observe(Role::system, block, t0); !r) return r.error();
        }
        auto trace = agent->step(Event{EventKind::user_message, q.question, t0 + std::chrono::minutes{1}});
        if (!trace) return trace.error();

        const std::string answer = trace->outbound.empty() ? std::string{} : trace->outbound.back();
        const bool ok = !q.answer.empty() && answer.find(q.answer) != std::string::npos;
        std::size_t pages = 0;
        for (const auto& rec : trace->records)
            if (rec.call && rec.call->name == "archival_search") ++pages;
        out.answers.push_back(answer);
        out.per_question.push_back(ok);
        out.pages_read.push_back(pages);
        out.correct += ok ? 1 : 0;
        ++out.total;
    }
    out.accuracy = out.total == 0 ? 0.0 : static_cast<double>(out.correct) / static_cast<double>(out.total);
    return out;
}

Result<std::vector<DocQaQuestion>> parse_questions(std::string_view json_text) {
    auto j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) return make_error(Errc::ParseError, "questions must be a JSON array");
    std::vector<DocQaQuestion> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        if (!e.is_object() || !e.contains("question") || !e["question"].is_string() || !e.contains("answer") ||
            !e["answer"].is_string())
            return make_error(Errc::ParseError, "question " + std::to_string(i) + " needs string question and answer");
        out.push_back({e["question"].get<std::string>(), e["answer"].get<std::string>()});
    }
    return out;
}

}  // namespace tiermem::eval
