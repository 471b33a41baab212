#include "tiermem/eval/dmr.hpp"

#include "policy_util.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <random>

namespace tiermem::eval {

namespace {

using nlohmann::json;

constexpr std::array<const char*, 24> kUserFiller = {
    "I spent most of the weekend repainting the fence in the back garden.",
    "Work has been hectic lately because two people on my team went on leave.",
    "We tried a new noodle place downtown and the broth was surprisingly good.",
    "My sister keeps sending me photos from her trip along the coast.",
    "I finally finished that long novel about the lighthouse keeper.",
    "The weather turned cold so quickly that I had to dig out my winter coat.",
    "I have been trying to wake up earlier and go for a run before breakfast.",
    "Our neighbours are renovating their kitchen and the noise starts at seven.",
    "I started learning to play the piano again after ten years away from it.",
    "The train was delayed again this morning so I missed the first meeting.",
    "I cooked a big pot of lentil soup and froze half of it for later.",
    "We are planning a small get together for my father when he retires.",
    "I signed up for a pottery class that meets on Thursday evenings.",
    "My knee has been sore since the hike, so I am taking it easy this week.",
    "I watched a documentary about deep sea creatures that glow in the dark.",
    "The local library is running a book swap and I brought a whole box.",
    "I have been thinking about changing jobs but I am not sure yet.",
    "My cousin is getting married in the spring and I agreed to give a toast.",
    "We finally fixed the leaking tap in the bathroom after weeks of dripping.",
    "I found an old box of letters from my grandmother in the attic.",
    "The farmers market had the best tomatoes I have tasted all year.",
    "I am trying to cut back on coffee but the afternoons are hard.",
    "We rearranged the living room so the couch faces the window now.",
    "My friend convinced me to join a trivia team at the pub on Tuesdays.",
};

constexpr std::array<const char*, 16> kAssistantFiller = {
    "That sounds like a lot to juggle, and it is good you are making time for yourself.",
    "I would love to hear more about how that turned out for you.",
    "It is always nice when a plan comes together better than expected.",
    "That must have been frustrating, though it sounds like you handled it well.",
    "Small routines like that can make a real difference over a few weeks.",
    "I remember you mentioning something similar a while back.",
    "That is a lovely way to spend an afternoon, especially in this season.",
    "Do you think you will keep it up once things get busier again?",
    "It sounds like the people around you really appreciate your help.",
    "Trying something new like that takes some courage, so well done.",
    "I hope the rest of the week is a little calmer for you.",
    "That detail made me smile, thank you for sharing it with me.",
    "It can take a while to settle into a change like that.",
    "Some of the best evenings are the ones nobody planned in advance.",
    "You seem to have a good sense of what you need right now.",
    "Let me know how it goes, I am curious what you decide.",
};

// Nouns absent from the filler banks, each at least six letters long.
constexpr std::array<const char*, 12> kKeywords = {
    "greyhound", "parakeet", "tortoise", "sailboat", "hamster",  "cockatoo",
    "goldfish",  "houseplant", "motorbike", "ferret", "canary",  "iguana",
};

constexpr std::array<const char*, 10> kSyllables = {"vel", "ra", "mon", "tis", "ko", "lun", "bri", "sa", "dor", "fen"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

std::string make_name(std::mt19937_64& rng) {
    std::string name;
    const std::size_t parts = 3 + pick(rng, 2);
    for (std::size_t i = 0; i < parts; ++i) name += kSyllables[pick(rng, kSyllables.size())];
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    return name;
}

std::string filler(std::mt19937_64& rng, bool user, std::size_t sentences) {
    std::string out;
    for (std::size_t i = 0; i < sentences; ++i) {
        if (!out.empty()) out += ' ';
        out += user ? kUserFiller[pick(rng, kUserFiller.size())] : kAssistantFiller[pick(rng, kAssistantFiller.size())];
    }
    return out;
}

// Longest alphabetic word; ties go to the first.
std::string longest_word(const std::string& text) {
    std::string best, cur;
    auto flush = [&] {
        if (cur.size() > best.size()) best = cur;
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalpha(c)) cur += static_cast<char>(std::tolower(c));
        else flush();
    }
    flush();
    return best;
}

Result<std::string> recall_policy(const std::string& prompt) {
    auto turn = detail::current_turn(prompt);
    if (!turn.user) return std::string{R"({"thoughts":"no question"})"};
    auto res = detail::last_result(turn);
    if (!res) {
        const std::string kw = longest_word(turn.user->text);
        return detail::call_json("search past conversations for " + kw, "recall_search_text", {{"query", kw}}, true);
    }
    for (const auto& item : res->value("results", json::array())) {
        const std::string role = item.value("role", "");
        if (item.value("id", "") == turn.user->id || (role != "user" && role != "assistant")) continue;
        return detail::send(item.value("text", ""));
    }
    return detail::send("I don't remember that.");
}

Result<std::string> summary_policy(const std::string& prompt) {
    auto turn = detail::current_turn(prompt);
    if (!turn.user) return std::string{R"({"thoughts":"no question"})"};
    const std::string kw = longest_word(turn.user->text);
    // Any other line of the prompt that mentions the keyword.
    std::size_t start = 0;
    while (start < prompt.size()) {
        std::size_t end = prompt.find('\n', start);
        if (end == std::string::npos) end = prompt.size();
        const std::string line = prompt.substr(start, end - start);
        if (ascii_lower(line).find(kw) != std::string::npos && line.find(turn.user->text) == std::string::npos)
            return detail::send(line);
        start = end + 1;
    }
    return detail::send("I don't remember that.");
}

Instant dmr_epoch() { return *parse_iso8601("2023-06-01T18:00:00Z"); }

}  // namespace

AgentConfig dmr_config() {
    AgentConfig cfg;
    cfg.budget_total = kDmrBudget;
    return cfg;
}

DmrCase gen_dmr(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DmrCase c;
    c.seed = seed;
    c.keyword = kKeywords[pick(rng, kKeywords.size())];
    const std::string name = make_name(rng);
    c.gold_answer = "my " + c.keyword + " is named " + name;
    c.gold_session_index = 1 + pick(rng, kDmrSessions - 1);
    const std::size_t gold_turn = 2 * pick(rng, kDmrSessionLength / 2);  // a user turn

    for (std::size_t s = 0; s < kDmrSessions; ++s) {
        std::vector<Message> session;
        const Instant start = dmr_epoch() + std::chrono::days{7 * s};
        for (std::size_t i = 0; i < kDmrSessionLength; ++i) {
            const bool user = i % 2 == 0;
            std::string text = filler(rng, user, 6);
            if (s + 1 == c.gold_session_index && i == gold_turn) {
                text = filler(rng, true, 5) + " By the way, " + c.gold_answer + " now.";
                c.gold_message = text;
            }
            session.push_back(make_message("s" + std::to_string(s + 1) + "-" + std::to_string(i + 1),
                                           user ? Role::user : Role::assistant, std::move(text),
                                           start + std::chrono::minutes{2 * i}));
        }
        c.sessions.push_back(std::move(session));
    }
    c.question = "What was the name of my " + c.keyword + "?";
    c.question_at = dmr_epoch() + std::chrono::days{7 * kDmrSessions};
    return c;
}

DmrCase with_nonsense_keyword(DmrCase c) {
    std::string nonsense = "zq" + std::string(c.keyword.rbegin(), c.keyword.rend()) + "xv";
    c.question.replace(c.question.find(c.keyword), c.keyword.size(), nonsense);
    c.keyword = std::move(nonsense);
    return c;
}

Result<DmrRun> run_dmr(const AgentConfig& config, const DmrCase& c, DmrMode mode) {
    AgentConfig cfg = config;
    std::shared_ptr<CallbackProcessor> policy;
    if (mode == DmrMode::recall) {
        policy = std::make_shared<CallbackProcessor>(recall_policy, "dmr-recall");
    } else {
        policy = std::make_shared<CallbackProcessor>(summary_policy, "dmr-summary");
        for (const char* fn : {"recall_search_text", "recall_search_date"}) cfg.disabled_functions.push_back(fn);
    }
    auto embedder = make_embedder(cfg);
    if (!embedder) return embedder.error();
    auto agent = Agent::create(cfg, policy, *embedder, dmr_epoch());
    if (!agent) return agent.error();

    for (const auto& session : c.sessions)
        for (const auto& m : session)
            if (auto r = agent->observe(m.role, m.text, m.timestamp); !r) return r.error();

    DmrRun run;
    std::string gold_id;
    for (const auto& e : agent->recall().entries())
        if (e.message.text == c.gold_message) gold_id = e.message.id;
    run.gold_evicted = std::none_of(agent->queue().messages.begin(), agent->queue().messages.end(),
                                    [&](const Message& m) { return m.id == gold_id; });
    auto composed = agent->compose();
    if (!composed) return composed.error();
    run.gold_in_context = composed->find(c.gold_answer) != std::string::npos;

    auto trace = agent->step(Event{EventKind::user_message, c.question, c.question_at});
    if (!trace) return trace.error();
    run.answer = trace->outbound.empty() ? std::string{} : trace->outbound.back();
    run.rouge = rouge_l(run.answer, c.gold_answer);
    for (const auto& rec : trace->records) {
        if (!rec.call || rec.call->name != "recall_search_text" || !rec.function_result) continue;
        auto j = json::parse(*rec.function_result, nullptr, false);
        if (!j.is_discarded())
            for (const auto& item : j.value("results", json::array()))
                if (!gold_id.empty() && item.value("id", "") == gold_id) run.retrieved_gold = true;
        break;
    }
    return run;
}

}  // namespace tiermem::eval
