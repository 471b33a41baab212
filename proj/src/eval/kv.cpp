#include "tiermem/eval/kv.hpp"

#include "policy_util.hpp"

#include <cstdio>
#include <random>
#include <regex>
#include <unordered_map>
#include <unordered_set>

namespace tiermem::eval {

namespace {

using nlohmann::json;

// Unbiased draw from [0, n) by rejection.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    return x % n;
}

std::string uuid4(std::mt19937_64& rng) {
    std::uint64_t hi = rng(), lo = rng();
    hi = (hi & ~0xF000ULL) | 0x4000ULL;                 // version 4
    lo = (lo & ~(0xC000ULL << 48)) | (0x8000ULL << 48);  // RFC 4122 variant
    char buf[37];
    std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx", static_cast<unsigned>(hi >> 32),
                  static_cast<unsigned>((hi >> 16) & 0xFFFF), static_cast<unsigned>(hi & 0xFFFF),
                  static_cast<unsigned>(lo >> 48), static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFULL));
    return buf;
}

const std::regex& uuid_re() {
    static const std::regex re("[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}");
    return re;
}

const std::regex& pair_re() {
    static const std::regex re("KEY = ([0-9a-f-]{36}) ; VALUE = ([0-9a-f-]{36})");
    return re;
}

std::string first_uuid(const std::string& text) {
    std::smatch m;
    return std::regex_search(text, m, uuid_re()) ? m.str(0) : std::string{};
}

Instant kv_epoch() { return *parse_iso8601("2023-10-01T00:00:00Z"); }

// Searches the starting key, then each value it finds, and answers with the
// first value whose search turns up no KEY line for it.
Result<std::string> archival_policy(const std::string& prompt) {
    auto turn = detail::current_turn(prompt);
    if (!turn.user) return std::string{R"({"thoughts":"no question"})"};
    auto res = detail::last_result(turn);
    if (!res) {
        const std::string k0 = first_uuid(turn.user->text);
        if (k0.empty()) return detail::send("I could not find a key in the question.");
        return detail::call_json("look up the starting key", "archival_search", {{"query", k0}}, true);
    }
    if (!res->contains("query") || !(*res)["query"].is_string()) return detail::send("unknown");
    const std::string q = (*res)["query"];
    const std::string prefix = "KEY = " + q + " ; VALUE = ";
    for (const auto& item : res->value("results", json::array())) {
        const std::string text = item.value("text", "");
        auto pos = text.find(prefix);
        if (pos == std::string::npos) continue;
        const std::string next = first_uuid(text.substr(pos + prefix.size()));
        if (next.empty()) continue;
        return detail::call_json("value may be a key, follow it", "archival_search", {{"query", next}}, true);
    }
    return detail::send(q);
}

// Follows whatever pairs are still visible in the prompt.
Result<std::string> truncation_policy(const std::string& prompt) {
    auto turn = detail::current_turn(prompt);
    if (!turn.user) return std::string{R"({"thoughts":"no question"})"};
    const std::string k0 = first_uuid(turn.user->text);
    std::unordered_map<std::string, std::string> visible;
    for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), pair_re()); it != std::sregex_iterator(); ++it)
        visible.emplace((*it)[1].str(), (*it)[2].str());
    auto at = visible.find(k0);
    if (at == visible.end()) return detail::send("unknown");
    std::unordered_set<std::string> seen{k0};
    std::string cur = at->second;
    while (true) {
        auto nx = visible.find(cur);
        if (nx == visible.end() || !seen.insert(cur).second) break;
        cur = nx->second;
    }
    return detail::send(cur);
}

}  // namespace

std::string kv_line(const KvPair& p) { return "KEY = " + p.key + " ; VALUE = " + p.value; }

std::string kv_question(const std::string& initial_key) {
    return "Find the value for the key " + initial_key +
           ". A value may itself be a key; keep looking it up until you reach a value that is not a key, and reply "
           "with that value only.";
}

Result<KvDataset> gen_kv(int depth, std::uint64_t pair_seed, std::uint64_t ordering_seed) {
    if (depth < 0 || depth > kKvMaxDepth)
        return make_error(Errc::InvalidRange, "depth must be in [0, " + std::to_string(kKvMaxDepth) + "]");
    std::mt19937_64 rng(pair_seed);
    std::unordered_set<std::string> used;
    auto fresh = [&] {
        std::string u;
        do u = uuid4(rng);
        while (!used.insert(u).second);
        return u;
    };

    KvDataset ds;
    ds.depth = depth;
    ds.pair_seed = pair_seed;
    ds.ordering_seed = ordering_seed;
    std::vector<std::string> chain;
    for (int i = 0; i < depth + 2; ++i) chain.push_back(fresh());
    ds.initial_key = chain.front();
    for (int i = 0; i <= depth; ++i) ds.pairs.push_back({chain[i], chain[i + 1]});
    while (ds.pairs.size() < kKvPairs) {
        std::string k = fresh();
        ds.pairs.push_back({std::move(k), fresh()});
    }

    std::mt19937_64 shuffle_rng(ordering_seed ^ 0x9E3779B97F4A7C15ULL);
    for (std::size_t i = ds.pairs.size() - 1; i > 0; --i)
        std::swap(ds.pairs[i], ds.pairs[bounded(shuffle_rng, i + 1)]);
    return ds;
}

Result<std::string> kv_oracle(const KvDataset& ds) {
    std::unordered_map<std::string, std::string> map;
    for (const auto& p : ds.pairs) map.emplace(p.key, p.value);
    auto it = map.find(ds.initial_key);
    if (it == map.end()) return make_error(Errc::KeyNotFound, "initial key " + ds.initial_key + " is not a key");
    std::unordered_set<std::string> visited{ds.initial_key};
    std::string cur = it->second;
    while ((it = map.find(cur)) != map.end()) {
        if (!visited.insert(cur).second) return make_error(Errc::CycleDetected, "cycle through key " + cur);
        cur = it->second;
    }
    return cur;
}

Tokens kv_truncation_budget(const KvDataset& ds) {
    Tokens total = 0;
    std::size_t i = 1;
    for (const auto& p : ds.pairs)
        total += message_cost(make_message("m" + std::to_string(i++), Role::user, kv_line(p), kv_epoch()));
    return (total + 1) / 2;
}

Result<KvRun> run_kv(const AgentConfig& config, const KvDataset& ds, KvMode mode) {
    auto expected = kv_oracle(ds);
    if (!expected) return expected.error();

    AgentConfig cfg = config;
    std::shared_ptr<CallbackProcessor> policy;
    if (mode == KvMode::archival) {
        policy = std::make_shared<CallbackProcessor>(archival_policy, "kv-archival");
    } else {
        policy = std::make_shared<CallbackProcessor>(truncation_policy, "kv-truncation");
        cfg.budget_total = kv_truncation_budget(ds);
        const auto& defaults = FunctionRegistry::defaults();
        for (const auto& s : defaults.schemas())
            if (s.name != "send_message") cfg.disabled_functions.push_back(s.name);
    }
    auto embedder = make_embedder(cfg);
    if (!embedder) return embedder.error();
    const Instant t0 = kv_epoch();
    auto agent = Agent::create(cfg, policy, *embedder, t0);
    if (!agent) return agent.error();

    for (const auto& p : ds.pairs) {
        if (mode == KvMode::archival) {
            if (auto r = agent->archival_insert(kv_line(p), t0); !r) return r.error();
        } else {
            if (auto r = agent->observe(Role::user, kv_line(p), t0); !r) return r.error();
        }
    }
    auto trace = agent->step(Event{EventKind::user_message, kv_question(ds.initial_key), t0 + std::chrono::minutes{1}});
    if (!trace) return trace.error();

    KvRun run;
    run.expected = *expected;
    run.answer = trace->outbound.empty() ? std::string{} : trace->outbound.back();
    run.correct = run.answer == run.expected;
    run.n_processor_calls = policy->calls();
    for (const auto& rec : trace->records)
        if (rec.call && rec.call->name == "archival_search") ++run.n_search_calls;
    return run;
}

}  // namespace tiermem::eval
