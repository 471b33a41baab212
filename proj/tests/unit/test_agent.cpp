#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace tiermem;
using namespace tiermem::testutil;

namespace {

std::string call(const std::string& fn, Json params, bool heartbeat, const std::string& thoughts = "") {
    Json j{{"function", fn}, {"params", std::move(params)}, {"request_heartbeat", heartbeat}};
    if (!thoughts.empty()) j["thoughts"] = thoughts;
    return j.dump();
}

std::string send(const std::string& text) { return call("send_message", Json{{"message", text}}, false); }

Agent make_agent(std::shared_ptr<Processor> p, AgentConfig cfg = {}) {
    auto a = Agent::create(std::move(cfg), std::move(p), bow(), t0());
    EXPECT_TRUE(a) << a.error().what();
    return std::move(*a);
}

Event user(std::string text, Instant when) { return Event{EventKind::user_message, std::move(text), when}; }

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST(Agent, RecallThenReplyScript) {
    auto proc = std::make_shared<ScriptedProcessor>(std::vector<ScriptEntry>{
        {call("recall_search_text", Json{{"query", "music"}}, true, "Search past chats."), std::nullopt, false},
        {call("working_context_append", Json{{"content", "Likes Taylor Swift."}}, true), "Taylor Swift", false},
        {send("Taylor Swift!"), std::nullopt, false},
    });
    Agent a = make_agent(proc);
    ASSERT_TRUE(a.observe(Role::user, "What music do you like?", t0()));
    ASSERT_TRUE(a.observe(Role::assistant, "For music, I could get into Taylor Swift.", t0() + std::chrono::minutes{1}));
    auto tr = a.step(user("Remember the artist you mentioned you could get into?", t0() + std::chrono::hours{24}));
    ASSERT_TRUE(tr) << tr.error().what();
    EXPECT_EQ(proc->calls(), 3u);
    ASSERT_EQ(tr->records.size(), 3u);
    EXPECT_EQ(tr->outbound, std::vector<std::string>{"Taylor Swift!"});
    EXPECT_FALSE(tr->chain_limit_hit);
    EXPECT_EQ(a.working().text, "Likes Taylor Swift.");
    EXPECT_NE(tr->records[0].function_result->find("Taylor Swift"), std::string::npos);
    EXPECT_EQ(tr->trace_id, "t1");
}

TEST(Agent, MonologueOnlyYields) {
    auto proc = std::make_shared<ScriptedProcessor>(ScriptedProcessor::from_outputs({R"({"thoughts":"nothing to do"})"}));
    Agent a = make_agent(proc);
    auto tr = a.step(user("ok", t0()));
    ASSERT_TRUE(tr);
    EXPECT_EQ(tr->records.size(), 1u);
    EXPECT_TRUE(tr->outbound.empty());
    EXPECT_EQ(tr->records[0].thoughts, "nothing to do");
}

TEST(Agent, EndlessHeartbeatHitsChainLimit) {
    auto proc = std::make_shared<CallbackProcessor>(
        [](const std::string&) -> Result<std::string> { return call("recall_search_text", Json{{"query", "x"}}, true); });
    AgentConfig cfg;
    cfg.max_chain = 4;
    Agent a = make_agent(proc, cfg);
    auto tr = a.step(user("loop", t0()));
    ASSERT_TRUE(tr);
    EXPECT_EQ(proc->calls(), 4u);
    EXPECT_TRUE(tr->chain_limit_hit);
    EXPECT_EQ(a.recall().entries().back().message.text, kChainLimitNote);
    EXPECT_EQ(a.recall().entries().back().message.role, Role::system);
}

TEST(Agent, RepairLoopFeedsErrorBack) {
    std::vector<std::string> prompts;
    auto proc = std::make_shared<CallbackProcessor>([&](const std::string& p) -> Result<std::string> {
        prompts.push_back(p);
        if (prompts.size() == 1) return std::string("not json");
        if (prompts.size() == 2) return call("halucinated_fn", Json::object(), false);
        return send("fixed");
    });
    Agent a = make_agent(proc);
    auto tr = a.step(user("hello", t0()));
    ASSERT_TRUE(tr);
    ASSERT_EQ(tr->records.size(), 3u);
    EXPECT_NE(tr->records[0].error->find("ParseError"), std::string::npos);
    EXPECT_NE(tr->records[1].error->find("unknown function"), std::string::npos);
    EXPECT_NE(prompts[1].find("ParseError: invalid object"), std::string::npos);
    EXPECT_NE(prompts[2].find("unknown function"), std::string::npos);
    EXPECT_EQ(tr->outbound, std::vector<std::string>{"fixed"});
}

TEST(Agent, TickSchedule) {
    auto proc = std::make_shared<ScriptedProcessor>(ScriptedProcessor::from_outputs({}));
    AgentConfig cfg;
    cfg.tick_interval = Millis{60'000};
    Agent a = make_agent(proc, cfg);
    ASSERT_TRUE(a.step(user("hi", t0())));

    auto early = a.tick(t0() + std::chrono::seconds{30});
    ASSERT_TRUE(early);
    EXPECT_FALSE(*early);

    auto due = a.tick(t0() + std::chrono::seconds{61});
    ASSERT_TRUE(due);
    ASSERT_TRUE(*due);
    EXPECT_NE(a.recall().entries()[a.recall().size() - 2].message.text.find("[scheduled heartbeat]"), std::string::npos);

    auto again = a.tick(t0() + std::chrono::seconds{90});
    ASSERT_TRUE(again);
    EXPECT_FALSE(*again);
    EXPECT_EQ(a.step_count(), 2u);

    Agent no_ticks = make_agent(proc);
    auto err = no_ticks.tick(t0());
    ASSERT_FALSE(err);
    EXPECT_EQ(err.error().code, Errc::InvalidConfig);
}

TEST(Agent, PauseSuppressesTicks) {
    auto proc = std::make_shared<ScriptedProcessor>(ScriptedProcessor::from_outputs(
        {call("pause_heartbeats", Json{{"minutes", 10}}, false)}));
    AgentConfig cfg;
    cfg.tick_interval = Millis{60'000};
    Agent a = make_agent(proc, cfg);
    ASSERT_TRUE(a.step(user("quiet please", t0())));
    auto r = a.tick(t0() + std::chrono::minutes{5});
    ASSERT_TRUE(r);
    EXPECT_FALSE(*r);
    r = a.tick(t0() + std::chrono::minutes{11});
    ASSERT_TRUE(r);
    EXPECT_TRUE(*r);
}

TEST(Agent, InvalidAndOutOfOrderEvents) {
    auto proc = std::make_shared<ScriptedProcessor>(ScriptedProcessor::from_outputs({}));
    Agent a = make_agent(proc);
    auto empty = a.step(user("", t0()));
    ASSERT_FALSE(empty);
    EXPECT_EQ(empty.error().code, Errc::InvalidEvent);
    ASSERT_TRUE(a.step(user("first", t0() + std::chrono::minutes{5})));
    const auto before = *a.compose();
    auto late = a.step(user("earlier", t0()));
    ASSERT_FALSE(late);
    EXPECT_EQ(late.error().code, Errc::OutOfOrder);
    EXPECT_EQ(*a.compose(), before);
    EXPECT_EQ(a.step_count(), 1u);
}

TEST(Agent, ProcessorFailureRollsBack) {
    auto proc = std::make_shared<ScriptedProcessor>(std::vector<ScriptEntry>{
        {call("working_context_append", Json{{"content", "kept?"}}, true), std::nullopt, false},
        {"", std::nullopt, true},
    });
    Agent a = make_agent(proc);
    auto before = *a.compose();
    auto tr = a.step(user("hello", t0()));
    ASSERT_FALSE(tr);
    EXPECT_EQ(tr.error().code, Errc::ProcessorUnavailable);
    EXPECT_EQ(*a.compose(), before);
    EXPECT_TRUE(a.working().text.empty());
    EXPECT_EQ(a.recall().size(), 0u);
    EXPECT_EQ(a.step_count(), 0u);
}

TEST(Agent, LongUserMessageIsSplit) {
    auto proc = std::make_shared<ScriptedProcessor>(ScriptedProcessor::from_outputs({}));
    Agent a = make_agent(proc);
    std::string big(a.max_message_tokens() * 5 * 3, 'a');
    auto tr = a.step(user(big, t0()));
    ASSERT_TRUE(tr) << tr.error().what();
    std::string joined;
    for (const auto& e : a.recall().entries())
        if (e.message.role == Role::user) joined += e.message.text;
    EXPECT_EQ(joined, big);
    for (const auto& m : a.queue().messages) EXPECT_LE(message_cost(m), a.max_message_tokens());
}

TEST(Agent, RecallHoldsEveryMessage) {
    std::mt19937_64 rng(5);
    auto proc = std::make_shared<CallbackProcessor>([&](const std::string&) -> Result<std::string> {
        return send(random_text(rng, 1, 200));
    });
    AgentConfig cfg;
    cfg.budget_total = 1024;
    Agent a = make_agent(proc, cfg);
    std::vector<std::string> texts;
    for (int i = 0; i < 80; ++i) {
        texts.push_back("msg " + std::to_string(i) + " " + random_text(rng, 1, 150));
        ASSERT_TRUE(a.step(user(texts.back(), t0() + std::chrono::minutes{i})));
    }
    EXPECT_GT(a.evicted_count(), 0u);
    std::size_t found = 0;
    for (const auto& t : texts)
        for (const auto& e : a.recall().entries())
            if (e.message.role == Role::user && e.message.text == t) {
                ++found;
                break;
            }
    EXPECT_EQ(found, texts.size());
    for (const auto& m : a.queue().messages) EXPECT_TRUE(a.recall().contains(m.id)) << m.id;
    EXPECT_LE(a.budget().system_reserved + a.budget().working_cap + a.budget().queue_cap, a.budget().total);
    auto prompt = a.compose();
    ASSERT_TRUE(prompt);
    EXPECT_LE(default_tokenizer().count(*prompt), a.budget().total);
}

TEST(Agent, Deterministic) {
    auto run = [] {
        std::mt19937_64 rng(9);
        auto proc = std::make_shared<CallbackProcessor>([&rng](const std::string&) -> Result<std::string> {
            return call("archival_insert", Json{{"content", random_text(rng, 5, 60)}}, (rng() % 3) == 0);
        });
        AgentConfig cfg;
        cfg.budget_total = 1024;
        Agent a = make_agent(proc, cfg);
        std::vector<std::string> digests;
        for (int i = 0; i < 20; ++i) {
            auto tr = a.step(user("event " + std::to_string(i), t0() + std::chrono::minutes{i}));
            EXPECT_TRUE(tr);
            for (const auto& r : tr->records) digests.push_back(r.input_digest);
        }
        digests.push_back(*a.compose());
        return digests;
    };
    EXPECT_EQ(run(), run());
}

TEST(Agent, SaveLoadRoundTrip) {
    TempDir dir("agent");
    auto proc = std::make_shared<CallbackProcessor>([](const std::string& p) -> Result<std::string> {
        if (p.find("remember") != std::string::npos && p.find("Saved fact") == std::string::npos)
            return call("working_context_append", Json{{"content", "Saved fact."}}, true);
        return send("ok");
    });
    AgentConfig cfg;
    cfg.budget_total = 1024;
    Agent a = make_agent(proc, cfg);
    for (int i = 0; i < 30; ++i)
        ASSERT_TRUE(a.step(user((i == 3 ? "please remember " : "chat ") + std::to_string(i),
                                t0() + std::chrono::minutes{i})));
    ASSERT_TRUE(a.archival_insert("doc line", t0() + std::chrono::hours{1}));
    ASSERT_TRUE(a.save(dir.path()));

    auto b = Agent::load(dir.path(), proc, bow());
    ASSERT_TRUE(b) << b.error().what();
    EXPECT_EQ(*b->compose(), *a.compose());
    EXPECT_EQ(b->working(), a.working());
    EXPECT_EQ(b->recall().size(), a.recall().size());
    EXPECT_EQ(b->archival().size(), a.archival().size());
    EXPECT_EQ(b->step_count(), a.step_count());
    EXPECT_EQ(b->evicted_count(), a.evicted_count());
    for (const char* q : {"chat", "remember", "ok"})
        EXPECT_EQ(b->recall().search_text(q, 0)->items, a.recall().search_text(q, 0)->items);

    // Both continue identically.
    auto ta = a.step(user("after", t0() + std::chrono::hours{2}));
    auto tb = b->step(user("after", t0() + std::chrono::hours{2}));
    ASSERT_TRUE(ta && tb);
    EXPECT_EQ(ta->records[0].input_digest, tb->records[0].input_digest);
}

TEST(Agent, CorruptSnapshotIsReported) {
    TempDir dir("corrupt");
    auto proc = std::make_shared<ScriptedProcessor>(ScriptedProcessor::from_outputs({}));
    Agent a = make_agent(proc);
    ASSERT_TRUE(a.step(user("hi", t0())));
    ASSERT_TRUE(a.save(dir.path()));

    const auto agent_json = dir.path() / "agent.json";
    const std::string full = read_file(agent_json);
    {
        std::ofstream out(agent_json, std::ios::binary | std::ios::trunc);
        out << full.substr(0, full.size() / 2);
    }
    auto b = Agent::load(dir.path(), proc, bow());
    ASSERT_FALSE(b);
    EXPECT_EQ(b.error().code, Errc::CorruptSnapshot);

    {
        std::ofstream out(agent_json, std::ios::binary | std::ios::trunc);
        out << full;
    }
    const auto recall = dir.path() / "recall.jsonl";
    const std::string lines = read_file(recall);
    {
        std::ofstream out(recall, std::ios::binary | std::ios::trunc);
        out << lines.substr(0, lines.size() - 7);
    }
    auto c = Agent::load(dir.path(), proc, bow());
    ASSERT_FALSE(c);
    EXPECT_EQ(c.error().code, Errc::CorruptSnapshot);
    EXPECT_NE(c.error().message.find("recall"), std::string::npos);

    auto missing = Agent::load(dir.path() / "nope", proc, bow());
    ASSERT_FALSE(missing);
}

TEST(Agent, DisabledFunctionsLeaveSchema) {
    AgentConfig cfg;
    cfg.disabled_functions = {"archival_search", "archival_insert"};
    auto proc = std::make_shared<ScriptedProcessor>(
        ScriptedProcessor::from_outputs({call("archival_search", Json{{"query", "x"}}, false)}));
    Agent a = make_agent(proc, cfg);
    EXPECT_EQ(a.registry().find("archival_search"), nullptr);
    EXPECT_EQ(a.instructions().find("- archival_search("), std::string::npos);
    EXPECT_NE(a.instructions().find("- recall_search_text("), std::string::npos);
    auto tr = a.step(user("hi", t0()));
    ASSERT_TRUE(tr);
    EXPECT_NE(tr->records[0].error->find("unknown function"), std::string::npos);
}

TEST(Agent, TraceEntriesOrder) {
    auto proc = std::make_shared<ScriptedProcessor>(ScriptedProcessor::from_outputs(
        {call("archival_insert", Json{{"content", "x"}}, true, "store it"), send("done")}));
    Agent a = make_agent(proc);
    auto tr = a.step(user("go", t0()));
    ASSERT_TRUE(tr);
    auto entries = trace_entries(*tr);
    std::vector<std::string> kinds;
    for (const auto& e : entries) kinds.push_back(e["kind"]);
    EXPECT_EQ(kinds, (std::vector<std::string>{"monologue", "function_call", "function_result", "function_call",
                                               "function_result", "outbound"}));
}
