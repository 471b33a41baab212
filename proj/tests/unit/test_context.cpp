#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tiermem;
using namespace tiermem::testutil;

TEST(CountTokens, EmptyIsZero) { EXPECT_EQ(count_tokens(""), 0u); }

TEST(CountTokens, TwoHundredFiftyCharsIsFifty) {
    EXPECT_EQ(count_tokens(std::string(250, 'x')), 50u);
    std::mt19937_64 rng(3);
    EXPECT_EQ(count_tokens(random_text(rng, 250, 250)), 50u);
}

TEST(CountTokens, SixCharsRoundUp) { EXPECT_EQ(count_tokens("abcdef"), 2u); }

TEST(CountTokens, CountsCodePointsNotBytes) {
    // Five two-byte code points.
    EXPECT_EQ(count_tokens("\xC3\xA9\xC3\xA9\xC3\xA9\xC3\xA9\xC3\xA9"), 1u);
    EXPECT_EQ(utf8_length("h\xC3\xA9llo"), 5u);
}

TEST(CountTokens, MonotoneUnderConcatenation) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        auto a = random_text(rng, 0, 60), b = random_text(rng, 0, 60);
        EXPECT_GE(count_tokens(a + b), std::max(count_tokens(a), count_tokens(b)));
    }
}

TEST(Message, TokenCountCached) {
    auto m = msg("m1", "abcdefghijk");
    EXPECT_EQ(m.token_count, 3u);
}

TEST(Render, OneLineWithIdRoleAndTimestamp) {
    auto m = msg("m7", "line one\nline two \\ done", at("2023-10-11T09:30:00.250Z"), Role::assistant);
    EXPECT_EQ(render_message(m), "[2023-10-11T09:30:00.250Z] assistant #m7: line one\\nline two \\\\ done");
}

TEST(Budget, DefaultSplit) {
    const std::string instr(500, 'i');
    auto b = make_budget(4096, instr);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->system_reserved, system_cost(instr));
    const Tokens rest = 4096 - b->system_reserved;
    EXPECT_EQ(b->working_cap, rest / 4);
    EXPECT_EQ(b->queue_cap, rest - rest / 4);
    EXPECT_TRUE(b->valid());
}

TEST(Budget, InstructionsLargerThanTotal) {
    auto b = make_budget(10, std::string(500, 'i'));
    ASSERT_FALSE(b);
    EXPECT_EQ(b.error().code, Errc::BudgetExceeded);
}

TEST(Compose, InstructionsOnlyWhenEmpty) {
    auto b = *make_budget(4096, "You are an agent.");
    auto doc = compose(MainContext{"You are an agent.", "", {}}, b);
    ASSERT_TRUE(doc);
    EXPECT_EQ(doc->rfind("You are an agent.", 0), 0u);
    EXPECT_TRUE(parse_conversation(*doc).empty());
    EXPECT_LE(count_tokens(*doc), b.total);
}

TEST(Compose, PreservesInsertionOrder) {
    auto b = *make_budget(4096, "sys");
    std::vector<Message> q = {msg("m1", "first"), msg("m2", "second", t0(), Role::assistant),
                              msg("m3", "third", t0(), Role::system)};
    auto doc = compose(MainContext{"sys", "Birthday: 11th October.", q}, b);
    ASSERT_TRUE(doc);
    std::string expected = std::string("sys") + std::string(kWorkingHeader) + "Birthday: 11th October." +
                           std::string(kQueueHeader);
    for (const auto& m : q) expected += render_message(m) + "\n";
    EXPECT_EQ(*doc, expected);
}

TEST(Compose, OverCapIsBudgetExceeded) {
    auto b = *make_budget(200, "sys");
    auto big_working = compose(MainContext{"sys", std::string(b.working_cap * 5 + 5, 'w'), {}}, b);
    ASSERT_FALSE(big_working);
    EXPECT_EQ(big_working.error().code, Errc::BudgetExceeded);

    std::vector<Message> q;
    for (int i = 0; i < 40; ++i) q.push_back(msg("m" + std::to_string(i), std::string(40, 'q')));
    auto big_queue = compose(MainContext{"sys", "", q}, b);
    ASSERT_FALSE(big_queue);
    EXPECT_EQ(big_queue.error().code, Errc::BudgetExceeded);

    TokenBudget bogus{100, 50, 40, 40};
    auto invalid = compose(MainContext{"sys", "", {}}, bogus);
    ASSERT_FALSE(invalid);
    EXPECT_EQ(invalid.error().code, Errc::BudgetExceeded);
}

TEST(Compose, DistinctQueuesRenderDistinctly) {
    auto b = *make_budget(4096, "sys");
    auto a = compose(MainContext{"sys", "", {msg("m1", "hi"), msg("m2", "hi")}}, b);
    auto c = compose(MainContext{"sys", "", {msg("m1", "hi"), msg("m3", "hi")}}, b);
    auto d = compose(MainContext{"sys", "", {msg("m1", "hi\nm2: hi")}}, b);
    ASSERT_TRUE(a && c && d);
    EXPECT_NE(*a, *c);
    EXPECT_NE(*a, *d);
}

TEST(ParseConversation, InvertsRendering) {
    std::mt19937_64 rng(5);
    auto b = *make_budget(100000, "sys");
    std::vector<Message> q;
    for (int i = 0; i < 50; ++i) {
        auto m = msg("m" + std::to_string(i), random_text(rng, 1, 80), t0() + Millis{i * 1000},
                     static_cast<Role>(i % 5));
        m.token_count = 0;
        q.push_back(m);
    }
    auto doc = compose(MainContext{"sys", "notes", q}, b);
    ASSERT_TRUE(doc);
    EXPECT_EQ(parse_conversation(*doc), q);
}

TEST(Roles, StringRoundTrip) {
    for (Role r : {Role::user, Role::assistant, Role::system, Role::function_call, Role::function_result})
        EXPECT_EQ(role_from_string(to_string(r)), r);
    EXPECT_FALSE(role_from_string("robot"));
}

TEST(Time, Iso8601RoundTrip) {
    auto t = at("2023-10-11T09:30:00.125Z");
    EXPECT_EQ(format_iso8601(t), "2023-10-11T09:30:00.125Z");
    EXPECT_EQ(format_iso8601(at("2023-10-11")), "2023-10-11T00:00:00.000Z");
    EXPECT_FALSE(parse_iso8601("yesterday"));
    EXPECT_FALSE(parse_iso8601("2023-13-01"));
}
