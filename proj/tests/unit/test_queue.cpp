#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <set>

using namespace tiermem;
using namespace tiermem::testutil;

namespace {

QueueState make_queue(Tokens cap) {
    QueueState q;
    q.config.cap = cap;
    return q;
}

Tokens sum_costs(const QueueState& q) {
    Tokens t = q.summary ? message_cost(*q.summary) : 0;
    for (const auto& m : q.messages) t += message_cost(m);
    return t;
}

// Records what it was asked to fold.
class RecordingSummarizer final : public Summarizer {
public:
    Result<std::string> summarize(const std::optional<std::string>& prior, std::span<const Message> evicted,
                                  Tokens cap) override {
        priors.push_back(prior);
        batches.emplace_back(evicted.begin(), evicted.end());
        return truncation_summarizer(prior, evicted, cap);
    }
    std::vector<std::optional<std::string>> priors;
    std::vector<std::vector<Message>> batches;
};

class OverlongSummarizer final : public Summarizer {
public:
    Result<std::string> summarize(const std::optional<std::string>&, std::span<const Message>, Tokens cap) override {
        ++calls;
        return std::string(cap * 10 + 50, 'z');
    }
    int calls = 0;
};

QueueState fill_to_cap(QueueState q, int& next) {
    while (true) {
        auto r = enqueue(q, msg("m" + std::to_string(next), "Message number " + std::to_string(next) +
                                                                ". Some more words follow here."));
        if (!r) break;
        q = std::move(r->state);
        ++next;
    }
    return q;
}

}  // namespace

TEST(Enqueue, SmallMessageNoWarning) {
    auto q = make_queue(1000);
    auto r = enqueue(q, msg("m1", std::string(400, 'a')));
    ASSERT_TRUE(r);
    EXPECT_FALSE(r->warning);
    ASSERT_EQ(r->state.messages.size(), 1u);
    r = enqueue(r->state, msg("m2", "tiny"));
    ASSERT_TRUE(r);
    EXPECT_FALSE(r->warning);
    EXPECT_EQ(r->state.messages.back().id, "m2");
}

TEST(Enqueue, CrossingWarnRatioAppendsExactWarning) {
    auto q = make_queue(1000);
    int n = 0;
    std::optional<Message> warning;
    while (!warning) {
        auto r = enqueue(q, msg("m" + std::to_string(n++), std::string(200, 'a')));
        ASSERT_TRUE(r);
        q = std::move(r->state);
        warning = r->warning;
    }
    EXPECT_EQ(warning->text,
              "Warning: the conversation history will soon reach its maximum length and be trimmed. Make sure to "
              "save any important information from the conversation to your memory before it is removed.");
    EXPECT_EQ(warning->role, Role::system);
    EXPECT_EQ(q.messages.back(), *warning);
    EXPECT_GE(sum_costs(q) - message_cost(*warning), q.config.warn_threshold());
    EXPECT_TRUE(q.warned);

    // No second warning in the same fill cycle.
    auto r = enqueue(q, msg("late", "short"));
    ASSERT_TRUE(r);
    EXPECT_FALSE(r->warning);
}

TEST(Enqueue, OversizedMessageRejected) {
    auto q = make_queue(100);
    auto r = enqueue(q, msg("big", std::string(600, 'a')));
    ASSERT_FALSE(r);
    EXPECT_EQ(r.error().code, Errc::MessageTooLarge);
}

TEST(Enqueue, FullQueueAsksForEviction) {
    auto q = make_queue(100);
    int n = 0;
    q = fill_to_cap(q, n);
    auto r = enqueue(q, msg("x", std::string(100, 'a')));
    ASSERT_FALSE(r);
    EXPECT_EQ(r.error().code, Errc::QueueFull);
}

TEST(QueueConfig, RejectsBadRatios) {
    QueueConfig c;
    c.cap = 100;
    EXPECT_TRUE(c.validate());
    c.evict_target_ratio = 0.8;
    EXPECT_FALSE(c.validate());
    c.evict_target_ratio = 0.5;
    c.warn_ratio = 1.5;
    EXPECT_FALSE(c.validate());
}

TEST(Evict, FullQueueDropsMinimalPrefixToTarget) {
    auto q = make_queue(600);
    int n = 0;
    q = fill_to_cap(q, n);
    // Top up with small messages until at or above cap.
    while (sum_costs(q) < q.config.cap) {
        auto r = enqueue(q, msg("f" + std::to_string(n++), "x"));
        if (!r) break;
        q = std::move(r->state);
    }
    const auto before = q.messages;
    TruncationSummarizer s;
    auto out = evict(q, s, EvictMode::Force);
    ASSERT_TRUE(out);
    const auto& after = out->state;

    // Oracle: recompute sums from the message lists.
    EXPECT_LE(sum_costs(after), q.config.evict_target());
    ASSERT_TRUE(after.summary);
    const std::size_t cut = out->evicted_ids.size();
    ASSERT_GT(cut, 0u);
    for (std::size_t i = 0; i < cut; ++i) EXPECT_EQ(out->evicted_ids[i], before[i].id);
    EXPECT_TRUE(std::equal(after.messages.begin(), after.messages.end(), before.begin() + cut));
    // Minimal: keeping one more message would not leave room for the summary.
    Tokens survivors = 0;
    for (const auto& m : after.messages) survivors += message_cost(m);
    EXPECT_GT(survivors + message_cost(before[cut - 1]) + q.config.summary_budget(), q.config.evict_target());
    EXPECT_FALSE(after.warned);
    EXPECT_EQ(after.rendered().front(), *after.summary);
}

TEST(Evict, BelowCapIsNoOp) {
    auto q = make_queue(1000);
    q = enqueue(q, msg("m1", "hello")).value().state;
    TruncationSummarizer s;
    auto out = evict(q, s, EvictMode::IfFull);
    ASSERT_TRUE(out);
    EXPECT_TRUE(out->evicted_ids.empty());
    EXPECT_EQ(out->state.messages, q.messages);
    EXPECT_FALSE(out->state.summary);
}

TEST(Evict, SecondEvictionFoldsPriorSummary) {
    auto q = make_queue(400);
    int n = 0;
    RecordingSummarizer s;
    q = fill_to_cap(q, n);
    q = evict(q, s, EvictMode::Force).value().state;
    const std::string first_summary = q.summary->text;
    q = fill_to_cap(q, n);
    auto out = evict(q, s, EvictMode::Force);
    ASSERT_TRUE(out);
    ASSERT_EQ(s.priors.size(), 2u);
    EXPECT_FALSE(s.priors[0]);
    ASSERT_TRUE(s.priors[1]);
    EXPECT_EQ(*s.priors[1], first_summary);
    EXPECT_EQ(out->state.summary->id, "summary-2");
}

TEST(Evict, FlushEmptiesQueue) {
    auto q = make_queue(400);
    int n = 0;
    q = fill_to_cap(q, n);
    const std::size_t count = q.messages.size();
    TruncationSummarizer s;
    auto out = evict(q, s, EvictMode::Flush);
    ASSERT_TRUE(out);
    EXPECT_TRUE(out->state.messages.empty());
    EXPECT_EQ(out->evicted_ids.size(), count);
    EXPECT_LE(sum_costs(out->state), q.config.summary_budget());
}

TEST(Evict, OverlongSummaryFallsBackToTruncation) {
    auto q = make_queue(400);
    int n = 0;
    q = fill_to_cap(q, n);
    OverlongSummarizer s;
    auto out = evict(q, s, EvictMode::Force);
    ASSERT_TRUE(out);
    EXPECT_EQ(s.calls, 2);
    EXPECT_EQ(out->state.summary->text.rfind("SUMMARY(", 0), 0u);
    EXPECT_LE(sum_costs(out->state), q.config.evict_target());
}

TEST(Evict, SummaryBudgetTooSmallIsSummaryTooLarge) {
    auto q = make_queue(60);
    q.config.summary_ratio = 0.01;
    q.config.evict_target_ratio = 0.5;
    int n = 0;
    q = fill_to_cap(q, n);
    ASSERT_FALSE(q.messages.empty());
    TruncationSummarizer s;
    auto out = evict(q, s, EvictMode::Flush);
    ASSERT_FALSE(out);
    EXPECT_EQ(out.error().code, Errc::SummaryTooLarge);
}

TEST(TruncationSummarizer, KeepsFirstSentences) {
    std::vector<Message> ev = {msg("m1", "Alpha is here. More text.", at("2023-10-11T09:00:00Z")),
                               msg("m2", "Beta arrived! Then left.", at("2023-10-11T09:05:00Z"))};
    const auto s = truncation_summarizer(std::nullopt, ev, 1000);
    EXPECT_EQ(s.rfind("SUMMARY(n=2; span=2023-10-11T09:00:00.000Z..2023-10-11T09:05:00.000Z): ", 0), 0u);
    EXPECT_NE(s.find("Alpha is here."), std::string::npos);
    EXPECT_NE(s.find("Beta arrived!"), std::string::npos);
    EXPECT_EQ(s.find("More text."), std::string::npos);
}

TEST(TruncationSummarizer, EmptyEvictedReturnsPrior) {
    EXPECT_EQ(truncation_summarizer(std::string("old summary"), {}, 5), "old summary");
}

TEST(TruncationSummarizer, RespectsTinyCap) {
    std::mt19937_64 rng(2);
    for (Tokens cap = 1; cap < 40; ++cap) {
        std::vector<Message> ev;
        for (int i = 0; i < 5; ++i) ev.push_back(msg("m" + std::to_string(i), random_text(rng, 10, 200)));
        EXPECT_LE(count_tokens(truncation_summarizer(std::string("prior text here"), ev, cap)), cap);
    }
}

TEST(QueueProperties, RandomWorkloadsKeepInvariants) {
    std::mt19937_64 rng(99);
    for (int run = 0; run < 100; ++run) {
        auto q = make_queue(150 + rng() % 600);
        TruncationSummarizer s;
        std::vector<std::string> arrived, evicted;
        int warnings = 0, cycles = 0;
        for (int i = 0; i < 200; ++i) {
            auto m = msg("m" + std::to_string(i), random_text(rng, 1, 120), t0() + Millis{i});
            if (message_cost(m) > q.config.cap / 4) continue;
            auto r = enqueue(q, m);
            if (!r) {
                ASSERT_EQ(r.error().code, Errc::QueueFull);
                auto ev = evict(q, s, EvictMode::Force);
                ASSERT_TRUE(ev);
                if (ev->evicted_ids.empty()) ev = evict(q, s, EvictMode::Flush);
                ASSERT_TRUE(ev);
                ASSERT_LE(sum_costs(ev->state), q.config.evict_target());
                evicted.insert(evicted.end(), ev->evicted_ids.begin(), ev->evicted_ids.end());
                q = std::move(ev->state);
                ++cycles;
                r = enqueue(q, m);
                ASSERT_TRUE(r);
            }
            arrived.push_back(m.id);
            if (r->warning) {
                arrived.push_back(r->warning->id);
                ++warnings;
            }
            q = std::move(r->state);
            ASSERT_LE(sum_costs(q), q.config.cap);
        }
        // One warning per fill cycle at most.
        EXPECT_LE(warnings, cycles + 1);
        // Nothing dropped silently, FIFO preserved.
        std::vector<std::string> accounted = evicted;
        for (const auto& m : q.messages) accounted.push_back(m.id);
        EXPECT_EQ(accounted, arrived);
    }
}
